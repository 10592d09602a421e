#include "hift/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "hift/errors.hpp"

namespace hift {

namespace {

void put_u16(std::ostream& os, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint16_t get_u16(std::istream& is) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

} // namespace

void save_checkpoint(const std::string& path, const ParamRefs& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ContractError("cannot open checkpoint for writing: " + path);
    os.write("HIFT", 4);
    put_u32(os, kCheckpointVersion);
    put_u32(os, static_cast<std::uint32_t>(params.size()));
    for (const Parameter* p : params) {
        if (p->name.size() > 0xffff) throw ContractError("parameter name too long: " + p->name);
        put_u16(os, static_cast<std::uint16_t>(p->name.size()));
        os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        const Tensor& t = p->value();
        os.put(static_cast<char>(t.rank()));
        for (int d = 0; d < t.rank(); ++d) put_u32(os, static_cast<std::uint32_t>(t.extent(d)));
        for (int i = 0; i < t.size(); ++i) put_f64(os, t[i]);
    }
    if (!os) throw ContractError("write failure on checkpoint: " + path);
}

void load_checkpoint(const std::string& path, const ParamRefs& params) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ContractError("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "HIFT", 4) != 0) throw ContractError("bad checkpoint magic in " + path);
    const std::uint32_t version = get_u32(is);
    if (version != kCheckpointVersion) {
        throw ContractError("unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint32_t count = get_u32(is);

    std::map<std::string, Parameter*> by_name;
    for (Parameter* p : params) by_name[p->name] = p;
    std::map<std::string, bool> seen;

    for (std::uint32_t k = 0; k < count; ++k) {
        const std::uint16_t len = get_u16(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        const int rank = is.get();
        Shape shape(static_cast<size_t>(rank));
        for (int d = 0; d < rank; ++d) shape[static_cast<size_t>(d)] = static_cast<int>(get_u32(is));
        const int n = shape_size(shape);
        std::vector<double> data(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) data[static_cast<size_t>(i)] = get_f64(is);
        if (!is) throw ContractError("truncated checkpoint: " + path);

        auto it = by_name.find(name);
        if (it == by_name.end()) throw ContractError("checkpoint has unknown parameter '" + name + "'");
        Parameter* p = it->second;
        if (p->value().shape() != shape) {
            throw ContractError("checkpoint shape mismatch for '" + name + "': file has " +
                                shape_str(shape) + ", model has " + shape_str(p->value().shape()));
        }
        p->value() = Tensor(shape, std::move(data));
        seen[name] = true;
    }
    for (Parameter* p : params) {
        if (!seen.count(p->name)) {
            throw ContractError("checkpoint missing parameter '" + p->name + "'");
        }
    }
}

} // namespace hift
