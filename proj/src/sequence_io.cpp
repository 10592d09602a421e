#include "hift/sequence_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace hift {

namespace {

void write_pnm(const std::string& path, const Image& img, bool color) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ContractError("cannot write image: " + path);
    os << (color ? "P6" : "P5") << "\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> row(static_cast<size_t>(img.width) * (color ? 3 : 1));
    for (int y = 0; y < img.height; ++y) {
        size_t k = 0;
        for (int x = 0; x < img.width; ++x) {
            const int nc = color ? 3 : 1;
            for (int c = 0; c < nc; ++c) {
                const int src = c < img.channels ? c : 0;
                const double v = std::clamp(img.at(src, y, x), 0.0, 255.0);
                row[k++] = static_cast<unsigned char>(std::lround(v));
            }
        }
        os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
}

int read_pnm_int(std::istream& is) {
    // skips whitespace and '#' comments
    int c = is.get();
    while (c != EOF && (std::isspace(c) || c == '#')) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = is.get();
        }
        c = is.get();
    }
    int v = 0;
    bool any = false;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        any = true;
        c = is.get();
    }
    if (!any) throw ContractError("malformed PNM header");
    return v;
}

} // namespace

void write_pgm(const std::string& path, const Image& img) { write_pnm(path, img, false); }
void write_ppm(const std::string& path, const Image& img) { write_pnm(path, img, true); }

Image read_image(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ContractError("cannot open image: " + path);
    char m0 = static_cast<char>(is.get());
    char m1 = static_cast<char>(is.get());
    if (m0 != 'P' || (m1 != '5' && m1 != '6')) {
        throw ContractError("unsupported image format in " + path + " (need binary PGM or PPM)");
    }
    const bool color = m1 == '6';
    const int w = read_pnm_int(is);
    const int h = read_pnm_int(is);
    const int maxval = read_pnm_int(is);
    if (maxval != 255) throw ContractError("only 8-bit PNM supported: " + path);
    const int nc = color ? 3 : 1;
    std::vector<unsigned char> raw(static_cast<size_t>(w) * h * nc);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!is) throw ContractError("truncated image: " + path);
    Image img(w, h, nc);
    size_t k = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < nc; ++c) img.at(c, y, x) = static_cast<double>(raw[k++]);
    return img;
}

void write_boxes(const std::string& path, const std::vector<BBox>& boxes) {
    std::ofstream os(path);
    if (!os) throw ContractError("cannot write " + path);
    char line[128];
    for (const BBox& b : boxes) {
        std::snprintf(line, sizeof(line), "%.4f,%.4f,%.4f,%.4f\n", b.x1(), b.y1(), b.w, b.h);
        os << line;
    }
}

std::vector<BBox> read_boxes(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ContractError("cannot open " + path);
    std::vector<BBox> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::replace(line.begin(), line.end(), '\t', ' ');
        std::istringstream ls(line);
        double x, y, w, h;
        if (!(ls >> x >> y >> w >> h)) {
            throw ContractError("malformed box line in " + path + ": '" + line + "'");
        }
        out.push_back(BBox::from_corner(x, y, w, h));
    }
    return out;
}

void write_sequence_dir(const std::string& dir, const SynthSequence& seq) {
    fs::create_directories(dir);
    char name[32];
    for (size_t i = 0; i < seq.frames.size(); ++i) {
        const bool color = seq.frames[i].channels == 3;
        std::snprintf(name, sizeof(name), "%06zu.%s", i + 1, color ? "ppm" : "pgm");
        write_pnm((fs::path(dir) / name).string(), seq.frames[i], color);
    }
    write_boxes((fs::path(dir) / "groundtruth.txt").string(), seq.gt);
}

SequenceData read_sequence_dir(const std::string& dir) {
    if (!fs::is_directory(dir)) throw ContractError("not a sequence directory: " + dir);
    SequenceData data;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string ext = entry.path().extension().string();
        if (ext == ".pgm" || ext == ".ppm") data.frame_paths.push_back(entry.path().string());
    }
    std::sort(data.frame_paths.begin(), data.frame_paths.end());
    if (data.frame_paths.empty()) throw ContractError("no PGM/PPM frames in " + dir);
    const fs::path gt = fs::path(dir) / "groundtruth.txt";
    if (fs::exists(gt)) data.gt = read_boxes(gt.string());
    return data;
}

} // namespace hift
