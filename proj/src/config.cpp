#include "hift/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace hift {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

struct Entry {
    std::string section;
    std::string key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

int parse_int(const std::string& v) {
    size_t pos = 0;
    int out;
    try {
        out = std::stoi(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError("expected integer, got '" + v + "'");
    }
    if (pos != v.size()) throw ConfigError("expected integer, got '" + v + "'");
    return out;
}

double parse_double(const std::string& v) {
    size_t pos = 0;
    double out;
    try {
        out = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError("expected number, got '" + v + "'");
    }
    if (pos != v.size()) throw ConfigError("expected number, got '" + v + "'");
    return out;
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("expected boolean, got '" + v + "'");
}

std::uint64_t parse_u64(const std::string& v) {
    try {
        return std::stoull(v);
    } catch (const std::exception&) {
        throw ConfigError("expected unsigned integer, got '" + v + "'");
    }
}

std::vector<int> parse_int_list(const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_int(trim(item)));
    if (out.empty()) throw ConfigError("expected comma-separated integers, got '" + v + "'");
    return out;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_int_list(const std::vector<int>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

#define INT_ENTRY(sec, key, field)                                                       \
    Entry{sec, key, [](RunConfig& c, const std::string& v) { c.field = parse_int(v); },  \
          [](const RunConfig& c) { return std::to_string(c.field); }}
#define DBL_ENTRY(sec, key, field)                                                         \
    Entry{sec, key, [](RunConfig& c, const std::string& v) { c.field = parse_double(v); }, \
          [](const RunConfig& c) { return fmt_double(c.field); }}
#define BOOL_ENTRY(sec, key, field)                                                       \
    Entry{sec, key, [](RunConfig& c, const std::string& v) { c.field = parse_bool(v); },  \
          [](const RunConfig& c) { return c.field ? std::string("true") : std::string("false"); }}
#define STR_ENTRY(sec, key, field)                                           \
    Entry{sec, key, [](RunConfig& c, const std::string& v) { c.field = v; }, \
          [](const RunConfig& c) { return c.field; }}
#define U64_ENTRY(sec, key, field)                                                       \
    Entry{sec, key, [](RunConfig& c, const std::string& v) { c.field = parse_u64(v); },  \
          [](const RunConfig& c) { return std::to_string(c.field); }}
#define ILIST_ENTRY(sec, key, field)                                                         \
    Entry{sec, key, [](RunConfig& c, const std::string& v) { c.field = parse_int_list(v); }, \
          [](const RunConfig& c) { return fmt_int_list(c.field); }}

const std::vector<Entry>& schema() {
    static const std::vector<Entry> entries = {
        INT_ENTRY("backbone", "template_size", template_size),
        INT_ENTRY("backbone", "search_size", search_size),
        ILIST_ENTRY("backbone", "stem_channels", stem_channels),
        ILIST_ENTRY("backbone", "level_channels", level_channels),
        ILIST_ENTRY("backbone", "kernels", kernels),
        ILIST_ENTRY("backbone", "strides", strides),
        ILIST_ENTRY("backbone", "paddings", paddings),
        INT_ENTRY("correlation", "channels", channels),
        BOOL_ENTRY("transformer", "enabled", transformer_enabled),
        STR_ENTRY("transformer", "variant", variant),
        BOOL_ENTRY("transformer", "decoder_pe", decoder_pe),
        INT_ENTRY("transformer", "heads", heads),
        INT_ENTRY("transformer", "ffn_mult", ffn_mult),
        INT_ENTRY("transformer", "decoder_layers", decoder_layers),
        STR_ENTRY("label", "mode", label_mode),
        DBL_ENTRY("label", "r_pos_strides", r_pos_strides),
        DBL_ENTRY("label", "r_ign_strides", r_ign_strides),
        DBL_ENTRY("label", "neg_cap_ratio", neg_cap_ratio),
        INT_ENTRY("label", "neg_cap_floor", neg_cap_floor),
        DBL_ENTRY("loss", "lambda1", lambda1),
        DBL_ENTRY("loss", "lambda2", lambda2),
        DBL_ENTRY("loss", "lambda3", lambda3),
        DBL_ENTRY("tracker", "window_influence", window_influence),
        DBL_ENTRY("tracker", "size_lr", size_lr),
        DBL_ENTRY("tracker", "context", context),
        INT_ENTRY("synth", "canvas_w", canvas_w),
        INT_ENTRY("synth", "canvas_h", canvas_h),
        INT_ENTRY("synth", "frames", frames),
        BOOL_ENTRY("synth", "color", color),
        DBL_ENTRY("synth", "bg_gray", bg_gray),
        DBL_ENTRY("synth", "target_gray", target_gray),
        DBL_ENTRY("synth", "noise_std", noise_std),
        DBL_ENTRY("synth", "motion_jitter", motion_jitter),
        BOOL_ENTRY("synth", "occluders", occluders),
        U64_ENTRY("synth", "seed", synth_seed),
        INT_ENTRY("train", "steps", steps),
        INT_ENTRY("train", "batch", batch),
        DBL_ENTRY("train", "lr_start", lr_start),
        DBL_ENTRY("train", "lr_end", lr_end),
        DBL_ENTRY("train", "momentum", momentum),
        DBL_ENTRY("train", "weight_decay", weight_decay),
        U64_ENTRY("train", "seed", seed),
        INT_ENTRY("train", "num_sequences", num_sequences),
        INT_ENTRY("train", "max_frame_gap", max_frame_gap),
        DBL_ENTRY("train", "center_jitter", center_jitter),
        BOOL_ENTRY("train", "freeze_stem", freeze_stem),
        INT_ENTRY("ablate", "steps", ablate_steps),
        INT_ENTRY("ablate", "train_sequences", ablate_train_sequences),
        INT_ENTRY("ablate", "eval_sequences", ablate_eval_sequences),
    };
    return entries;
}

void validate(const RunConfig& c) {
    auto want_len = [](const std::vector<int>& v, size_t n, const std::string& what) {
        if (v.size() != n) {
            throw ConfigError(what + " needs exactly " + std::to_string(n) + " entries");
        }
    };
    want_len(c.stem_channels, 2, "backbone.stem_channels");
    want_len(c.level_channels, 3, "backbone.level_channels");
    want_len(c.kernels, 5, "backbone.kernels");
    want_len(c.strides, 5, "backbone.strides");
    want_len(c.paddings, 5, "backbone.paddings");
    parse_variant(c.variant);
    parse_label_mode(c.label_mode);
    if (c.channels % c.heads != 0) throw ConfigError("transformer.heads must divide correlation.channels");
    if (c.lambda1 < 0 || c.lambda2 < 0 || c.lambda3 < 0) throw ConfigError("loss weights must be >= 0");
    if (c.steps < 1 || c.batch < 1) throw ConfigError("train.steps and train.batch must be positive");
    if (c.decoder_layers < 1) throw ConfigError("transformer.decoder_layers must be >= 1");
}

} // namespace

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config: " + path);
    RunConfig cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const size_t hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(path + ":" + std::to_string(lineno) + ": bad section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        bool found = false;
        for (const Entry& e : schema()) {
            if (e.section == section && e.key == key) {
                try {
                    e.set(cfg, value);
                } catch (const ConfigError& err) {
                    throw ConfigError(path + ":" + std::to_string(lineno) + ": " + err.what());
                }
                found = true;
                break;
            }
        }
        if (!found) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown key '" + section + "." +
                              key + "'");
        }
    }
    validate(cfg);
    return cfg;
}

void RunConfig::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write config: " + path);
    os << "# effective configuration (defaults merged)\n";
    std::string section;
    for (const Entry& e : schema()) {
        if (e.section != section) {
            section = e.section;
            os << "\n[" << section << "]\n";
        }
        os << e.key << " = " << e.get(*this) << "\n";
    }
}

ModelConfig RunConfig::model_config() const {
    validate(*this);
    ModelConfig m;
    m.backbone.template_size = template_size;
    m.backbone.search_size = search_size;
    m.backbone.stem_channels = {stem_channels[0], stem_channels[1]};
    m.backbone.level_channels = {level_channels[0], level_channels[1], level_channels[2]};
    for (int i = 0; i < 5; ++i) {
        m.backbone.kernels[static_cast<size_t>(i)] = kernels[static_cast<size_t>(i)];
        m.backbone.strides[static_cast<size_t>(i)] = strides[static_cast<size_t>(i)];
        m.backbone.paddings[static_cast<size_t>(i)] = paddings[static_cast<size_t>(i)];
    }
    m.channels = channels;
    m.transformer_enabled = transformer_enabled;
    m.variant = parse_variant(variant);
    m.decoder_pe = decoder_pe;
    m.heads = heads;
    m.ffn_mult = ffn_mult;
    m.decoder_layers = decoder_layers;
    return m;
}

LabelConfig RunConfig::label_config() const {
    LabelConfig l;
    l.mode = parse_label_mode(label_mode);
    l.r_pos_strides = r_pos_strides;
    l.r_ign_strides = r_ign_strides;
    l.neg_cap_ratio = neg_cap_ratio;
    l.neg_cap_floor = neg_cap_floor;
    return l;
}

LossWeights RunConfig::loss_weights() const { return {lambda1, lambda2, lambda3}; }

TrackerConfig RunConfig::tracker_config() const { return {window_influence, size_lr, context}; }

SynthConfig RunConfig::synth_config() const {
    SynthConfig s;
    s.canvas_w = canvas_w;
    s.canvas_h = canvas_h;
    s.frames = frames;
    s.color = color;
    s.bg_gray = bg_gray;
    s.target_gray = target_gray;
    s.noise_std = noise_std;
    s.jitter = motion_jitter;
    s.occluder = occluders;
    s.seed = synth_seed;
    return s;
}

} // namespace hift
