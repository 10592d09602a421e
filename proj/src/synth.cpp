#include "hift/synth.hpp"

#include <algorithm>
#include <cmath>

namespace hift {

namespace {

void render_frame(Image& img, const BBox& box, TargetShape shape, const double target_color[3],
                  const double bg_color[3], double noise_std, Rng& rng) {
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                const double v = bg_color[c] + (noise_std > 0.0 ? rng.normal(0.0, noise_std) : 0.0);
                img.at(c, y, x) = std::clamp(v, 0.0, 255.0);
            }
    const int x1 = std::max(0, static_cast<int>(std::floor(box.x1())));
    const int y1 = std::max(0, static_cast<int>(std::floor(box.y1())));
    const int x2 = std::min(img.width - 1, static_cast<int>(std::ceil(box.x2())));
    const int y2 = std::min(img.height - 1, static_cast<int>(std::ceil(box.y2())));
    const double rx = box.w / 2.0, ry = box.h / 2.0;
    for (int y = y1; y <= y2; ++y) {
        for (int x = x1; x <= x2; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            bool inside;
            if (shape == TargetShape::kRectangle) {
                inside = box.contains(px, py);
            } else {
                const double nx = (px - box.cx) / rx, ny = (py - box.cy) / ry;
                inside = nx * nx + ny * ny <= 1.0;
            }
            if (!inside) continue;
            for (int c = 0; c < img.channels; ++c) {
                img.at(c, y, x) = std::clamp(target_color[c], 0.0, 255.0);
            }
        }
    }
}

} // namespace

SynthSequence gen_sequence(const SynthConfig& cfg) {
    if (cfg.target_w >= cfg.canvas_w || cfg.target_h >= cfg.canvas_h) {
        throw ConfigError("synthetic target does not fit the canvas");
    }
    if (cfg.frames < 1) throw ConfigError("sequence needs at least one frame");

    Rng rng(cfg.seed);
    SynthSequence seq;
    const int channels = cfg.color ? 3 : 1;

    double target_color[3], bg_color[3];
    const double tweak = rng.uniform(-25.0, 25.0);
    for (int c = 0; c < 3; ++c) {
        target_color[c] = cfg.target_gray + tweak + (cfg.color ? rng.uniform(-30.0, 30.0) : 0.0);
        bg_color[c] = cfg.bg_gray + (cfg.color ? rng.uniform(-15.0, 15.0) : 0.0);
    }

    double cx = cfg.canvas_w / 2.0 + rng.uniform(-10.0, 10.0);
    double cy = cfg.canvas_h / 2.0 + rng.uniform(-8.0, 8.0);
    double w = cfg.target_w, h = cfg.target_h;
    double vx = cfg.velocity_x, vy = cfg.velocity_y;

    for (int f = 0; f < cfg.frames; ++f) {
        if (f > 0) {
            cx += vx + (cfg.jitter > 0.0 ? rng.normal(0.0, cfg.jitter) : 0.0);
            cy += vy + (cfg.jitter > 0.0 ? rng.normal(0.0, cfg.jitter) : 0.0);
            w *= 1.0 + cfg.scale_drift;
            h *= 1.0 + cfg.scale_drift;
            w = std::clamp(w, 8.0, cfg.canvas_w - 4.0);
            h = std::clamp(h, 8.0, cfg.canvas_h - 4.0);
            // bounce to keep the box inside the canvas
            if (cx - w / 2.0 < 0.0) { cx = w / 2.0; vx = std::abs(vx); }
            if (cx + w / 2.0 > cfg.canvas_w) { cx = cfg.canvas_w - w / 2.0; vx = -std::abs(vx); }
            if (cy - h / 2.0 < 0.0) { cy = h / 2.0; vy = std::abs(vy); }
            if (cy + h / 2.0 > cfg.canvas_h) { cy = cfg.canvas_h - h / 2.0; vy = -std::abs(vy); }
        } else {
            cx = std::clamp(cx, w / 2.0, cfg.canvas_w - w / 2.0);
            cy = std::clamp(cy, h / 2.0, cfg.canvas_h - h / 2.0);
        }
        const BBox box{cx, cy, w, h};
        Image img(cfg.canvas_w, cfg.canvas_h, channels);
        render_frame(img, box, cfg.shape, target_color, bg_color, cfg.noise_std, rng);
        if (cfg.occluder && f >= cfg.occluder_start && f < cfg.occluder_start + cfg.occluder_len) {
            const int bar_x = static_cast<int>(cx) - 3;
            for (int y = 0; y < img.height; ++y)
                for (int x = std::max(0, bar_x); x < std::min(img.width, bar_x + 7); ++x)
                    for (int c = 0; c < channels; ++c) img.at(c, y, x) = bg_color[c];
        }
        seq.frames.push_back(std::move(img));
        seq.gt.push_back(box);
    }
    return seq;
}

SynthConfig vary_sequence(const SynthConfig& base, int k, bool easy) {
    SynthConfig cfg = base;
    cfg.seed = base.seed + static_cast<std::uint64_t>(k);
    Rng rng(cfg.seed * 7919 + 13);
    cfg.target_w = rng.uniform(18.0, 32.0);
    cfg.target_h = rng.uniform(14.0, 26.0);
    cfg.velocity_x = rng.uniform(-2.5, 2.5);
    cfg.velocity_y = rng.uniform(-2.0, 2.0);
    cfg.shape = rng.uniform() < 0.5 ? TargetShape::kRectangle : TargetShape::kEllipse;
    if (easy) {
        cfg.jitter = 0.0;
        cfg.scale_drift = rng.uniform(-0.002, 0.002);
        cfg.occluder = false;
        cfg.shape = TargetShape::kRectangle;
    } else {
        cfg.jitter = base.jitter;
        cfg.scale_drift = rng.uniform(-0.004, 0.004);
        cfg.occluder = base.occluder && (k % 3 == 0);
    }
    return cfg;
}

} // namespace hift
