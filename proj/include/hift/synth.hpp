#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hift/image.hpp"

namespace hift {

enum class TargetShape { kRectangle, kEllipse };

struct SynthConfig {
    int canvas_w = 160;
    int canvas_h = 120;
    int frames = 30;
    bool color = false; // grayscale PGM vs RGB PPM

    TargetShape shape = TargetShape::kRectangle;
    double target_w = 26.0;
    double target_h = 20.0;
    double target_gray = 210.0; // per-sequence appearance jittered around this
    double bg_gray = 60.0;
    double noise_std = 4.0;

    double velocity_x = 2.0;
    double velocity_y = 1.0;
    double jitter = 0.0;      // stddev of per-frame center noise, pixels
    double scale_drift = 0.0; // per-frame relative size change

    bool occluder = false;
    int occluder_start = 10;
    int occluder_len = 6;

    std::uint64_t seed = 1;
};

struct SynthSequence {
    std::vector<Image> frames;
    std::vector<BBox> gt;
};

// Deterministic under cfg.seed; gt tracks the rendered target exactly and
// always stays inside the canvas (motion bounces off the walls).
SynthSequence gen_sequence(const SynthConfig& cfg);

// Benchmark flavors used by training and the ablation harness. Sequence k is
// derived from `base` with seed base.seed + k and randomized motion/size.
SynthConfig vary_sequence(const SynthConfig& base, int k, bool easy);

} // namespace hift
