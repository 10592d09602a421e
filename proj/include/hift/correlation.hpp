#pragma once

#include "hift/backbone.hpp"
#include "hift/nn.hpp"

namespace hift {

// The three correlation maps in sequence form, all (W*H) x C.
struct SimilarityMaps {
    Var m3;
    Var m4;
    Var m5;
    int width = 0;
    int height = 0;
    int channels = 0;
};

// Depthwise cross-correlation of per-level template features over search
// features, followed by a 1x1 projection to a common channel width and the
// row-major flatten that fixes the location<->row convention:
//   row r <-> (y, x) = (r / W, r % W)
class Correlation {
public:
    Correlation(const std::array<int, 3>& level_channels, int out_channels, Rng& rng);

    // raw: C_f x H x W correlation output; returns (H*W) x out_channels
    Var project_and_flatten(const Var& raw, int level) const;

    SimilarityMaps forward(const FeatureLevels& templ, const FeatureLevels& search) const;

    int out_channels() const { return out_channels_; }
    void collect(ParamRefs& out);

private:
    int out_channels_;
    std::vector<Parameter> proj_weight_; // per level, C_f x C
    std::vector<Parameter> proj_bias_;   // per level, 1 x C
};

// Plain index helpers for the fixed row convention.
inline int loc_row(int y, int x, int width) { return y * width + x; }
inline int loc_y(int row, int width) { return row / width; }
inline int loc_x(int row, int width) { return row % width; }

} // namespace hift
