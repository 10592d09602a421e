#pragma once

#include "hift/image.hpp"
#include "hift/model.hpp"

namespace hift {

struct TrackerConfig {
    double window_influence = 0.35; // cosine window weight in score fusion
    double size_lr = 0.3;           // exponential size smoothing
    double context = 0.5;           // template context ratio
};

struct TrackState {
    FeatureLevels template_features; // cached at init, never updated
    BBox current;                    // frame coordinates
    Tensor window;                   // H x W cosine window in [0,1]
};

class Tracker {
public:
    Tracker(const Model& model, const TrackerConfig& cfg) : model_(model), cfg_(cfg) {}

    TrackState init(const Image& frame, const BBox& gt) const;

    // Advances one frame; returns (and stores) the new box estimate. When
    // score_dump is given the fused W*H score map is copied into it.
    BBox update(TrackState& state, const Image& frame, Tensor* score_dump = nullptr) const;

    const TrackerConfig& config() const { return cfg_; }

private:
    const Model& model_;
    TrackerConfig cfg_;
};

// Outer product of 1-D Hann windows, peak 1 at the center cell.
Tensor cosine_window(int height, int width);

} // namespace hift
