#pragma once

#include <array>
#include <cstdint>

#include "hift/geometry.hpp"
#include "hift/nn.hpp"

namespace hift {

// Row r of a (W*H)-location map sits at search-crop pixel
//   x = (r % W + 0.5) * stride + offset,  y = (r / W + 0.5) * stride + offset
struct MapGeometry {
    int width = 0;
    int height = 0;
    double stride = 0.0;
    double offset = 0.0;

    int locations() const { return width * height; }
    double center_x(int row) const { return (row % width + 0.5) * stride + offset; }
    double center_y(int row) const { return (row / width + 0.5) * stride + offset; }
};

enum class LabelMode { kCircular, kRectangle };
LabelMode parse_label_mode(const std::string& s);

enum class Cls2Label : std::uint8_t { kPositive, kIgnore, kNegativeCandidate };

struct LabelConfig {
    LabelMode mode = LabelMode::kCircular;
    double r_pos_strides = 2.0;
    double r_ign_strides = 4.0;
    double neg_cap_ratio = 3.0;
    int neg_cap_floor = 16;
};

struct LabelMaps {
    std::vector<std::uint8_t> cls1_positive;            // in-box membership
    std::vector<Cls2Label> cls2;                        // per-mode second branch
    std::vector<std::array<double, 4>> reg_targets;     // signed (l,t,r,b), pixels
    std::vector<std::uint8_t> neg_keep;                 // retained-negative mask
    std::uint64_t seed = 0;
    int num_cls1_positive = 0;
    int num_cls2_positive = 0;
    int num_retained = 0;
};

// Circular mode: cls2 positive iff the location center lies within
// min(r_pos_strides * stride, short gt side / 2) of the gt center, which keeps
// every cls2 positive inside the box; ignore ring up to r_ign_strides * stride.
// Rectangle mode: cls2 duplicates in-box membership.
// Negatives beyond the cap max(floor, ratio * cls2 positives) are dropped by a
// seeded Fisher-Yates draw over the candidates in row order; candidates are
// locations negative for both branches.
// Throws DegenerateLabelError when either branch ends up without a positive.
LabelMaps make_labels(const BBox& gt, const MapGeometry& geom, LabelMode mode, std::uint64_t seed,
                      const LabelConfig& cfg);

struct HeadOutputs {
    Var cls1_logits; // (W*H) x 2, column 1 = positive
    Var cls2_logits; // (W*H) x 1
    Var reg;         // (W*H) x 4, exp-activated side distances in stride units
};

class Heads {
public:
    Heads(int channels, Rng& rng);
    HeadOutputs forward(const Var& feature) const;
    void collect(ParamRefs& out);

private:
    Linear cls1_hidden_, cls1_out_;
    Linear cls2_hidden_, cls2_out_;
    Linear reg_hidden_, reg_out_;
};

struct LossWeights {
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    double lambda3 = 1.0;
};

struct LossParts {
    Var total;
    double ce = 0.0;
    double bce = 0.0;
    double iou = 0.0;
};

// λ1·CE(cls1) + λ2·BCE(cls2) + λ3·mean(1 − IoU) over cls2 positives.
// CE runs over cls1 positives + retained negatives, BCE over cls2 positives +
// retained negatives. A term without contributing locations adds 0 (warns).
LossParts compute_loss(const HeadOutputs& preds, const LabelMaps& labels, const BBox& gt,
                       const MapGeometry& geom, const LossWeights& w);

// Side distances from reg row `row` decoded to a search-crop pixel box.
BBox decode_box(const Tensor& reg, int row, const MapGeometry& geom);

} // namespace hift
