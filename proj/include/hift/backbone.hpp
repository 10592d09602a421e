#pragma once

#include <array>

#include "hift/nn.hpp"

namespace hift {

// Five-conv stack; taps after convs 3, 4 and 5 feed the correlation levels.
// The same parameters serve the template and search branches.
struct BackboneConfig {
    int template_size = 64;
    int search_size = 128;
    std::array<int, 2> stem_channels = {16, 32};
    std::array<int, 3> level_channels = {32, 48, 64};
    std::array<int, 5> kernels = {3, 3, 3, 3, 3};
    std::array<int, 5> strides = {2, 2, 2, 1, 1};
    std::array<int, 5> paddings = {1, 1, 0, 0, 0};

    int channels(int layer) const {
        return layer < 2 ? stem_channels[static_cast<size_t>(layer)]
                         : level_channels[static_cast<size_t>(layer - 2)];
    }
};

struct FeatureLevels {
    Var level3;
    Var level4;
    Var level5;
};

inline int conv_out_size(int in, int kernel, int stride, int padding) {
    return (in + 2 * padding - kernel) / stride + 1;
}

// Spatial size after layer `upto` (1-based) for an input of side `in`.
int backbone_out_size(const BackboneConfig& cfg, int in, int upto);

class Backbone {
public:
    Backbone(const BackboneConfig& cfg, Rng& rng);

    // image: 3 x S x S with S = template_size or search_size
    FeatureLevels extract(const Tensor& image) const;
    FeatureLevels extract(const Var& image) const;

    const BackboneConfig& config() const { return cfg_; }
    void collect(ParamRefs& out);
    void set_stem_trainable(bool trainable);

private:
    BackboneConfig cfg_;
    std::vector<Conv2dLayer> layers_;
};

} // namespace hift
