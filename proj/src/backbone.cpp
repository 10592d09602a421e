#include "hift/backbone.hpp"

namespace hift {

int backbone_out_size(const BackboneConfig& cfg, int in, int upto) {
    int s = in;
    for (int i = 0; i < upto; ++i) {
        s = conv_out_size(s, cfg.kernels[static_cast<size_t>(i)], cfg.strides[static_cast<size_t>(i)],
                          cfg.paddings[static_cast<size_t>(i)]);
        if (s <= 0) throw ShapeError("backbone layer " + std::to_string(i + 1) + " collapses input");
    }
    return s;
}

Backbone::Backbone(const BackboneConfig& cfg, Rng& rng) : cfg_(cfg) {
    int in = 3;
    for (int i = 0; i < 5; ++i) {
        const size_t is = static_cast<size_t>(i);
        layers_.emplace_back("backbone.conv" + std::to_string(i + 1), in, cfg.channels(i),
                             cfg.kernels[is], cfg.strides[is], cfg.paddings[is], rng);
        in = cfg.channels(i);
    }
    // checks that both branches survive all five layers
    backbone_out_size(cfg_, cfg_.template_size, 5);
    backbone_out_size(cfg_, cfg_.search_size, 5);
}

FeatureLevels Backbone::extract(const Tensor& image) const { return extract(Var(image)); }

FeatureLevels Backbone::extract(const Var& image) const {
    const Tensor& img = image.value();
    if (img.rank() != 3 || img.extent(0) != 3 || img.extent(1) != img.extent(2) ||
        (img.extent(1) != cfg_.template_size && img.extent(1) != cfg_.search_size)) {
        throw ShapeError("backbone expects a 3 x S x S image with S = " +
                         std::to_string(cfg_.template_size) + " or " +
                         std::to_string(cfg_.search_size) + ", got " + shape_str(img.shape()));
    }
    const int s = img.extent(1);
    Var x = reshape(image, {1, 3, s, s});
    FeatureLevels out;
    for (int i = 0; i < 5; ++i) {
        x = relu(layers_[static_cast<size_t>(i)].forward(x));
        if (i == 2) out.level3 = x;
        if (i == 3) out.level4 = x;
        if (i == 4) out.level5 = x;
    }
    return out;
}

void Backbone::collect(ParamRefs& out) {
    for (auto& l : layers_) l.collect(out);
}

void Backbone::set_stem_trainable(bool trainable) {
    for (int i = 0; i < 2; ++i) {
        layers_[static_cast<size_t>(i)].weight.trainable = trainable;
        layers_[static_cast<size_t>(i)].bias.trainable = trainable;
    }
}

} // namespace hift
