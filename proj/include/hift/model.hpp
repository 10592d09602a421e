#pragma once

#include <memory>
#include <optional>

#include "hift/backbone.hpp"
#include "hift/correlation.hpp"
#include "hift/heads.hpp"
#include "hift/transformer.hpp"

namespace hift {

struct ModelConfig {
    BackboneConfig backbone;
    int channels = 64; // C after the correlation projection
    bool transformer_enabled = true;
    TransformerVariant variant = TransformerVariant::kHft;
    bool decoder_pe = false;
    int heads = 4;
    int ffn_mult = 2;
    int decoder_layers = 2;
};

// Full pipeline. When the transformer is disabled (ablation baseline) the
// heads run directly on M5.
class Model {
public:
    Model(const ModelConfig& cfg, std::uint64_t seed);

    FeatureLevels extract(const Tensor& image) const { return backbone_->extract(image); }

    SimilarityMaps correlate(const FeatureLevels& templ, const FeatureLevels& search) const {
        return corr_->forward(templ, search);
    }

    // template image 3xTxT, search image 3xSxS -> head outputs on the map grid
    HeadOutputs forward(const Tensor& templ_img, const Tensor& search_img,
                        AttnTrace* trace = nullptr) const;
    HeadOutputs forward_from_features(const FeatureLevels& templ, const FeatureLevels& search,
                                      AttnTrace* trace = nullptr) const;

    MapGeometry map_geometry() const;
    const ModelConfig& config() const { return cfg_; }
    const HftTransformer* transformer() const { return transformer_.get(); }
    const Backbone& backbone() const { return *backbone_; }

    ParamRefs parameters();
    void zero_grad();

private:
    ModelConfig cfg_;
    std::unique_ptr<Backbone> backbone_;
    std::unique_ptr<Correlation> corr_;
    std::unique_ptr<HftTransformer> transformer_;
    std::unique_ptr<Heads> heads_;
    int map_size_ = 0;
    int total_stride_ = 1;
};

} // namespace hift
