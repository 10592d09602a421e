#include "hift/model.hpp"

namespace hift {

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    Rng rng(seed);
    backbone_ = std::make_unique<Backbone>(cfg.backbone, rng);

    // correlation map side: per-level (search_k - template_k + 1), equal across
    // levels as long as the post-stem layers are stride 1
    int map = -1;
    for (int level = 3; level <= 5; ++level) {
        const int t = backbone_out_size(cfg.backbone, cfg.backbone.template_size, level);
        const int s = backbone_out_size(cfg.backbone, cfg.backbone.search_size, level);
        if (t >= s) throw ShapeError("template feature not smaller than search feature");
        const int m = s - t + 1;
        if (map == -1) map = m;
        if (m != map) {
            throw ShapeError("correlation maps disagree on spatial size across levels; "
                             "levels 3..5 must share the same stride schedule");
        }
    }
    map_size_ = map;
    total_stride_ = 1;
    for (int s : cfg.backbone.strides) total_stride_ *= s;

    corr_ = std::make_unique<Correlation>(cfg.backbone.level_channels, cfg.channels, rng);
    if (cfg.transformer_enabled) {
        TransformerConfig tcfg;
        tcfg.channels = cfg.channels;
        tcfg.heads = cfg.heads;
        tcfg.ffn_mult = cfg.ffn_mult;
        tcfg.decoder_layers = cfg.decoder_layers;
        tcfg.seq_len = map_size_ * map_size_;
        tcfg.variant = cfg.variant;
        tcfg.decoder_pe = cfg.decoder_pe;
        transformer_ = std::make_unique<HftTransformer>(tcfg, rng);
    }
    heads_ = std::make_unique<Heads>(cfg.channels, rng);
}

HeadOutputs Model::forward(const Tensor& templ_img, const Tensor& search_img, AttnTrace* trace) const {
    return forward_from_features(backbone_->extract(templ_img), backbone_->extract(search_img), trace);
}

HeadOutputs Model::forward_from_features(const FeatureLevels& templ, const FeatureLevels& search,
                                         AttnTrace* trace) const {
    SimilarityMaps maps = corr_->forward(templ, search);
    Var feature = transformer_ ? transformer_->forward(maps.m3, maps.m4, maps.m5, trace) : maps.m5;
    return heads_->forward(feature);
}

MapGeometry Model::map_geometry() const {
    MapGeometry g;
    g.width = map_size_;
    g.height = map_size_;
    g.stride = static_cast<double>(total_stride_);
    g.offset = (cfg_.backbone.search_size - g.stride * map_size_) / 2.0;
    return g;
}

ParamRefs Model::parameters() {
    ParamRefs out;
    backbone_->collect(out);
    corr_->collect(out);
    if (transformer_) transformer_->collect(out);
    heads_->collect(out);
    return out;
}

void Model::zero_grad() {
    for (Parameter* p : parameters()) p->zero_grad();
}

} // namespace hift
