#include "hift/correlation.hpp"

#include <cmath>

namespace hift {

namespace {

// N=1 NCHW feature -> CHW shape
Shape drop_batch(const Var& x) {
    const Shape& s = x.shape();
    if (s.size() != 4 || s[0] != 1) throw ShapeError("expected N=1 NCHW feature");
    return {s[1], s[2], s[3]};
}

} // namespace

Correlation::Correlation(const std::array<int, 3>& level_channels, int out_channels, Rng& rng)
    : out_channels_(out_channels) {
    for (int i = 0; i < 3; ++i) {
        const int cf = level_channels[static_cast<size_t>(i)];
        const double limit = std::sqrt(6.0 / (cf + out_channels));
        const std::string name = "corr.proj" + std::to_string(i + 3);
        proj_weight_.emplace_back(name + ".weight",
                                  Tensor::uniform({cf, out_channels}, rng, -limit, limit));
        proj_bias_.emplace_back(name + ".bias", Tensor({1, out_channels}));
    }
}

Var Correlation::project_and_flatten(const Var& raw, int level) const {
    const Tensor& rv = raw.value();
    if (rv.rank() != 3) throw ShapeError("project_and_flatten expects rank-3 C x H x W");
    if (level < 3 || level > 5) throw ContractError("level must be 3, 4 or 5");
    const int cf = rv.extent(0), h = rv.extent(1), w = rv.extent(2);
    const size_t li = static_cast<size_t>(level - 3);
    if (proj_weight_[li].value().extent(0) != cf) {
        throw ShapeError("level " + std::to_string(level) + " projection expects " +
                         std::to_string(proj_weight_[li].value().extent(0)) + " channels, got " +
                         std::to_string(cf));
    }
    // C x H x W -> C x (H*W) -> (H*W) x C keeps row r at spatial (r/W, r%W)
    Var seq = transpose2d(reshape(raw, {cf, h * w}));
    return add(matmul(seq, proj_weight_[li].var), proj_bias_[li].var);
}

SimilarityMaps Correlation::forward(const FeatureLevels& templ, const FeatureLevels& search) const {
    SimilarityMaps out;
    const Var raws[3] = {
        xcorr_depthwise(reshape(templ.level3, drop_batch(templ.level3)),
                        reshape(search.level3, drop_batch(search.level3))),
        xcorr_depthwise(reshape(templ.level4, drop_batch(templ.level4)),
                        reshape(search.level4, drop_batch(search.level4))),
        xcorr_depthwise(reshape(templ.level5, drop_batch(templ.level5)),
                        reshape(search.level5, drop_batch(search.level5))),
    };
    const Shape s3 = raws[0].shape();
    out.height = s3[1];
    out.width = s3[2];
    out.channels = out_channels_;
    for (int i = 0; i < 3; ++i) {
        const Shape& s = raws[i].shape();
        if (s[1] != out.height || s[2] != out.width) {
            throw ShapeError("correlation levels disagree on spatial size; check backbone strides");
        }
    }
    out.m3 = project_and_flatten(raws[0], 3);
    out.m4 = project_and_flatten(raws[1], 4);
    out.m5 = project_and_flatten(raws[2], 5);
    return out;
}

void Correlation::collect(ParamRefs& out) {
    for (int i = 0; i < 3; ++i) {
        out.push_back(&proj_weight_[static_cast<size_t>(i)]);
        out.push_back(&proj_bias_[static_cast<size_t>(i)]);
    }
}

} // namespace hift
