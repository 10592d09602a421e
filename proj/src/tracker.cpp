#include "hift/tracker.hpp"

#include <algorithm>
#include <cmath>

namespace hift {

Tensor cosine_window(int height, int width) {
    auto hann = [](int i, int n) {
        if (n == 1) return 1.0;
        return 0.5 * (1.0 - std::cos(2.0 * 3.141592653589793238462643383279 * i / (n - 1)));
    };
    Tensor w({height, width});
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) w.at2(y, x) = hann(y, height) * hann(x, width);
    return w;
}

TrackState Tracker::init(const Image& frame, const BBox& gt) const {
    if (!gt.valid()) throw ContractError("init requires a box with positive extent");
    if (gt.x1() < 0.0 || gt.y1() < 0.0 || gt.x2() > frame.width || gt.y2() > frame.height) {
        throw ContractError("initial box lies outside the frame");
    }
    const BackboneConfig& bc = model_.config().backbone;
    const double s_z = template_crop_size(gt, cfg_.context);
    TrackState state;
    state.template_features =
        model_.extract(crop_and_resize(frame, gt.cx, gt.cy, s_z, bc.template_size));
    state.current = gt;
    const MapGeometry geom = model_.map_geometry();
    state.window = cosine_window(geom.height, geom.width);
    return state;
}

BBox Tracker::update(TrackState& state, const Image& frame, Tensor* score_dump) const {
    const BackboneConfig& bc = model_.config().backbone;
    const MapGeometry geom = model_.map_geometry();
    const double s_z = template_crop_size(state.current, cfg_.context);
    const double s_x = s_z * bc.search_size / bc.template_size;

    FeatureLevels search_feat =
        model_.extract(crop_and_resize(frame, state.current.cx, state.current.cy, s_x, bc.search_size));
    HeadOutputs out = model_.forward_from_features(state.template_features, search_feat);

    const Tensor& cls1 = out.cls1_logits.value();
    const Tensor& cls2 = out.cls2_logits.value();
    const int n = geom.locations();
    Tensor fused({geom.height, geom.width});
    int best = 0;
    double best_score = -1.0;
    for (int r = 0; r < n; ++r) {
        // softmax over the two cls1 logits, positive column
        const double a = cls1.at2(r, 0), b = cls1.at2(r, 1);
        const double m = std::max(a, b);
        const double p1 = std::exp(b - m) / (std::exp(a - m) + std::exp(b - m));
        const double z = cls2.at2(r, 0);
        const double p2 = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        const double win = state.window.at2(r / geom.width, r % geom.width);
        const double s = (1.0 - cfg_.window_influence) * (p1 * p2) + cfg_.window_influence * win;
        fused[r] = s;
        if (s > best_score) {
            best_score = s;
            best = r;
        }
    }
    if (score_dump) *score_dump = fused;

    // decode at the chosen location, then map crop -> frame coordinates
    const BBox crop_box = decode_box(out.reg.value(), best, geom);
    const double scl = s_x / bc.search_size;
    const double cx = state.current.cx + (crop_box.cx - bc.search_size / 2.0) * scl;
    const double cy = state.current.cy + (crop_box.cy - bc.search_size / 2.0) * scl;
    const double meas_w = crop_box.w * scl;
    const double meas_h = crop_box.h * scl;

    BBox next;
    next.w = (1.0 - cfg_.size_lr) * state.current.w + cfg_.size_lr * meas_w;
    next.h = (1.0 - cfg_.size_lr) * state.current.h + cfg_.size_lr * meas_h;
    next.w = std::clamp(next.w, 2.0, static_cast<double>(frame.width));
    next.h = std::clamp(next.h, 2.0, static_cast<double>(frame.height));
    next.cx = std::clamp(cx, next.w / 2.0, frame.width - next.w / 2.0);
    next.cy = std::clamp(cy, next.h / 2.0, frame.height - next.h / 2.0);

    state.current = next;
    return next;
}

} // namespace hift
