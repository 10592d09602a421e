#include "hift/heads.hpp"

#include <cmath>
#include <iostream>

namespace hift {

LabelMode parse_label_mode(const std::string& s) {
    if (s == "circular") return LabelMode::kCircular;
    if (s == "rectangle") return LabelMode::kRectangle;
    throw ConfigError("unknown label.mode '" + s + "' (expected circular or rectangle)");
}

LabelMaps make_labels(const BBox& gt, const MapGeometry& geom, LabelMode mode, std::uint64_t seed,
                      const LabelConfig& cfg) {
    if (!gt.valid()) throw ContractError("make_labels requires a box with positive extent");
    const int n = geom.locations();
    LabelMaps out;
    out.seed = seed;
    out.cls1_positive.assign(static_cast<size_t>(n), 0);
    out.cls2.assign(static_cast<size_t>(n), Cls2Label::kNegativeCandidate);
    out.reg_targets.assign(static_cast<size_t>(n), {});
    out.neg_keep.assign(static_cast<size_t>(n), 0);

    const double r_pos = std::min(cfg.r_pos_strides * geom.stride, 0.5 * std::min(gt.w, gt.h));
    const double r_ign = cfg.r_ign_strides * geom.stride;

    std::vector<int> candidates;
    for (int r = 0; r < n; ++r) {
        const double px = geom.center_x(r);
        const double py = geom.center_y(r);
        const bool in_box = gt.contains(px, py);
        out.cls1_positive[static_cast<size_t>(r)] = in_box ? 1 : 0;
        if (in_box) ++out.num_cls1_positive;
        out.reg_targets[static_cast<size_t>(r)] = {px - gt.x1(), py - gt.y1(), gt.x2() - px,
                                                   gt.y2() - py};
        Cls2Label l2;
        if (mode == LabelMode::kCircular) {
            const double d = std::hypot(px - gt.cx, py - gt.cy);
            l2 = d <= r_pos ? Cls2Label::kPositive
                            : (d <= r_ign ? Cls2Label::kIgnore : Cls2Label::kNegativeCandidate);
        } else {
            l2 = in_box ? Cls2Label::kPositive : Cls2Label::kNegativeCandidate;
        }
        out.cls2[static_cast<size_t>(r)] = l2;
        if (l2 == Cls2Label::kPositive) ++out.num_cls2_positive;
        if (l2 == Cls2Label::kNegativeCandidate && !in_box) candidates.push_back(r);
    }
    if (out.num_cls1_positive == 0 || out.num_cls2_positive == 0) {
        throw DegenerateLabelError("no positive location for gt at (" + std::to_string(gt.cx) + "," +
                                   std::to_string(gt.cy) + ") size " + std::to_string(gt.w) + "x" +
                                   std::to_string(gt.h));
    }

    const int cap = std::max(cfg.neg_cap_floor,
                             static_cast<int>(std::llround(cfg.neg_cap_ratio * out.num_cls2_positive)));
    if (static_cast<int>(candidates.size()) <= cap) {
        for (int r : candidates) out.neg_keep[static_cast<size_t>(r)] = 1;
        out.num_retained = static_cast<int>(candidates.size());
    } else {
        Rng rng(seed);
        for (int i : rng.sample_without_replacement(static_cast<int>(candidates.size()), cap)) {
            out.neg_keep[static_cast<size_t>(candidates[static_cast<size_t>(i)])] = 1;
        }
        out.num_retained = cap;
    }
    return out;
}

Heads::Heads(int channels, Rng& rng)
    : cls1_hidden_("heads.cls1.hidden", channels, channels, rng),
      cls1_out_("heads.cls1.out", channels, 2, rng),
      cls2_hidden_("heads.cls2.hidden", channels, channels, rng),
      cls2_out_("heads.cls2.out", channels, 1, rng),
      reg_hidden_("heads.reg.hidden", channels, channels, rng),
      reg_out_("heads.reg.out", channels, 4, rng) {}

HeadOutputs Heads::forward(const Var& feature) const {
    if (feature.value().rank() != 2) throw ShapeError("heads expect a rank-2 feature");
    HeadOutputs out;
    out.cls1_logits = cls1_out_.forward(relu(cls1_hidden_.forward(feature)));
    out.cls2_logits = cls2_out_.forward(relu(cls2_hidden_.forward(feature)));
    out.reg = vexp(reg_out_.forward(relu(reg_hidden_.forward(feature))));
    return out;
}

void Heads::collect(ParamRefs& out) {
    cls1_hidden_.collect(out);
    cls1_out_.collect(out);
    cls2_hidden_.collect(out);
    cls2_out_.collect(out);
    reg_hidden_.collect(out);
    reg_out_.collect(out);
}

BBox decode_box(const Tensor& reg, int row, const MapGeometry& geom) {
    const double cx = geom.center_x(row);
    const double cy = geom.center_y(row);
    const double l = reg.at2(row, 0) * geom.stride;
    const double t = reg.at2(row, 1) * geom.stride;
    const double r = reg.at2(row, 2) * geom.stride;
    const double b = reg.at2(row, 3) * geom.stride;
    return {cx + (r - l) / 2.0, cy + (b - t) / 2.0, l + r, t + b};
}

LossParts compute_loss(const HeadOutputs& preds, const LabelMaps& labels, const BBox& gt,
                       const MapGeometry& geom, const LossWeights& w) {
    const int n = geom.locations();
    if (preds.cls1_logits.value().rows() != n || static_cast<int>(labels.cls1_positive.size()) != n) {
        throw ShapeError("loss inputs disagree with map geometry");
    }

    LossParts parts;
    Var total(Tensor({1}), false);

    // cross-entropy over cls1 positives + retained negatives
    std::vector<int> ce_rows;
    for (int r = 0; r < n; ++r) {
        if (labels.cls1_positive[static_cast<size_t>(r)] || labels.neg_keep[static_cast<size_t>(r)])
            ce_rows.push_back(r);
    }
    if (ce_rows.empty()) {
        std::cerr << "[hift] warning: cross-entropy term has no contributing locations\n";
    } else {
        Tensor onehot({static_cast<int>(ce_rows.size()), 2});
        for (size_t i = 0; i < ce_rows.size(); ++i) {
            const bool pos = labels.cls1_positive[static_cast<size_t>(ce_rows[i])] != 0;
            onehot.at2(static_cast<int>(i), pos ? 1 : 0) = 1.0;
        }
        Var picked = mul(gather_rows(log_softmax_rows(preds.cls1_logits), ce_rows), Var(onehot));
        Var ce = scale(sum_all(picked), -1.0 / static_cast<double>(ce_rows.size()));
        parts.ce = ce.value().item();
        total = add(total, scale(ce, w.lambda1));
    }

    // binary cross-entropy over cls2 positives + retained negatives, ignores excluded
    std::vector<int> bce_rows;
    for (int r = 0; r < n; ++r) {
        const bool pos = labels.cls2[static_cast<size_t>(r)] == Cls2Label::kPositive;
        if (pos || labels.neg_keep[static_cast<size_t>(r)]) bce_rows.push_back(r);
    }
    if (bce_rows.empty()) {
        std::cerr << "[hift] warning: binary cross-entropy term has no contributing locations\n";
    } else {
        Tensor targets({static_cast<int>(bce_rows.size()), 1});
        for (size_t i = 0; i < bce_rows.size(); ++i) {
            targets[static_cast<int>(i)] =
                labels.cls2[static_cast<size_t>(bce_rows[i])] == Cls2Label::kPositive ? 1.0 : 0.0;
        }
        Var bce = mean_all(bce_with_logits(gather_rows(preds.cls2_logits, bce_rows), targets));
        parts.bce = bce.value().item();
        total = add(total, scale(bce, w.lambda2));
    }

    // IoU term over cls2 positives
    std::vector<int> pos_rows;
    for (int r = 0; r < n; ++r) {
        if (labels.cls2[static_cast<size_t>(r)] == Cls2Label::kPositive) pos_rows.push_back(r);
    }
    if (pos_rows.empty()) {
        std::cerr << "[hift] warning: IoU term has no contributing locations\n";
    } else {
        const int k = static_cast<int>(pos_rows.size());
        Tensor cxs({k, 1}), cys({k, 1});
        for (int i = 0; i < k; ++i) {
            cxs[i] = geom.center_x(pos_rows[static_cast<size_t>(i)]);
            cys[i] = geom.center_y(pos_rows[static_cast<size_t>(i)]);
        }
        Var reg_sel = scale(gather_rows(preds.reg, pos_rows), geom.stride); // pixels
        Var l = slice_cols(reg_sel, 0, 1), t = slice_cols(reg_sel, 1, 2);
        Var r = slice_cols(reg_sel, 2, 3), b = slice_cols(reg_sel, 3, 4);
        Var zero(Tensor({k, 1}), false);
        Var px1 = sub(Var(cxs), l), px2 = add(Var(cxs), r);
        Var py1 = sub(Var(cys), t), py2 = add(Var(cys), b);
        Var gx1(Tensor({k, 1}, gt.x1()), false), gx2(Tensor({k, 1}, gt.x2()), false);
        Var gy1(Tensor({k, 1}, gt.y1()), false), gy2(Tensor({k, 1}, gt.y2()), false);
        Var iw = maximum(sub(minimum(px2, gx2), maximum(px1, gx1)), zero);
        Var ih = maximum(sub(minimum(py2, gy2), maximum(py1, gy1)), zero);
        Var inter = mul(iw, ih);
        Var area_p = mul(add(l, r), add(t, b));
        Var uni = sub(add_const(area_p, gt.w * gt.h), inter);
        Var iou_vals = divide(inter, uni);
        Var iou_loss = sub(Var(Tensor({1}, 1.0), false), mean_all(iou_vals));
        parts.iou = iou_loss.value().item();
        total = add(total, scale(iou_loss, w.lambda3));
    }

    parts.total = total;
    return parts;
}

} // namespace hift
