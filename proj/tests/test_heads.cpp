#include <doctest.h>

#include <cmath>

#include "hift/heads.hpp"
#include "oracles.hpp"

using namespace hift;

namespace {

MapGeometry grid8() { return {8, 8, 8.0, 28.0}; }

BBox random_box(Rng& rng, const MapGeometry& geom) {
    const double span = geom.width * geom.stride;
    const double cx = geom.offset + rng.uniform(0.2, 0.8) * span;
    const double cy = geom.offset + rng.uniform(0.2, 0.8) * span;
    return {cx, cy, rng.uniform(12.0, 60.0), rng.uniform(12.0, 60.0)};
}

} // namespace

TEST_SUITE_BEGIN("heads_labels");

TEST_CASE("gt centered on a grid location is cls2-positive there") {
    MapGeometry geom = grid8();
    const int row = loc_row(3, 4, geom.width);
    BBox gt{geom.center_x(row), geom.center_y(row), 30.0, 24.0};
    LabelMaps maps = make_labels(gt, geom, LabelMode::kCircular, 1, LabelConfig{});
    CHECK(maps.cls2[static_cast<size_t>(row)] == Cls2Label::kPositive);
}

TEST_CASE("gt covering the whole map leaves no retained negatives") {
    MapGeometry geom = grid8();
    const double span = geom.width * geom.stride + 2 * geom.offset;
    BBox gt{span / 2, span / 2, span, span};
    LabelMaps maps = make_labels(gt, geom, LabelMode::kCircular, 1, LabelConfig{});
    CHECK(maps.num_cls1_positive == geom.locations());
    CHECK(maps.num_retained == 0);
}

TEST_CASE("labels equal the per-location brute-force oracle in both modes") {
    MapGeometry geom = grid8();
    LabelConfig cfg;
    Rng rng(33);
    for (int trial = 0; trial < 100; ++trial) {
        BBox gt = random_box(rng, geom);
        const LabelMode mode = trial % 2 == 0 ? LabelMode::kCircular : LabelMode::kRectangle;
        const std::uint64_t seed = 1000 + static_cast<std::uint64_t>(trial);
        LabelMaps got;
        oracle::LabelOracle ref = oracle::label_oracle(gt, geom, mode, seed, cfg);
        bool degenerate = false;
        try {
            got = make_labels(gt, geom, mode, seed, cfg);
        } catch (const DegenerateLabelError&) {
            degenerate = true;
        }
        bool oracle_has_pos1 = false, oracle_has_pos2 = false;
        for (bool b : ref.cls1) oracle_has_pos1 = oracle_has_pos1 || b;
        for (int v : ref.cls2) oracle_has_pos2 = oracle_has_pos2 || v == 0;
        if (degenerate) {
            CHECK((!oracle_has_pos1 || !oracle_has_pos2));
            continue;
        }
        for (int r = 0; r < geom.locations(); ++r) {
            const size_t rs = static_cast<size_t>(r);
            CHECK((got.cls1_positive[rs] != 0) == ref.cls1[rs]);
            CHECK(static_cast<int>(got.cls2[rs]) == ref.cls2[rs]);
            CHECK((got.neg_keep[rs] != 0) == ref.keep[rs]);
            for (int c = 0; c < 4; ++c)
                CHECK(got.reg_targets[rs][static_cast<size_t>(c)] ==
                      ref.reg[rs][static_cast<size_t>(c)]);
        }
    }
}

TEST_CASE("changing the seed only reshuffles retained negatives") {
    MapGeometry geom = grid8();
    Rng rng(44);
    BBox gt = random_box(rng, geom);
    LabelMaps a = make_labels(gt, geom, LabelMode::kCircular, 1, LabelConfig{});
    LabelMaps b = make_labels(gt, geom, LabelMode::kCircular, 2, LabelConfig{});
    CHECK(a.cls1_positive == b.cls1_positive);
    CHECK(a.cls2 == b.cls2);
    CHECK(a.reg_targets == b.reg_targets);
    CHECK(a.num_retained == b.num_retained);
    CHECK(a.neg_keep != b.neg_keep); // 16+ retained slots, collision is ~impossible
    // positives are never masked out
    for (int r = 0; r < geom.locations(); ++r) {
        if (a.cls1_positive[static_cast<size_t>(r)] || a.cls2[static_cast<size_t>(r)] == Cls2Label::kPositive) {
            CHECK(a.neg_keep[static_cast<size_t>(r)] == 0);
            CHECK(b.neg_keep[static_cast<size_t>(r)] == 0);
        }
    }
}

TEST_CASE("retained negatives respect the cap") {
    MapGeometry geom = grid8();
    LabelConfig cfg;
    Rng rng(55);
    for (int trial = 0; trial < 20; ++trial) {
        BBox gt = random_box(rng, geom);
        LabelMaps maps = make_labels(gt, geom, LabelMode::kCircular, 9, cfg);
        const int cap = std::max(cfg.neg_cap_floor,
                                 static_cast<int>(std::llround(cfg.neg_cap_ratio * maps.num_cls2_positive)));
        CHECK(maps.num_retained <= cap);
    }
}

TEST_CASE("circular positives stay inside the box and within the cls1 set") {
    MapGeometry geom = grid8();
    Rng rng(66);
    for (int trial = 0; trial < 50; ++trial) {
        BBox gt = random_box(rng, geom);
        LabelMaps maps;
        try {
            maps = make_labels(gt, geom, LabelMode::kCircular, 3, LabelConfig{});
        } catch (const DegenerateLabelError&) {
            continue;
        }
        for (int r = 0; r < geom.locations(); ++r) {
            if (maps.cls2[static_cast<size_t>(r)] != Cls2Label::kPositive) continue;
            CHECK(gt.contains(geom.center_x(r), geom.center_y(r)));
            CHECK(maps.cls1_positive[static_cast<size_t>(r)] != 0);
        }
    }
}

TEST_CASE("tiny off-grid box raises the degenerate-label error") {
    MapGeometry geom = grid8();
    // smaller than a stride cell, centered between grid points
    BBox gt{geom.offset + 1.7 * geom.stride, geom.offset + 1.7 * geom.stride, 2.0, 2.0};
    CHECK_THROWS_AS(make_labels(gt, geom, LabelMode::kCircular, 1, LabelConfig{}),
                    DegenerateLabelError);
}

TEST_CASE("iou: identical, disjoint and the corner-arithmetic case") {
    BBox a = BBox::from_corner(0, 0, 10, 10);
    CHECK(iou(a, a) == 1.0);
    BBox far = BBox::from_corner(100, 100, 5, 5);
    CHECK(iou(a, far) == 0.0);
    // corner boxes (0,0,10,10) vs (5,0,15,10): overlap 50, union 150
    BBox b{10.0, 5.0, 10.0, 10.0}; // corners (5,0)-(15,10)
    CHECK(iou(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("iou is symmetric and bounded") {
    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        BBox a{rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(1, 30), rng.uniform(1, 30)};
        BBox b{rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(1, 30), rng.uniform(1, 30)};
        const double v = iou(a, b);
        CHECK(v == iou(b, a));
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("heads: zero parameters give zero logits and exp(0)=1 regression") {
    Rng rng(88);
    Heads heads(8, rng);
    ParamRefs params;
    heads.collect(params);
    for (Parameter* p : params) p->value().fill(0.0);
    HeadOutputs out = heads.forward(Var(Tensor({64, 8})));
    CHECK(out.cls1_logits.shape() == Shape{64, 2});
    CHECK(out.cls2_logits.shape() == Shape{64, 1});
    CHECK(out.reg.shape() == Shape{64, 4});
    for (int i = 0; i < out.cls1_logits.value().size(); ++i) CHECK(out.cls1_logits.value()[i] == 0.0);
    for (int i = 0; i < out.cls2_logits.value().size(); ++i) CHECK(out.cls2_logits.value()[i] == 0.0);
    for (int i = 0; i < out.reg.value().size(); ++i) CHECK(out.reg.value()[i] == 1.0);
}

TEST_CASE("loss: zero weights give exactly zero") {
    MapGeometry geom = grid8();
    Rng rng(99);
    BBox gt = random_box(rng, geom);
    LabelMaps labels = make_labels(gt, geom, LabelMode::kCircular, 5, LabelConfig{});
    Heads heads(8, rng);
    HeadOutputs out = heads.forward(Var(Tensor::normal({64, 8}, rng, 0.0, 1.0)));
    LossParts parts = compute_loss(out, labels, gt, geom, LossWeights{0.0, 0.0, 0.0});
    CHECK(parts.total.value().item() == 0.0);
}

TEST_CASE("loss approaches zero for saturated correct predictions") {
    MapGeometry geom = grid8();
    BBox gt{geom.offset + 3.5 * geom.stride, geom.offset + 4.5 * geom.stride, 40.0, 36.0};
    LabelMaps labels = make_labels(gt, geom, LabelMode::kCircular, 5, LabelConfig{});
    const int n = geom.locations();
    Tensor cls1({n, 2}), cls2({n, 1}), reg({n, 4});
    for (int r = 0; r < n; ++r) {
        const bool pos1 = labels.cls1_positive[static_cast<size_t>(r)] != 0;
        cls1.at2(r, 0) = pos1 ? -30.0 : 30.0;
        cls1.at2(r, 1) = pos1 ? 30.0 : -30.0;
        cls2.at2(r, 0) = labels.cls2[static_cast<size_t>(r)] == Cls2Label::kPositive ? 30.0 : -30.0;
        // exact side distances, in stride units (decode multiplies by stride)
        for (int c = 0; c < 4; ++c)
            reg.at2(r, c) = labels.reg_targets[static_cast<size_t>(r)][static_cast<size_t>(c)] /
                            geom.stride;
    }
    HeadOutputs out{Var(cls1), Var(cls2), Var(reg)};
    LossParts parts = compute_loss(out, labels, gt, geom, LossWeights{});
    CHECK(parts.total.value().item() <= 1e-9);
}

TEST_CASE("loss matches a scalar transcription oracle") {
    MapGeometry geom = grid8();
    Rng rng(111);
    for (int trial = 0; trial < 10; ++trial) {
        BBox gt = random_box(rng, geom);
        LabelMaps labels;
        try {
            labels = make_labels(gt, geom, LabelMode::kCircular, 7 + trial, LabelConfig{});
        } catch (const DegenerateLabelError&) {
            continue;
        }
        const int n = geom.locations();
        Tensor cls1 = Tensor::normal({n, 2}, rng, 0.0, 1.5);
        Tensor cls2 = Tensor::normal({n, 1}, rng, 0.0, 1.5);
        Tensor reg_raw = Tensor::normal({n, 4}, rng, 0.3, 0.4);
        Tensor reg(reg_raw.shape());
        for (int i = 0; i < reg.size(); ++i) reg[i] = std::exp(reg_raw[i]);
        const LossWeights w{0.7, 1.3, 0.9};
        HeadOutputs out{Var(cls1), Var(cls2), Var(reg)};
        LossParts parts = compute_loss(out, labels, gt, geom, w);

        // scalar re-computation of the three terms
        double ce = 0.0;
        int ce_n = 0;
        for (int r = 0; r < n; ++r) {
            const bool pos = labels.cls1_positive[static_cast<size_t>(r)] != 0;
            if (!pos && !labels.neg_keep[static_cast<size_t>(r)]) continue;
            const double a = cls1.at2(r, 0), bq = cls1.at2(r, 1);
            const double m = std::max(a, bq);
            const double lse = m + std::log(std::exp(a - m) + std::exp(bq - m));
            ce += -( (pos ? bq : a) - lse );
            ++ce_n;
        }
        ce /= ce_n;
        double bce = 0.0;
        int bce_n = 0;
        for (int r = 0; r < n; ++r) {
            const bool pos = labels.cls2[static_cast<size_t>(r)] == Cls2Label::kPositive;
            if (!pos && !labels.neg_keep[static_cast<size_t>(r)]) continue;
            const double z = cls2.at2(r, 0);
            const double y = pos ? 1.0 : 0.0;
            bce += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
            ++bce_n;
        }
        bce /= bce_n;
        double iou_term = 0.0;
        int iou_n = 0;
        for (int r = 0; r < n; ++r) {
            if (labels.cls2[static_cast<size_t>(r)] != Cls2Label::kPositive) continue;
            const double cx = geom.center_x(r), cy = geom.center_y(r);
            const double l = reg.at2(r, 0) * geom.stride, t = reg.at2(r, 1) * geom.stride;
            const double rr = reg.at2(r, 2) * geom.stride, bb = reg.at2(r, 3) * geom.stride;
            const double px1 = cx - l, py1 = cy - t, px2 = cx + rr, py2 = cy + bb;
            const double iw = std::max(0.0, std::min(px2, gt.x2()) - std::max(px1, gt.x1()));
            const double ih = std::max(0.0, std::min(py2, gt.y2()) - std::max(py1, gt.y1()));
            const double inter = iw * ih;
            const double uni = (l + rr) * (t + bb) + gt.w * gt.h - inter;
            iou_term += 1.0 - inter / uni;
            ++iou_n;
        }
        iou_term /= iou_n;
        const double expect = w.lambda1 * ce + w.lambda2 * bce + w.lambda3 * iou_term;
        CHECK(std::abs(parts.total.value().item() - expect) <= 1e-9);
        CHECK(parts.total.value().item() >= 0.0);
    }
}

TEST_CASE("head and loss gradients match finite differences") {
    MapGeometry geom = grid8();
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        Rng rng(2000 + seed);
        BBox gt = random_box(rng, geom);
        LabelMaps labels;
        try {
            labels = make_labels(gt, geom, LabelMode::kCircular, seed, LabelConfig{});
        } catch (const DegenerateLabelError&) {
            continue;
        }
        Heads heads(6, rng);
        ParamRefs params;
        heads.collect(params);
        Tensor feature = Tensor::normal({geom.locations(), 6}, rng, 0.0, 1.0);
        auto loss_fn = [&]() {
            HeadOutputs out = heads.forward(Var(feature));
            return compute_loss(out, labels, gt, geom, LossWeights{}).total;
        };
        for (Parameter* p : params) p->zero_grad();
        backward(loss_fn());
        Rng pick(3000 + seed);
        for (Parameter* p : params) {
            for (int k = 0; k < 4; ++k) {
                const int idx = pick.index(p->value().size());
                const double analytic = p->grad()[idx];
                const double numeric =
                    oracle::fd([&]() { return loss_fn().value().item(); }, p->value()[idx], 1e-5);
                CHECK(std::abs(analytic - numeric) <=
                      1e-4 * std::max({1.0, std::abs(analytic), std::abs(numeric)}));
            }
        }
    }
}

TEST_SUITE_END();
