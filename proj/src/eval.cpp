#include "hift/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "hift/errors.hpp"

namespace hift {

namespace {

void check_pair(const std::vector<BBox>& preds, const std::vector<BBox>& gts) {
    if (preds.empty()) throw ContractError("metric curves need at least one frame");
    if (preds.size() != gts.size()) {
        throw ContractError("prediction/groundtruth length mismatch: " + std::to_string(preds.size()) +
                            " vs " + std::to_string(gts.size()));
    }
}

} // namespace

MetricCurve precision_plot(const std::vector<BBox>& preds, const std::vector<BBox>& gts) {
    check_pair(preds, gts);
    std::vector<double> errors(preds.size());
    for (size_t i = 0; i < preds.size(); ++i) errors[i] = cle(preds[i], gts[i]);
    MetricCurve curve;
    for (int t = 0; t <= 50; ++t) {
        int hits = 0;
        for (double e : errors)
            if (e <= static_cast<double>(t)) ++hits;
        curve.thresholds.push_back(static_cast<double>(t));
        curve.scores.push_back(static_cast<double>(hits) / static_cast<double>(errors.size()));
    }
    return curve;
}

MetricCurve success_plot(const std::vector<BBox>& preds, const std::vector<BBox>& gts) {
    check_pair(preds, gts);
    std::vector<double> overlaps(preds.size());
    for (size_t i = 0; i < preds.size(); ++i) overlaps[i] = iou(preds[i], gts[i]);
    MetricCurve curve;
    for (int k = 0; k <= 20; ++k) {
        const double t = 0.05 * k;
        int hits = 0;
        for (double o : overlaps)
            if (o > t) ++hits; // strictly beyond
        curve.thresholds.push_back(t);
        curve.scores.push_back(static_cast<double>(hits) / static_cast<double>(overlaps.size()));
    }
    return curve;
}

double auc(const MetricCurve& curve) {
    if (curve.scores.empty() || curve.scores.size() != curve.thresholds.size()) {
        throw ContractError("auc of malformed curve");
    }
    double s = 0.0;
    for (double v : curve.scores) s += v;
    return s / static_cast<double>(curve.scores.size());
}

double precision_at_20(const MetricCurve& curve) {
    for (size_t i = 0; i < curve.thresholds.size(); ++i) {
        if (std::abs(curve.thresholds[i] - 20.0) < 1e-9) return curve.scores[i];
    }
    throw ContractError("threshold 20 missing from precision grid");
}

void write_curve_csv(const std::string& path, const MetricCurve& curve) {
    std::ofstream os(path);
    if (!os) throw ContractError("cannot write " + path);
    os << "threshold,score\n";
    char line[64];
    for (size_t i = 0; i < curve.thresholds.size(); ++i) {
        std::snprintf(line, sizeof(line), "%.6g,%.6f\n", curve.thresholds[i], curve.scores[i]);
        os << line;
    }
}

EvalSummary evaluate(const std::vector<BBox>& preds, const std::vector<BBox>& gts) {
    EvalSummary s;
    s.precision_20 = precision_at_20(precision_plot(preds, gts));
    s.success_auc = auc(success_plot(preds, gts));
    return s;
}

} // namespace hift
