#pragma once

#include <string>
#include <vector>

#include "hift/geometry.hpp"

namespace hift {

struct MetricCurve {
    std::vector<double> thresholds;
    std::vector<double> scores;
};

// Fraction of frames with CLE <= t, t = 0..50 px step 1.
MetricCurve precision_plot(const std::vector<BBox>& preds, const std::vector<BBox>& gts);

// Fraction of frames with IoU strictly beyond t, t = 0..1 step 0.05.
MetricCurve success_plot(const std::vector<BBox>& preds, const std::vector<BBox>& gts);

// Mean of the success scores over the threshold grid.
double auc(const MetricCurve& curve);

// Score at threshold 20; the grid must contain it.
double precision_at_20(const MetricCurve& curve);

void write_curve_csv(const std::string& path, const MetricCurve& curve);

struct EvalSummary {
    double precision_20 = 0.0;
    double success_auc = 0.0;
};

EvalSummary evaluate(const std::vector<BBox>& preds, const std::vector<BBox>& gts);

} // namespace hift
