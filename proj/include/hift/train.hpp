#pragma once

#include <iosfwd>
#include <optional>

#include "hift/config.hpp"
#include "hift/model.hpp"

namespace hift {

struct SgdOptimizer {
    double momentum = 0.9;
    double weight_decay = 0.0;

    void step(const ParamRefs& params, double lr);

private:
    std::vector<Tensor> velocity_;
};

// One training sample: crops in model input space plus the gt in search-crop
// pixels. Built from two frames of a synthetic sequence.
struct TrainSample {
    Tensor template_img;
    Tensor search_img;
    BBox gt_in_crop;
};

TrainSample make_pair_sample(const Model& model, const SynthSequence& seq, int frame_t, int frame_s,
                             double center_jitter, double context, Rng& rng);

struct TrainResult {
    std::vector<double> losses; // batch-mean loss per step
    std::vector<double> lrs;
};

// SGD with momentum over synthetic pair samples; deterministic under
// cfg.seed. Loss CSV rows "step,loss,lr" stream to loss_csv when given.
// Throws NumericError (with a batch diagnostic) on NaN loss.
TrainResult train_model(Model& model, const RunConfig& cfg, std::ostream* loss_csv,
                        std::ostream* progress);

// log-space learning-rate schedule between lr_start and lr_end
double lr_at(const RunConfig& cfg, int step);

} // namespace hift
