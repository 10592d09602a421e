#include "hift/train.hpp"

#include <cmath>
#include <iostream>
#include <sstream>

namespace hift {

void SgdOptimizer::step(const ParamRefs& params, double lr) {
    if (velocity_.empty()) {
        velocity_.reserve(params.size());
        for (Parameter* p : params) velocity_.emplace_back(p->value().shape());
    }
    if (velocity_.size() != params.size()) throw ContractError("optimizer bound to a different model");
    for (size_t i = 0; i < params.size(); ++i) {
        Parameter* p = params[i];
        if (!p->trainable) continue;
        Tensor& v = velocity_[i];
        Tensor& w = p->value();
        Tensor& g = p->grad();
        for (int k = 0; k < w.size(); ++k) {
            v[k] = momentum * v[k] - lr * (g[k] + weight_decay * w[k]);
            w[k] += v[k];
        }
    }
}

double lr_at(const RunConfig& cfg, int step) {
    if (cfg.steps <= 1) return cfg.lr_start;
    const double t = static_cast<double>(step) / (cfg.steps - 1);
    return cfg.lr_start * std::pow(cfg.lr_end / cfg.lr_start, t);
}

TrainSample make_pair_sample(const Model& model, const SynthSequence& seq, int frame_t, int frame_s,
                             double center_jitter, double context, Rng& rng) {
    const BackboneConfig& bc = model.config().backbone;
    const BBox& gt_t = seq.gt[static_cast<size_t>(frame_t)];
    const BBox& gt_s = seq.gt[static_cast<size_t>(frame_s)];

    TrainSample sample;
    const double s_z = template_crop_size(gt_t, context);
    sample.template_img =
        crop_and_resize(seq.frames[static_cast<size_t>(frame_t)], gt_t.cx, gt_t.cy, s_z, bc.template_size);

    double s_x = template_crop_size(gt_s, context) * bc.search_size / bc.template_size;
    s_x *= rng.uniform(0.95, 1.05);
    const double jx = rng.uniform(-center_jitter, center_jitter);
    const double jy = rng.uniform(-center_jitter, center_jitter);
    const double ccx = gt_s.cx + jx;
    const double ccy = gt_s.cy + jy;
    sample.search_img =
        crop_and_resize(seq.frames[static_cast<size_t>(frame_s)], ccx, ccy, s_x, bc.search_size);

    const double scl = bc.search_size / s_x;
    sample.gt_in_crop = {(gt_s.cx - ccx) * scl + bc.search_size / 2.0,
                         (gt_s.cy - ccy) * scl + bc.search_size / 2.0, gt_s.w * scl, gt_s.h * scl};
    return sample;
}

TrainResult train_model(Model& model, const RunConfig& cfg, std::ostream* loss_csv,
                        std::ostream* progress) {
    Rng rng(cfg.seed);
    SynthConfig base = cfg.synth_config();
    std::vector<SynthSequence> sequences;
    sequences.reserve(static_cast<size_t>(cfg.num_sequences));
    for (int k = 0; k < cfg.num_sequences; ++k) {
        sequences.push_back(gen_sequence(vary_sequence(base, k, /*easy=*/false)));
    }

    if (cfg.freeze_stem) {
        // paper-style early-layer freezing, off by default at desk scale
        const_cast<Backbone&>(model.backbone()).set_stem_trainable(false);
    }

    const MapGeometry geom = model.map_geometry();
    const LabelConfig label_cfg = cfg.label_config();
    const LossWeights weights = cfg.loss_weights();
    SgdOptimizer opt;
    opt.momentum = cfg.momentum;
    opt.weight_decay = cfg.weight_decay;
    ParamRefs params = model.parameters();

    TrainResult result;
    if (loss_csv) *loss_csv << "step,loss,lr\n";

    for (int step = 0; step < cfg.steps; ++step) {
        model.zero_grad();
        Var batch_loss;
        double batch_value = 0.0;
        int contributing = 0;
        std::ostringstream batch_desc;
        for (int b = 0; b < cfg.batch; ++b) {
            // resample on degenerate labels, bounded
            for (int attempt = 0; attempt < 16; ++attempt) {
                const int si = rng.index(static_cast<int>(sequences.size()));
                const SynthSequence& seq = sequences[static_cast<size_t>(si)];
                const int nf = static_cast<int>(seq.frames.size());
                const int ft = rng.index(nf);
                const int lo = std::max(0, ft - cfg.max_frame_gap);
                const int hi = std::min(nf - 1, ft + cfg.max_frame_gap);
                const int fs = lo + rng.index(hi - lo + 1);
                TrainSample sample =
                    make_pair_sample(model, seq, ft, fs, cfg.center_jitter, cfg.context, rng);
                try {
                    const std::uint64_t label_seed = rng.raw();
                    LabelMaps labels = make_labels(sample.gt_in_crop, geom, label_cfg.mode, label_seed,
                                                   label_cfg);
                    HeadOutputs out = model.forward(sample.template_img, sample.search_img);
                    LossParts parts = compute_loss(out, labels, sample.gt_in_crop, geom, weights);
                    batch_loss = batch_loss.defined() ? add(batch_loss, parts.total) : parts.total;
                    batch_desc << " (seq " << si << ", frames " << ft << "->" << fs << ")";
                    ++contributing;
                    break;
                } catch (const DegenerateLabelError&) {
                    continue; // jittered crop lost the target; draw again
                }
            }
        }
        if (!batch_loss.defined()) {
            throw ContractError("could not assemble a single valid training sample; "
                                "check synth/label configuration");
        }
        Var mean_loss = scale(batch_loss, 1.0 / contributing);
        batch_value = mean_loss.value().item();
        if (!std::isfinite(batch_value)) {
            throw NumericError("NaN/Inf loss at step " + std::to_string(step) + "; batch:" +
                               batch_desc.str());
        }
        backward(mean_loss);
        opt.step(params, lr_at(cfg, step));

        result.losses.push_back(batch_value);
        result.lrs.push_back(lr_at(cfg, step));
        if (loss_csv) {
            char row[96];
            std::snprintf(row, sizeof(row), "%d,%.12g,%.12g\n", step, batch_value, lr_at(cfg, step));
            *loss_csv << row;
        }
        if (progress && (step % 100 == 0 || step == cfg.steps - 1)) {
            *progress << "step " << step << " loss " << batch_value << "\n";
        }
    }
    return result;
}

} // namespace hift
