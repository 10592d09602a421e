#include "hift/runner.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "hift/checkpoint.hpp"
#include "hift/sequence_io.hpp"
#include "hift/tracker.hpp"
#include "hift/train.hpp"

namespace fs = std::filesystem;

namespace hift {

GradCheckReport cmd_gradcheck(std::uint64_t seed, std::ostream& out, const std::string& corrupt) {
    GradCheckReport report = run_gradcheck(seed, 5, 6, 1e-4, corrupt);
    for (const auto& line : report.lines) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-36s %4d coords  max_err %.3e  %s\n", line.name.c_str(),
                      line.coords_checked, line.max_err, line.ok ? "ok" : "FAIL");
        out << buf;
    }
    out << (report.ok ? "gradcheck passed" : "gradcheck FAILED") << " (" << report.seeds
        << " seeds)\n";
    return report;
}

void cmd_train(const RunConfig& cfg, const std::string& out_dir, std::ostream& progress) {
    fs::create_directories(out_dir);
    cfg.save((fs::path(out_dir) / "config.echo").string());

    Model model(cfg.model_config(), cfg.seed);
    std::ofstream loss_csv((fs::path(out_dir) / "loss.csv").string());
    if (!loss_csv) throw ContractError("cannot write loss.csv in " + out_dir);
    train_model(model, cfg, &loss_csv, &progress);

    ParamRefs params = model.parameters();
    save_checkpoint((fs::path(out_dir) / "checkpoint.hift").string(), params);
}

std::vector<BBox> track_sequence(const Model& model, const TrackerConfig& tcfg,
                                 const std::vector<Image>& frames, const BBox& init_gt,
                                 std::vector<Tensor>* score_maps) {
    Tracker tracker(model, tcfg);
    TrackState state = tracker.init(frames.at(0), init_gt);
    std::vector<BBox> out;
    out.push_back(state.current);
    if (score_maps) score_maps->emplace_back(); // no score map for the init frame
    for (size_t f = 1; f < frames.size(); ++f) {
        Tensor dump;
        out.push_back(tracker.update(state, frames[f], score_maps ? &dump : nullptr));
        if (score_maps) score_maps->push_back(std::move(dump));
    }
    return out;
}

void cmd_track(const RunConfig& cfg, const std::string& sequence_dir, const std::string& checkpoint,
               const std::string& out_dir, bool dump_scores) {
    fs::create_directories(out_dir);
    cfg.save((fs::path(out_dir) / "config.echo").string());

    SequenceData seq = read_sequence_dir(sequence_dir);
    if (seq.gt.empty()) {
        throw ContractError("groundtruth.txt with a first-frame box is required for init in " +
                            sequence_dir);
    }
    Model model(cfg.model_config(), cfg.seed);
    ParamRefs params = model.parameters();
    load_checkpoint(checkpoint, params);

    std::vector<Image> frames;
    frames.reserve(seq.frame_paths.size());
    for (const auto& p : seq.frame_paths) frames.push_back(read_image(p));

    std::vector<Tensor> scores;
    std::vector<BBox> boxes =
        track_sequence(model, cfg.tracker_config(), frames, seq.gt[0], dump_scores ? &scores : nullptr);
    write_boxes((fs::path(out_dir) / "results.txt").string(), boxes);

    if (dump_scores) {
        const fs::path dir = fs::path(out_dir) / "scores";
        fs::create_directories(dir);
        char name[32];
        for (size_t f = 1; f < scores.size(); ++f) {
            std::snprintf(name, sizeof(name), "%06zu.csv", f + 1);
            std::ofstream os((dir / name).string());
            const Tensor& m = scores[f];
            for (int y = 0; y < m.extent(0); ++y) {
                for (int x = 0; x < m.extent(1); ++x) {
                    os << (x ? "," : "") << m.at2(y, x);
                }
                os << "\n";
            }
        }
    }
}

EvalSummary cmd_eval(const std::string& results_path, const std::string& groundtruth_path,
                     const std::string& out_dir, std::ostream& out) {
    std::vector<BBox> preds = read_boxes(results_path);
    std::vector<BBox> gts = read_boxes(groundtruth_path);
    MetricCurve prec = precision_plot(preds, gts);
    MetricCurve succ = success_plot(preds, gts);
    EvalSummary summary;
    summary.precision_20 = precision_at_20(prec);
    summary.success_auc = auc(succ);

    fs::create_directories(out_dir);
    write_curve_csv((fs::path(out_dir) / "precision_plot.csv").string(), prec);
    write_curve_csv((fs::path(out_dir) / "success_plot.csv").string(), succ);
    std::ofstream sm((fs::path(out_dir) / "metrics.csv").string());
    sm << "precision@20,success_auc\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f\n", summary.precision_20, summary.success_auc);
    sm << buf;
    out << "precision@20,success_auc\n" << buf;
    return summary;
}

namespace {

struct VariantSpec {
    std::string name;
    double paper_precision;
    double paper_success;
    void (*mutate)(RunConfig&);
};

const std::vector<VariantSpec>& variant_specs() {
    static const std::vector<VariantSpec> specs = {
        {"Baseline", 0.611, 0.463, [](RunConfig& c) { c.transformer_enabled = false; }},
        {"Baseline+OT", 0.597, 0.446, [](RunConfig& c) { c.variant = "ot"; }},
        {"Baseline+FT", 0.675, 0.496, [](RunConfig& c) { c.variant = "ft"; }},
        {"Baseline+HFT+PE", 0.689, 0.523, [](RunConfig& c) { c.decoder_pe = true; }},
        {"Baseline+HFT+RL", 0.629, 0.486, [](RunConfig& c) { c.label_mode = "rectangle"; }},
        {"Baseline+HFT", 0.763, 0.566, [](RunConfig&) {}},
    };
    return specs;
}

AblateRow run_variant(const VariantSpec& spec, const RunConfig& base) {
    AblateRow row;
    row.name = spec.name;
    row.paper_precision = spec.paper_precision;
    row.paper_success = spec.paper_success;

    RunConfig cfg = base;
    cfg.variant = "hft";
    cfg.decoder_pe = false;
    cfg.transformer_enabled = true;
    cfg.label_mode = "circular";
    spec.mutate(cfg);
    cfg.steps = base.ablate_steps;
    cfg.num_sequences = base.ablate_train_sequences;

    try {
        Model model(cfg.model_config(), cfg.seed);
        train_model(model, cfg, nullptr, nullptr);

        // held-out easy sequences, seed block away from the training draws
        std::vector<BBox> preds, gts;
        SynthConfig synth = cfg.synth_config();
        synth.seed += 50000;
        for (int k = 0; k < base.ablate_eval_sequences; ++k) {
            SynthSequence seq = gen_sequence(vary_sequence(synth, k, /*easy=*/true));
            std::vector<BBox> boxes = track_sequence(model, cfg.tracker_config(), seq.frames, seq.gt[0]);
            preds.insert(preds.end(), boxes.begin(), boxes.end());
            gts.insert(gts.end(), seq.gt.begin(), seq.gt.end());
        }
        EvalSummary s = evaluate(preds, gts);
        row.precision20 = s.precision_20;
        row.success_auc = s.success_auc;
    } catch (const NumericError&) {
        row.failed = true;
    }
    return row;
}

} // namespace

std::vector<AblateRow> cmd_ablate(const RunConfig& cfg, const std::string& out_dir, int jobs,
                                  std::ostream& progress) {
    fs::create_directories(out_dir);
    cfg.save((fs::path(out_dir) / "config.echo").string());

    const auto& specs = variant_specs();
    std::vector<AblateRow> rows(specs.size());
    if (jobs <= 1) {
        for (size_t i = 0; i < specs.size(); ++i) {
            progress << "variant " << specs[i].name << "...\n";
            rows[i] = run_variant(specs[i], cfg);
        }
    } else {
        std::mutex next_mutex;
        size_t next = 0;
        auto worker = [&]() {
            while (true) {
                size_t i;
                {
                    std::lock_guard<std::mutex> lock(next_mutex);
                    if (next >= specs.size()) return;
                    i = next++;
                }
                rows[i] = run_variant(specs[i], cfg);
            }
        };
        std::vector<std::thread> pool;
        for (int t = 0; t < std::min<int>(jobs, static_cast<int>(specs.size())); ++t) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) t.join();
    }

    // Δ% relative to the Baseline row, Table-5 style
    const AblateRow& base = rows[0];
    for (auto& r : rows) {
        if (r.failed || base.failed || base.precision20 <= 0.0 || base.success_auc <= 0.0) continue;
        r.delta_prec_pct = (r.precision20 - base.precision20) / base.precision20 * 100.0;
        r.delta_succ_pct = (r.success_auc - base.success_auc) / base.success_auc * 100.0;
    }

    std::ofstream csv((fs::path(out_dir) / "ablation.csv").string());
    csv << "variant,precision@20,success_auc,delta_prec_pct,delta_succ_pct,"
           "paper_precision,paper_success\n";
    progress << "\nvariant,precision@20,success_auc,delta_prec_pct,delta_succ_pct"
                " (paper reference values are NOT reproducible at desk scale)\n";
    for (const auto& r : rows) {
        char buf[200];
        if (r.failed) {
            std::snprintf(buf, sizeof(buf), "%s,FAILED,FAILED,,,%.3f,%.3f\n", r.name.c_str(),
                          r.paper_precision, r.paper_success);
        } else {
            std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.2f,%.2f,%.3f,%.3f\n", r.name.c_str(),
                          r.precision20, r.success_auc, r.delta_prec_pct, r.delta_succ_pct,
                          r.paper_precision, r.paper_success);
        }
        csv << buf;
        progress << buf;
    }
    return rows;
}

} // namespace hift
