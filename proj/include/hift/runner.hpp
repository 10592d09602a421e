#pragma once

#include <iosfwd>
#include <string>

#include "hift/config.hpp"
#include "hift/eval.hpp"
#include "hift/gradcheck.hpp"

namespace hift {

// Implementations behind the CLI subcommands. Everything lands in out_dir:
// config.echo, checkpoint.hift, loss.csv, results.txt, metrics files.

GradCheckReport cmd_gradcheck(std::uint64_t seed, std::ostream& out, const std::string& corrupt = "");

void cmd_train(const RunConfig& cfg, const std::string& out_dir, std::ostream& progress);

void cmd_track(const RunConfig& cfg, const std::string& sequence_dir, const std::string& checkpoint,
               const std::string& out_dir, bool dump_scores);

EvalSummary cmd_eval(const std::string& results_path, const std::string& groundtruth_path,
                     const std::string& out_dir, std::ostream& out);

struct AblateRow {
    std::string name;
    bool failed = false;
    double precision20 = 0.0;
    double success_auc = 0.0;
    double delta_prec_pct = 0.0;
    double delta_succ_pct = 0.0;
    double paper_precision = 0.0; // Table-5 reference, not reproducible at desk scale
    double paper_success = 0.0;
};

std::vector<AblateRow> cmd_ablate(const RunConfig& cfg, const std::string& out_dir, int jobs,
                                  std::ostream& progress);

// OPE over one sequence with a ready tracker; returns one box per frame, the
// first frame echoing the ground truth used for init.
std::vector<BBox> track_sequence(const Model& model, const TrackerConfig& tcfg,
                                 const std::vector<Image>& frames, const BBox& init_gt,
                                 std::vector<Tensor>* score_maps = nullptr);

} // namespace hift
