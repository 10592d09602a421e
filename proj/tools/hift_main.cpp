#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "hift/runner.hpp"

namespace {

// exit codes: 0 success, 1 contract/config error, 2 numerical failure
constexpr int kOk = 0;
constexpr int kContractError = 1;
constexpr int kNumericError = 2;

hift::RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override) {
    hift::RunConfig cfg = path.empty() ? hift::RunConfig::defaults() : hift::RunConfig::load(path);
    if (seed_override) cfg.seed = *seed_override;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"HiFT hierarchical feature transformer tracker (desk scale)"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "run";
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    bool dump_scores = false;
    app.add_option("--config", config_path, "INI run configuration (defaults when omitted)");
    app.add_option("--seed", seed, "override train.seed");
    app.add_option("--jobs", jobs, "parallelism across independent sequences/variants");
    app.add_option("--out", out_dir, "run directory for artifacts");
    app.add_flag("--dump-scores", dump_scores, "export fused score maps per frame (track)");

    auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every parameter group");
    std::string corrupt;
    grad->add_option("--corrupt", corrupt, "test fixture: corrupt this parameter's gradient")
        ->group("");

    auto* train = app.add_subcommand("train", "train on synthetic sequences, write checkpoint");

    auto* track = app.add_subcommand("track", "run the tracker over a sequence directory");
    std::string sequence_dir, checkpoint;
    track->add_option("sequence", sequence_dir, "directory of PGM/PPM frames + groundtruth.txt")
        ->required();
    track->add_option("--checkpoint", checkpoint, "trained model checkpoint")->required();

    auto* eval = app.add_subcommand("eval", "OPE metrics for a results/groundtruth pair");
    std::string results_path, gt_path;
    eval->add_option("results", results_path, "results.txt")->required();
    eval->add_option("groundtruth", gt_path, "groundtruth.txt")->required();

    auto* ablate = app.add_subcommand("ablate", "train and compare the six Table-style variants");

    CLI11_PARSE(app, argc, argv);

    try {
        if (grad->parsed()) {
            hift::RunConfig cfg = load_config(config_path, seed);
            hift::GradCheckReport report = hift::cmd_gradcheck(cfg.seed, std::cout, corrupt);
            return report.ok ? kOk : kNumericError;
        }
        if (train->parsed()) {
            hift::cmd_train(load_config(config_path, seed), out_dir, std::cout);
            return kOk;
        }
        if (track->parsed()) {
            hift::cmd_track(load_config(config_path, seed), sequence_dir, checkpoint, out_dir,
                            dump_scores);
            return kOk;
        }
        if (eval->parsed()) {
            hift::cmd_eval(results_path, gt_path, out_dir, std::cout);
            return kOk;
        }
        if (ablate->parsed()) {
            hift::cmd_ablate(load_config(config_path, seed), out_dir, jobs, std::cout);
            return kOk;
        }
    } catch (const hift::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumericError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kContractError;
    }
    return kContractError;
}
