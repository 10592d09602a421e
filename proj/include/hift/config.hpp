#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hift/heads.hpp"
#include "hift/model.hpp"
#include "hift/synth.hpp"
#include "hift/tracker.hpp"

namespace hift {

// Flat-section INI configuration. Every key has a default; unknown keys are a
// hard error. The echoed effective config reloads to an identical run.
struct RunConfig {
    // [backbone]
    int template_size = 64;
    int search_size = 128;
    std::vector<int> stem_channels = {16, 32};
    std::vector<int> level_channels = {32, 48, 64};
    std::vector<int> kernels = {3, 3, 3, 3, 3};
    std::vector<int> strides = {2, 2, 2, 1, 1};
    std::vector<int> paddings = {1, 1, 0, 0, 0};

    // [correlation]
    int channels = 64;

    // [transformer]
    bool transformer_enabled = true;
    std::string variant = "hft";
    bool decoder_pe = false;
    int heads = 4;
    int ffn_mult = 2;
    int decoder_layers = 2;

    // [label]
    std::string label_mode = "circular";
    double r_pos_strides = 2.0;
    double r_ign_strides = 4.0;
    double neg_cap_ratio = 3.0;
    int neg_cap_floor = 16;

    // [loss]
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    double lambda3 = 1.0;

    // [tracker]
    double window_influence = 0.35;
    double size_lr = 0.3;
    double context = 0.5;

    // [synth]
    int canvas_w = 160;
    int canvas_h = 120;
    int frames = 30;
    bool color = false;
    double bg_gray = 60.0;
    double target_gray = 210.0;
    double noise_std = 4.0;
    double motion_jitter = 0.4;
    bool occluders = false;
    std::uint64_t synth_seed = 100;

    // [train]
    int steps = 2000;
    int batch = 1;
    double lr_start = 2e-2;
    double lr_end = 2e-3;
    double momentum = 0.9;
    double weight_decay = 0.0;
    std::uint64_t seed = 1;
    int num_sequences = 20;
    int max_frame_gap = 12;
    double center_jitter = 10.0;
    bool freeze_stem = false;

    // [ablate]
    int ablate_steps = 350;
    int ablate_train_sequences = 10;
    int ablate_eval_sequences = 6;

    static RunConfig defaults() { return RunConfig{}; }
    static RunConfig load(const std::string& path);
    void save(const std::string& path) const;

    ModelConfig model_config() const;
    LabelConfig label_config() const;
    LossWeights loss_weights() const;
    TrackerConfig tracker_config() const;
    SynthConfig synth_config() const;
};

} // namespace hift
