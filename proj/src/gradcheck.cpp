#include "hift/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "hift/train.hpp"

namespace hift {

RunConfig gradcheck_config() {
    RunConfig cfg;
    cfg.template_size = 16;
    cfg.search_size = 21;
    cfg.stem_channels = {4, 6};
    cfg.level_channels = {6, 8, 8};
    cfg.kernels = {3, 3, 3, 3, 3};
    cfg.strides = {1, 1, 1, 1, 1};
    cfg.paddings = {0, 0, 0, 0, 0};
    cfg.channels = 16; // C = 16, map 6x6
    cfg.heads = 4;
    cfg.ffn_mult = 2;
    cfg.decoder_layers = 2;
    return cfg;
}

namespace {

struct Fixture {
    Tensor template_img;
    Tensor search_img;
    BBox gt;
    LabelMaps labels;
};

Fixture make_fixture(const Model& model, const RunConfig& cfg, Rng& rng) {
    Fixture f;
    const BackboneConfig& bc = model.config().backbone;
    f.template_img = Tensor::uniform({3, bc.template_size, bc.template_size}, rng, -0.5, 0.5);
    f.search_img = Tensor::uniform({3, bc.search_size, bc.search_size}, rng, -0.5, 0.5);
    const MapGeometry geom = model.map_geometry();
    // box centered near the map middle so both label branches have positives
    const double mid = bc.search_size / 2.0;
    f.gt = BBox{mid + rng.uniform(-1.0, 1.0), mid + rng.uniform(-1.0, 1.0), rng.uniform(6.0, 9.0),
                rng.uniform(6.0, 9.0)};
    f.labels = make_labels(f.gt, geom, cfg.label_config().mode, 7, cfg.label_config());
    return f;
}

double loss_value(const Model& model, const RunConfig& cfg, const Fixture& f) {
    HeadOutputs out = model.forward(f.template_img, f.search_img);
    LossParts parts =
        compute_loss(out, f.labels, f.gt, model.map_geometry(), cfg.loss_weights());
    return parts.total.value().item();
}

} // namespace

GradCheckReport run_gradcheck(std::uint64_t base_seed, int num_seeds, int coords_per_param, double tol,
                              const std::string& corrupt_param) {
    constexpr double kStep = 1e-5;
    RunConfig cfg = gradcheck_config();
    GradCheckReport report;
    report.seeds = num_seeds;

    for (int s = 0; s < num_seeds; ++s) {
        const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(s);
        Model model(cfg.model_config(), seed);
        Rng rng(seed * 977 + 11);
        Fixture fixture = make_fixture(model, cfg, rng);

        model.zero_grad();
        {
            HeadOutputs out = model.forward(fixture.template_img, fixture.search_img);
            LossParts parts =
                compute_loss(out, fixture.labels, fixture.gt, model.map_geometry(), cfg.loss_weights());
            backward(parts.total);
        }

        ParamRefs params = model.parameters();
        for (size_t pi = 0; pi < params.size(); ++pi) {
            Parameter* p = params[pi];
            if (!corrupt_param.empty() && p->name == corrupt_param) {
                p->grad()[0] += 0.05;
            }
            GradCheckLine* line = nullptr;
            for (auto& l : report.lines) {
                if (l.name == p->name) line = &l;
            }
            if (!line) {
                report.lines.push_back({p->name, 0, 0.0, true});
                line = &report.lines.back();
            }
            Rng coord_rng(seed * 131071 + pi * 8191 + 3);
            const int k = std::min(coords_per_param, p->value().size());
            for (int c = 0; c < k; ++c) {
                const int idx = coord_rng.index(p->value().size());
                const double saved = p->value()[idx];
                p->value()[idx] = saved + kStep;
                const double up = loss_value(model, cfg, fixture);
                p->value()[idx] = saved - kStep;
                const double down = loss_value(model, cfg, fixture);
                p->value()[idx] = saved;
                const double fd = (up - down) / (2.0 * kStep);
                const double analytic = p->grad()[idx];
                const double err =
                    std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-3});
                line->max_err = std::max(line->max_err, err);
                line->coords_checked += 1;
                if (err > tol) line->ok = false;
            }
        }
    }
    for (const auto& l : report.lines) report.ok = report.ok && l.ok;
    return report;
}

} // namespace hift
