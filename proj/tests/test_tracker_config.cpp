#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "hift/config.hpp"
#include "hift/tracker.hpp"

using namespace hift;

TEST_SUITE_BEGIN("tracker");

namespace {

// small but real model; untrained weights are fine for contract tests
Model make_model(std::uint64_t seed = 3) { return Model(ModelConfig{}, seed); }

Image gray_frame(int w, int h, double base) {
    Image img(w, h, 1, base);
    return img;
}

} // namespace

TEST_CASE("init caches features, keeps the box, and builds a valid window") {
    Model model = make_model();
    Tracker tracker(model, TrackerConfig{});
    Image frame = gray_frame(160, 120, 90.0);
    BBox gt{80, 60, 24, 18};
    TrackState state = tracker.init(frame, gt);
    CHECK(state.current.cx == gt.cx);
    CHECK(state.current.w == gt.w);
    const MapGeometry geom = model.map_geometry();
    CHECK(state.template_features.level5.value().extent(1) ==
          model.config().backbone.level_channels[2]);
    REQUIRE(state.window.shape() == Shape{geom.height, geom.width});
    double mx = 0.0;
    for (int i = 0; i < state.window.size(); ++i) {
        CHECK(state.window[i] >= 0.0);
        CHECK(state.window[i] <= 1.0);
        mx = std::max(mx, state.window[i]);
    }
    CHECK(state.window.at2(geom.height / 2, geom.width / 2) == mx);
    CHECK(mx == 1.0);
}

TEST_CASE("init rejects out-of-frame boxes") {
    Model model = make_model();
    Tracker tracker(model, TrackerConfig{});
    Image frame = gray_frame(160, 120, 90.0);
    CHECK_THROWS_AS(tracker.init(frame, BBox{-10, 60, 24, 18}), ContractError);
    CHECK_THROWS_AS(tracker.init(frame, BBox{80, 118, 24, 18}), ContractError);
}

TEST_CASE("window weight 1 pins the argmax to the map center") {
    Model model = make_model();
    TrackerConfig cfg;
    cfg.window_influence = 1.0;
    Tracker tracker(model, cfg);
    Image frame = gray_frame(160, 120, 60.0);
    // drop a bright blob off-center so raw scores would disagree
    for (int y = 20; y < 40; ++y)
        for (int x = 110; x < 135; ++x) frame.at(0, y, x) = 240.0;
    TrackState state = tracker.init(frame, BBox{80, 60, 24, 18});
    Tensor scores;
    tracker.update(state, frame, &scores);
    const MapGeometry geom = model.map_geometry();
    int best = 0;
    for (int i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    CHECK(best / geom.width == geom.height / 2);
    CHECK(best % geom.width == geom.width / 2);
}

TEST_CASE("zero window weight keeps the raw-score argmax") {
    Model model = make_model();
    TrackerConfig cfg;
    cfg.window_influence = 0.0;
    Tracker tracker(model, cfg);
    Image frame = gray_frame(160, 120, 70.0);
    for (int y = 50; y < 70; ++y)
        for (int x = 70; x < 95; ++x) frame.at(0, y, x) = 220.0;
    TrackState state = tracker.init(frame, BBox{82, 60, 25, 20});
    Tensor fused;
    tracker.update(state, frame, &fused);

    // recompute the raw map through the model to compare argmax locations
    const BackboneConfig& bc = model.config().backbone;
    const MapGeometry geom = model.map_geometry();
    const double s_z = template_crop_size(BBox{82, 60, 25, 20}, cfg.context);
    const double s_x = s_z * bc.search_size / bc.template_size;
    FeatureLevels sf = model.extract(crop_and_resize(frame, 82, 60, s_x, bc.search_size));
    HeadOutputs out = model.forward_from_features(state.template_features, sf);
    int best_raw = 0;
    double best_v = -1.0;
    for (int r = 0; r < geom.locations(); ++r) {
        const double a = out.cls1_logits.value().at2(r, 0);
        const double b = out.cls1_logits.value().at2(r, 1);
        const double m = std::max(a, b);
        const double p1 = std::exp(b - m) / (std::exp(a - m) + std::exp(b - m));
        const double z = out.cls2_logits.value().at2(r, 0);
        const double p2 = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        if (p1 * p2 > best_v) {
            best_v = p1 * p2;
            best_raw = r;
        }
    }
    int best_fused = 0;
    for (int i = 1; i < fused.size(); ++i)
        if (fused[i] > fused[best_fused]) best_fused = i;
    CHECK(best_fused == best_raw);
}

TEST_CASE("update always returns a positive box inside the frame") {
    Model model = make_model(5);
    Tracker tracker(model, TrackerConfig{});
    Image frame = gray_frame(100, 80, 120.0);
    TrackState state = tracker.init(frame, BBox{20, 15, 18, 14});
    for (int step = 0; step < 5; ++step) {
        BBox box = tracker.update(state, frame);
        CHECK(box.w > 0.0);
        CHECK(box.h > 0.0);
        CHECK(box.x1() >= -1e-9);
        CHECK(box.y1() >= -1e-9);
        CHECK(box.x2() <= frame.width + 1e-9);
        CHECK(box.y2() <= frame.height + 1e-9);
    }
}

TEST_CASE("update is deterministic for identical state and frame") {
    Model model = make_model(7);
    Tracker tracker(model, TrackerConfig{});
    Image frame = gray_frame(160, 120, 100.0);
    for (int y = 55; y < 70; ++y)
        for (int x = 72; x < 92; ++x) frame.at(0, y, x) = 210.0;
    BBox gt{82, 62, 20, 15};
    TrackState s1 = tracker.init(frame, gt);
    TrackState s2 = tracker.init(frame, gt);
    BBox b1 = tracker.update(s1, frame);
    BBox b2 = tracker.update(s2, frame);
    CHECK(b1.cx == b2.cx);
    CHECK(b1.cy == b2.cy);
    CHECK(b1.w == b2.w);
    CHECK(b1.h == b2.h);
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("config");

TEST_CASE("defaults round-trip through save and load") {
    namespace fs = std::filesystem;
    RunConfig cfg;
    cfg.steps = 123;
    cfg.lr_start = 0.0123456789;
    cfg.variant = "ft";
    cfg.save("cfg_roundtrip.ini");
    RunConfig loaded = RunConfig::load("cfg_roundtrip.ini");
    CHECK(loaded.steps == 123);
    CHECK(loaded.lr_start == cfg.lr_start); // %.17g survives exactly
    CHECK(loaded.variant == "ft");
    CHECK(loaded.level_channels == cfg.level_channels);
    // echo of the loaded config is byte-identical
    loaded.save("cfg_roundtrip2.ini");
    std::ifstream f1("cfg_roundtrip.ini"), f2("cfg_roundtrip2.ini");
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
    fs::remove("cfg_roundtrip.ini");
    fs::remove("cfg_roundtrip2.ini");
}

TEST_CASE("unknown keys are a hard error") {
    std::ofstream os("cfg_unknown.ini");
    os << "[train]\nsteps = 10\nbogus_key = 1\n";
    os.close();
    CHECK_THROWS_AS(RunConfig::load("cfg_unknown.ini"), ConfigError);
    std::filesystem::remove("cfg_unknown.ini");
}

TEST_CASE("bad values and sections are rejected") {
    {
        std::ofstream os("cfg_bad.ini");
        os << "[train]\nsteps = banana\n";
    }
    CHECK_THROWS_AS(RunConfig::load("cfg_bad.ini"), ConfigError);
    {
        std::ofstream os("cfg_bad.ini");
        os << "[transformer]\nvariant = deformable\n";
    }
    CHECK_THROWS_AS(RunConfig::load("cfg_bad.ini"), ConfigError);
    {
        std::ofstream os("cfg_bad.ini");
        os << "[backbone]\nstrides = 2,2\n";
    }
    CHECK_THROWS_AS(RunConfig::load("cfg_bad.ini"), ConfigError);
    std::filesystem::remove("cfg_bad.ini");
}

TEST_CASE("comments and blank lines parse fine") {
    {
        std::ofstream os("cfg_comments.ini");
        os << "# top comment\n\n[loss]\nlambda1 = 2.5 # inline\n; another\nlambda2 = 0.5\n";
    }
    RunConfig cfg = RunConfig::load("cfg_comments.ini");
    CHECK(cfg.lambda1 == 2.5);
    CHECK(cfg.lambda2 == 0.5);
    std::filesystem::remove("cfg_comments.ini");
}

TEST_SUITE_END();
