#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hift/checkpoint.hpp"
#include "hift/config.hpp"
#include "hift/runner.hpp"
#include "hift/sequence_io.hpp"

namespace py = pybind11;

namespace {

hift::Tensor to_tensor(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    hift::Shape shape;
    for (py::ssize_t d = 0; d < arr.ndim(); ++d) shape.push_back(static_cast<int>(arr.shape(d)));
    std::vector<double> data(arr.data(), arr.data() + arr.size());
    return hift::Tensor(std::move(shape), std::move(data));
}

py::array_t<double> to_array(const hift::Tensor& t) {
    std::vector<py::ssize_t> shape;
    for (int d = 0; d < t.rank(); ++d) shape.push_back(t.extent(d));
    py::array_t<double> arr(shape);
    std::copy(t.data(), t.data() + t.size(), arr.mutable_data());
    return arr;
}

hift::BBox to_box(const std::array<double, 4>& b) { return {b[0], b[1], b[2], b[3]}; }

std::vector<hift::BBox> to_boxes(const py::array_t<double, py::array::c_style>& arr) {
    if (arr.ndim() != 2 || arr.shape(1) != 4) throw hift::ContractError("boxes must be (N, 4)");
    std::vector<hift::BBox> out;
    for (py::ssize_t i = 0; i < arr.shape(0); ++i) {
        out.push_back({arr.at(i, 0), arr.at(i, 1), arr.at(i, 2), arr.at(i, 3)});
    }
    return out;
}

py::array_t<double> boxes_to_array(const std::vector<hift::BBox>& boxes) {
    py::array_t<double> arr({static_cast<py::ssize_t>(boxes.size()), static_cast<py::ssize_t>(4)});
    for (size_t i = 0; i < boxes.size(); ++i) {
        arr.mutable_at(static_cast<py::ssize_t>(i), 0) = boxes[i].cx;
        arr.mutable_at(static_cast<py::ssize_t>(i), 1) = boxes[i].cy;
        arr.mutable_at(static_cast<py::ssize_t>(i), 2) = boxes[i].w;
        arr.mutable_at(static_cast<py::ssize_t>(i), 3) = boxes[i].h;
    }
    return arr;
}

hift::SynthConfig synth_config_from_kwargs(int canvas_w, int canvas_h, int frames, bool color,
                                           double target_w, double target_h, double velocity_x,
                                           double velocity_y, double jitter, double scale_drift,
                                           bool occluder, std::uint64_t seed, const std::string& shape) {
    hift::SynthConfig cfg;
    cfg.canvas_w = canvas_w;
    cfg.canvas_h = canvas_h;
    cfg.frames = frames;
    cfg.color = color;
    cfg.target_w = target_w;
    cfg.target_h = target_h;
    cfg.velocity_x = velocity_x;
    cfg.velocity_y = velocity_y;
    cfg.jitter = jitter;
    cfg.scale_drift = scale_drift;
    cfg.occluder = occluder;
    cfg.seed = seed;
    cfg.shape = shape == "ellipse" ? hift::TargetShape::kEllipse : hift::TargetShape::kRectangle;
    return cfg;
}

hift::SynthSequence sequence_from_arrays(const py::array_t<double, py::array::c_style>& frames,
                                         const py::array_t<double, py::array::c_style>& boxes) {
    if (frames.ndim() != 4) throw hift::ContractError("frames must be (F, C, H, W)");
    hift::SynthSequence seq;
    const int nf = static_cast<int>(frames.shape(0));
    const int nc = static_cast<int>(frames.shape(1));
    const int h = static_cast<int>(frames.shape(2));
    const int w = static_cast<int>(frames.shape(3));
    for (int f = 0; f < nf; ++f) {
        hift::Image img(w, h, nc);
        for (int c = 0; c < nc; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) img.at(c, y, x) = frames.at(f, c, y, x);
        seq.frames.push_back(std::move(img));
    }
    seq.gt = to_boxes(boxes);
    return seq;
}

} // namespace

PYBIND11_MODULE(_hift, m) {
    m.doc() = "HiFT tracker core: tensor ops, labels, metrics, synthetic data, tracking";

    py::register_exception<hift::ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<hift::ContractError>(m, "ContractError", PyExc_ValueError);
    py::register_exception<hift::ConfigError>(m, "HiftConfigError", PyExc_ValueError);

    m.def("softmax_rows",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> x) {
              return to_array(hift::softmax_rows(hift::Var(to_tensor(x))).value());
          },
          py::arg("x"), "Row-wise stabilized softmax of a rank-2 array.");

    m.def("layer_norm",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> x,
             py::array_t<double, py::array::c_style | py::array::forcecast> gain,
             py::array_t<double, py::array::c_style | py::array::forcecast> bias) {
              return to_array(hift::layer_norm(hift::Var(to_tensor(x)), hift::Var(to_tensor(gain)),
                                               hift::Var(to_tensor(bias)))
                                  .value());
          },
          py::arg("x"), py::arg("gain"), py::arg("bias"));

    m.def("conv2d",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> x,
             py::array_t<double, py::array::c_style | py::array::forcecast> w,
             py::array_t<double, py::array::c_style | py::array::forcecast> b, int stride, int padding) {
              return to_array(hift::conv2d(hift::Var(to_tensor(x)), hift::Var(to_tensor(w)),
                                           hift::Var(to_tensor(b)), stride, padding)
                                  .value());
          },
          py::arg("x"), py::arg("weight"), py::arg("bias"), py::arg("stride") = 1,
          py::arg("padding") = 0, "NCHW convolution.");

    m.def("xcorr",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> t,
             py::array_t<double, py::array::c_style | py::array::forcecast> s) {
              return to_array(
                  hift::xcorr_depthwise(hift::Var(to_tensor(t)), hift::Var(to_tensor(s))).value());
          },
          py::arg("template_feat"), py::arg("search_feat"),
          "Depthwise cross-correlation of CHW features.");

    m.def("attention",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> q,
             py::array_t<double, py::array::c_style | py::array::forcecast> k,
             py::array_t<double, py::array::c_style | py::array::forcecast> v) {
              return to_array(
                  hift::attention(hift::Var(to_tensor(q)), hift::Var(to_tensor(k)), hift::Var(to_tensor(v)))
                      .value());
          },
          py::arg("q"), py::arg("k"), py::arg("v"), "Softmax(Q K^T / sqrt(c)) V.");

    m.def("iou", [](std::array<double, 4> a, std::array<double, 4> b) { return hift::iou(to_box(a), to_box(b)); },
          py::arg("a"), py::arg("b"), "IoU of two (cx, cy, w, h) boxes.");
    m.def("cle", [](std::array<double, 4> a, std::array<double, 4> b) { return hift::cle(to_box(a), to_box(b)); },
          py::arg("a"), py::arg("b"), "Center location error in pixels.");

    m.def("make_labels",
          [](std::array<double, 4> gt, int width, int height, double stride, double offset,
             const std::string& mode, std::uint64_t seed, double r_pos_strides, double r_ign_strides,
             double neg_cap_ratio, int neg_cap_floor) {
              hift::MapGeometry geom{width, height, stride, offset};
              hift::LabelConfig cfg;
              cfg.mode = hift::parse_label_mode(mode);
              cfg.r_pos_strides = r_pos_strides;
              cfg.r_ign_strides = r_ign_strides;
              cfg.neg_cap_ratio = neg_cap_ratio;
              cfg.neg_cap_floor = neg_cap_floor;
              hift::LabelMaps maps = hift::make_labels(to_box(gt), geom, cfg.mode, seed, cfg);
              const int n = geom.locations();
              py::array_t<bool> cls1(n), keep(n);
              py::array_t<int> cls2(n);
              py::array_t<double> reg({n, 4});
              for (int r = 0; r < n; ++r) {
                  cls1.mutable_at(r) = maps.cls1_positive[static_cast<size_t>(r)] != 0;
                  keep.mutable_at(r) = maps.neg_keep[static_cast<size_t>(r)] != 0;
                  cls2.mutable_at(r) = static_cast<int>(maps.cls2[static_cast<size_t>(r)]);
                  for (int c = 0; c < 4; ++c)
                      reg.mutable_at(r, c) = maps.reg_targets[static_cast<size_t>(r)][static_cast<size_t>(c)];
              }
              py::dict out;
              out["cls1_positive"] = cls1;
              out["cls2"] = cls2; // 0 positive, 1 ignore, 2 negative-candidate
              out["reg_targets"] = reg;
              out["neg_keep"] = keep;
              return out;
          },
          py::arg("gt"), py::arg("width"), py::arg("height"), py::arg("stride"), py::arg("offset"),
          py::arg("mode") = "circular", py::arg("seed") = 0, py::arg("r_pos_strides") = 2.0,
          py::arg("r_ign_strides") = 4.0, py::arg("neg_cap_ratio") = 3.0, py::arg("neg_cap_floor") = 16,
          "Per-location classification labels and regression targets.");

    m.def("precision_plot",
          [](py::array_t<double, py::array::c_style> preds, py::array_t<double, py::array::c_style> gts) {
              hift::MetricCurve c = hift::precision_plot(to_boxes(preds), to_boxes(gts));
              return py::make_tuple(py::array(py::cast(c.thresholds)), py::array(py::cast(c.scores)));
          },
          py::arg("preds"), py::arg("gts"));
    m.def("success_plot",
          [](py::array_t<double, py::array::c_style> preds, py::array_t<double, py::array::c_style> gts) {
              hift::MetricCurve c = hift::success_plot(to_boxes(preds), to_boxes(gts));
              return py::make_tuple(py::array(py::cast(c.thresholds)), py::array(py::cast(c.scores)));
          },
          py::arg("preds"), py::arg("gts"));
    m.def("auc",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> thresholds,
             py::array_t<double, py::array::c_style | py::array::forcecast> scores) {
              hift::MetricCurve c;
              c.thresholds.assign(thresholds.data(), thresholds.data() + thresholds.size());
              c.scores.assign(scores.data(), scores.data() + scores.size());
              return hift::auc(c);
          },
          py::arg("thresholds"), py::arg("scores"));
    m.def("precision_at_20",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> thresholds,
             py::array_t<double, py::array::c_style | py::array::forcecast> scores) {
              hift::MetricCurve c;
              c.thresholds.assign(thresholds.data(), thresholds.data() + thresholds.size());
              c.scores.assign(scores.data(), scores.data() + scores.size());
              return hift::precision_at_20(c);
          },
          py::arg("thresholds"), py::arg("scores"));

    m.def("gen_sequence",
          [](int canvas_w, int canvas_h, int frames, bool color, double target_w, double target_h,
             double velocity_x, double velocity_y, double jitter, double scale_drift, bool occluder,
             std::uint64_t seed, const std::string& shape) {
              hift::SynthSequence seq = hift::gen_sequence(
                  synth_config_from_kwargs(canvas_w, canvas_h, frames, color, target_w, target_h,
                                           velocity_x, velocity_y, jitter, scale_drift, occluder, seed,
                                           shape));
              const int nc = seq.frames[0].channels;
              py::array_t<double> arr({static_cast<py::ssize_t>(seq.frames.size()),
                                       static_cast<py::ssize_t>(nc),
                                       static_cast<py::ssize_t>(canvas_h),
                                       static_cast<py::ssize_t>(canvas_w)});
              for (size_t f = 0; f < seq.frames.size(); ++f)
                  for (int c = 0; c < nc; ++c)
                      for (int y = 0; y < canvas_h; ++y)
                          for (int x = 0; x < canvas_w; ++x)
                              arr.mutable_at(static_cast<py::ssize_t>(f), c, y, x) =
                                  seq.frames[f].at(c, y, x);
              return py::make_tuple(arr, boxes_to_array(seq.gt));
          },
          py::arg("canvas_w") = 160, py::arg("canvas_h") = 120, py::arg("frames") = 30,
          py::arg("color") = false, py::arg("target_w") = 26.0, py::arg("target_h") = 20.0,
          py::arg("velocity_x") = 2.0, py::arg("velocity_y") = 1.0, py::arg("jitter") = 0.0,
          py::arg("scale_drift") = 0.0, py::arg("occluder") = false, py::arg("seed") = 1,
          py::arg("shape") = "rectangle",
          "Deterministic synthetic sequence; returns (frames (F,C,H,W), boxes (F,4) center form).");

    m.def("write_sequence_dir",
          [](const std::string& dir, py::array_t<double, py::array::c_style> frames,
             py::array_t<double, py::array::c_style> boxes) {
              hift::write_sequence_dir(dir, sequence_from_arrays(frames, boxes));
          },
          py::arg("dir"), py::arg("frames"), py::arg("boxes"),
          "Write frames + groundtruth.txt in the benchmark layout.");

    m.def("track_sequence",
          [](const std::string& config_path, const std::string& checkpoint_path,
             const std::string& sequence_dir) {
              hift::RunConfig cfg = config_path.empty() ? hift::RunConfig::defaults()
                                                        : hift::RunConfig::load(config_path);
              hift::SequenceData seq = hift::read_sequence_dir(sequence_dir);
              if (seq.gt.empty()) throw hift::ContractError("groundtruth.txt required for init");
              hift::Model model(cfg.model_config(), cfg.seed);
              hift::ParamRefs params = model.parameters();
              hift::load_checkpoint(checkpoint_path, params);
              std::vector<hift::Image> frames;
              for (const auto& p : seq.frame_paths) frames.push_back(hift::read_image(p));
              return boxes_to_array(
                  hift::track_sequence(model, cfg.tracker_config(), frames, seq.gt[0]));
          },
          py::arg("config_path"), py::arg("checkpoint_path"), py::arg("sequence_dir"),
          "Run OPE over a sequence directory; returns (F,4) center-form boxes.");
}
