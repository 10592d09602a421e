#pragma once

// Brute-force reference implementations used as test oracles. Everything here
// works on plain vectors/loops and stays independent of the library's tape.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "hift/geometry.hpp"
#include "hift/heads.hpp"
#include "hift/rng.hpp"
#include "hift/tensor.hpp"

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat zeros(int r, int c) { return Mat(static_cast<size_t>(r), std::vector<double>(c, 0.0)); }

inline Mat from_tensor(const hift::Tensor& t) {
    Mat m = zeros(t.rows(), t.cols());
    for (int i = 0; i < t.rows(); ++i)
        for (int j = 0; j < t.cols(); ++j) m[i][j] = t.at2(i, j);
    return m;
}

inline hift::Tensor to_tensor(const Mat& m) {
    hift::Tensor t({static_cast<int>(m.size()), static_cast<int>(m[0].size())});
    for (size_t i = 0; i < m.size(); ++i)
        for (size_t j = 0; j < m[0].size(); ++j) t.at2(static_cast<int>(i), static_cast<int>(j)) = m[i][j];
    return t;
}

inline Mat matmul(const Mat& a, const Mat& b) {
    Mat out = zeros(static_cast<int>(a.size()), static_cast<int>(b[0].size()));
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t k = 0; k < b.size(); ++k)
            for (size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
    return out;
}

inline Mat add(const Mat& a, const Mat& b) {
    Mat out = a;
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < a[0].size(); ++j) out[i][j] += b[i][j];
    return out;
}

inline Mat transpose(const Mat& a) {
    Mat out = zeros(static_cast<int>(a[0].size()), static_cast<int>(a.size()));
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < a[0].size(); ++j) out[j][i] = a[i][j];
    return out;
}

inline std::vector<double> softmax(const std::vector<double>& row) {
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double den = 0.0;
    std::vector<double> out(row.size());
    for (size_t j = 0; j < row.size(); ++j) {
        out[j] = std::exp(row[j] - mx);
        den += out[j];
    }
    for (double& v : out) v /= den;
    return out;
}

// Softmax(Q K^T / sqrt(c)) V by scalar loops, c = Q width.
inline Mat attention(const Mat& q, const Mat& k, const Mat& v) {
    const double c = static_cast<double>(q[0].size());
    Mat out = zeros(static_cast<int>(q.size()), static_cast<int>(v[0].size()));
    for (size_t i = 0; i < q.size(); ++i) {
        std::vector<double> scores(k.size(), 0.0);
        for (size_t j = 0; j < k.size(); ++j) {
            for (size_t d = 0; d < q[0].size(); ++d) scores[j] += q[i][d] * k[j][d];
            scores[j] /= std::sqrt(c);
        }
        const std::vector<double> w = softmax(scores);
        for (size_t j = 0; j < k.size(); ++j)
            for (size_t d = 0; d < v[0].size(); ++d) out[i][d] += w[j] * v[j][d];
    }
    return out;
}

// layer norm with eps 1e-5, population variance, per-row
inline Mat layer_norm(const Mat& x, const std::vector<double>& gain, const std::vector<double>& bias) {
    Mat out = zeros(static_cast<int>(x.size()), static_cast<int>(x[0].size()));
    const double n = static_cast<double>(x[0].size());
    for (size_t i = 0; i < x.size(); ++i) {
        double mu = 0.0;
        for (double v : x[i]) mu += v;
        mu /= n;
        double var = 0.0;
        for (double v : x[i]) var += (v - mu) * (v - mu);
        var /= n;
        const double den = std::sqrt(var + 1e-5);
        for (size_t j = 0; j < x[i].size(); ++j) out[i][j] = (x[i][j] - mu) / den * gain[j] + bias[j];
    }
    return out;
}

inline Mat relu(const Mat& x) {
    Mat out = x;
    for (auto& row : out)
        for (double& v : row) v = v > 0.0 ? v : 0.0;
    return out;
}

// quadruple-loop convolution, NCHW x OIKK
inline hift::Tensor conv2d(const hift::Tensor& x, const hift::Tensor& w, const hift::Tensor& b,
                           int stride, int pad) {
    const int N = x.extent(0), Ci = x.extent(1), H = x.extent(2), W = x.extent(3);
    const int Co = w.extent(0), kh = w.extent(2), kw = w.extent(3);
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    hift::Tensor out({N, Co, Ho, Wo});
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Co; ++co)
            for (int oy = 0; oy < Ho; ++oy)
                for (int ox = 0; ox < Wo; ++ox) {
                    double s = b[co];
                    for (int ci = 0; ci < Ci; ++ci)
                        for (int ky = 0; ky < kh; ++ky)
                            for (int kx = 0; kx < kw; ++kx) {
                                const int y = oy * stride - pad + ky;
                                const int xx = ox * stride - pad + kx;
                                if (y < 0 || y >= H || xx < 0 || xx >= W) continue;
                                s += x.at4(n, ci, y, xx) * w.at4(co, ci, ky, kx);
                            }
                    out.at4(n, co, oy, ox) = s;
                }
    return out;
}

// sliding-window depthwise correlation, CHW
inline hift::Tensor xcorr(const hift::Tensor& t, const hift::Tensor& s) {
    const int C = t.extent(0), th = t.extent(1), tw = t.extent(2);
    const int sh = s.extent(1), sw = s.extent(2);
    const int Ho = sh - th + 1, Wo = sw - tw + 1;
    hift::Tensor out({C, Ho, Wo});
    for (int c = 0; c < C; ++c)
        for (int oy = 0; oy < Ho; ++oy)
            for (int ox = 0; ox < Wo; ++ox) {
                double acc = 0.0;
                for (int ky = 0; ky < th; ++ky)
                    for (int kx = 0; kx < tw; ++kx)
                        acc += t[(c * th + ky) * tw + kx] * s[(c * sh + oy + ky) * sw + ox + kx];
                out[(c * Ho + oy) * Wo + ox] = acc;
            }
    return out;
}

// per-location label oracle, straight from the definitions
struct LabelOracle {
    std::vector<bool> cls1;
    std::vector<int> cls2; // 0 pos, 1 ignore, 2 negative-candidate
    std::vector<std::array<double, 4>> reg;
    std::vector<bool> keep;
};

inline LabelOracle label_oracle(const hift::BBox& gt, const hift::MapGeometry& geom,
                                hift::LabelMode mode, std::uint64_t seed, const hift::LabelConfig& cfg) {
    const int n = geom.width * geom.height;
    LabelOracle out;
    out.cls1.assign(static_cast<size_t>(n), false);
    out.cls2.assign(static_cast<size_t>(n), 2);
    out.reg.assign(static_cast<size_t>(n), {});
    out.keep.assign(static_cast<size_t>(n), false);
    const double r_pos = std::min(cfg.r_pos_strides * geom.stride, std::min(gt.w, gt.h) / 2.0);
    const double r_ign = cfg.r_ign_strides * geom.stride;
    int npos2 = 0;
    std::vector<int> candidates;
    for (int row = 0; row < n; ++row) {
        const double px = (row % geom.width + 0.5) * geom.stride + geom.offset;
        const double py = (row / geom.width + 0.5) * geom.stride + geom.offset;
        const bool in_box = px >= gt.cx - gt.w / 2 && px <= gt.cx + gt.w / 2 && py >= gt.cy - gt.h / 2 &&
                            py <= gt.cy + gt.h / 2;
        out.cls1[static_cast<size_t>(row)] = in_box;
        out.reg[static_cast<size_t>(row)] = {px - (gt.cx - gt.w / 2), py - (gt.cy - gt.h / 2),
                                             (gt.cx + gt.w / 2) - px, (gt.cy + gt.h / 2) - py};
        int label2;
        if (mode == hift::LabelMode::kCircular) {
            const double d = std::sqrt((px - gt.cx) * (px - gt.cx) + (py - gt.cy) * (py - gt.cy));
            label2 = d <= r_pos ? 0 : (d <= r_ign ? 1 : 2);
        } else {
            label2 = in_box ? 0 : 2;
        }
        out.cls2[static_cast<size_t>(row)] = label2;
        if (label2 == 0) ++npos2;
        if (label2 == 2 && !in_box) candidates.push_back(row);
    }
    const int cap =
        std::max(cfg.neg_cap_floor, static_cast<int>(std::llround(cfg.neg_cap_ratio * npos2)));
    if (static_cast<int>(candidates.size()) <= cap) {
        for (int r : candidates) out.keep[static_cast<size_t>(r)] = true;
    } else {
        hift::Rng rng(seed);
        for (int i : rng.sample_without_replacement(static_cast<int>(candidates.size()), cap)) {
            out.keep[static_cast<size_t>(candidates[static_cast<size_t>(i)])] = true;
        }
    }
    return out;
}

inline std::map<std::string, const hift::Tensor*> param_map(const hift::ParamRefs& params) {
    std::map<std::string, const hift::Tensor*> out;
    for (const hift::Parameter* p : params) out[p->name] = &p->value();
    return out;
}

// central finite difference of f at x[idx]
template <typename F>
double fd(F&& f, double& slot, double h = 1e-6) {
    const double saved = slot;
    slot = saved + h;
    const double up = f();
    slot = saved - h;
    const double down = f();
    slot = saved;
    return (up - down) / (2.0 * h);
}

} // namespace oracle
