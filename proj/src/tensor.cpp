#include "hift/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace hift {

int shape_size(const Shape& shape) {
    int n = 1;
    for (int e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
    for (int e : shape_) {
        if (e <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape_));
    }
    data_.assign(static_cast<size_t>(shape_size(shape_)), 0.0);
}

Tensor::Tensor(Shape shape, double fill) : Tensor(std::move(shape)) {
    std::fill(data_.begin(), data_.end(), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != static_cast<int>(data_.size())) {
        throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                         shape_str(shape_));
    }
}

int Tensor::rows() const {
    if (rank() != 2) throw ShapeError("rows(): expected rank-2, got " + shape_str(shape_));
    return shape_[0];
}

int Tensor::cols() const {
    if (rank() != 2) throw ShapeError("cols(): expected rank-2, got " + shape_str(shape_));
    return shape_[1];
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

double Tensor::item() const {
    if (size() != 1) throw ContractError("item(): tensor has " + std::to_string(size()) + " elements");
    return data_[0];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_size(shape) != size()) {
        throw ShapeError("reshape " + shape_str(shape_) + " -> " + shape_str(shape) + " changes size");
    }
    Tensor out;
    out.shape_ = std::move(shape);
    out.data_ = data_;
    return out;
}

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi) {
    Tensor t(std::move(shape));
    for (int i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

Tensor Tensor::normal(Shape shape, Rng& rng, double mean, double stddev) {
    Tensor t(std::move(shape));
    for (int i = 0; i < t.size(); ++i) t[i] = rng.normal(mean, stddev);
    return t;
}

Tensor& Node::ensure_grad() {
    if (grad.size() == 0) grad = Tensor(value.shape());
    return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

Var Var::from_node(std::shared_ptr<Node> n) {
    Var v;
    v.node_ = std::move(n);
    return v;
}

namespace {

std::shared_ptr<Node> make_op(Tensor value, std::vector<std::shared_ptr<Node>> parents,
                              std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    bool needs = false;
    for (const auto& p : parents) needs = needs || p->requires_grad;
    n->requires_grad = needs;
    if (needs) {
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    return n;
}

// numpy-style right-aligned broadcast
Shape broadcast_shape(const Shape& a, const Shape& b) {
    const size_t ra = a.size(), rb = b.size();
    const size_t r = std::max(ra, rb);
    Shape out(r);
    for (size_t i = 0; i < r; ++i) {
        const int ea = i < r - ra ? 1 : a[i - (r - ra)];
        const int eb = i < r - rb ? 1 : b[i - (r - rb)];
        if (ea != eb && ea != 1 && eb != 1) {
            throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        }
        out[i] = std::max(ea, eb);
    }
    return out;
}

// Row-major strides with 0 on broadcast (extent-1) axes, padded to out rank.
std::vector<int> broadcast_strides(const Shape& in, const Shape& out) {
    const size_t pad = out.size() - in.size();
    std::vector<int> strides(out.size(), 0);
    int s = 1;
    for (int i = static_cast<int>(in.size()) - 1; i >= 0; --i) {
        strides[pad + i] = (in[i] == 1 && out[pad + i] != 1) ? 0 : s;
        s *= in[i];
    }
    return strides;
}

template <typename F>
Tensor apply_broadcast(const Tensor& a, const Tensor& b, F op) {
    if (a.same_shape(b)) {
        Tensor out(a.shape());
        const int n = a.size();
        for (int i = 0; i < n; ++i) out[i] = op(a[i], b[i]);
        return out;
    }
    const Shape os = broadcast_shape(a.shape(), b.shape());
    Tensor out(os);
    const auto sa = broadcast_strides(a.shape(), os);
    const auto sb = broadcast_strides(b.shape(), os);
    const size_t r = os.size();
    std::vector<int> idx(r, 0);
    const int n = out.size();
    int ia = 0, ib = 0;
    for (int i = 0; i < n; ++i) {
        out[i] = op(a[ia], b[ib]);
        for (int d = static_cast<int>(r) - 1; d >= 0; --d) {
            idx[d]++;
            ia += sa[d];
            ib += sb[d];
            if (idx[d] < os[d]) break;
            ia -= sa[d] * os[d];
            ib -= sb[d] * os[d];
            idx[d] = 0;
        }
    }
    return out;
}

// Sum g over its broadcast axes so the result has `target` shape, accumulate into acc.
void accumulate_reduced(Tensor& acc, const Tensor& g, const Shape& target) {
    if (g.shape() == target) {
        for (int i = 0; i < g.size(); ++i) acc[i] += g[i];
        return;
    }
    const Shape& os = g.shape();
    const auto st = broadcast_strides(target, os);
    const size_t r = os.size();
    std::vector<int> idx(r, 0);
    int it = 0;
    const int n = g.size();
    for (int i = 0; i < n; ++i) {
        acc[it] += g[i];
        for (int d = static_cast<int>(r) - 1; d >= 0; --d) {
            idx[d]++;
            it += st[d];
            if (idx[d] < os[d]) break;
            it -= st[d] * os[d];
            idx[d] = 0;
        }
    }
}

template <typename FwdOp, typename DaOp, typename DbOp>
Var binary_op(const Var& a, const Var& b, FwdOp fwd, DaOp da, DbOp db) {
    Tensor value = apply_broadcast(a.value(), b.value(), fwd);
    auto an = a.node();
    auto bn = b.node();
    return Var::from_node(make_op(std::move(value), {an, bn}, [an, bn, da, db](Node& self) {
        // grads are formed at the broadcast output shape, then reduced
        const Shape os = self.value.shape();
        if (an->requires_grad) {
            Tensor ga(os);
            const Tensor dval = apply_broadcast(an->value, bn->value, da);
            for (int i = 0; i < ga.size(); ++i) ga[i] = self.grad[i] * dval[i];
            accumulate_reduced(an->ensure_grad(), ga, an->value.shape());
        }
        if (bn->requires_grad) {
            Tensor gb(os);
            const Tensor dval = apply_broadcast(an->value, bn->value, db);
            for (int i = 0; i < gb.size(); ++i) gb[i] = self.grad[i] * dval[i];
            accumulate_reduced(bn->ensure_grad(), gb, bn->value.shape());
        }
    }));
}

template <typename FwdOp, typename DOp>
Var unary_op(const Var& x, FwdOp fwd, DOp dop) {
    const Tensor& xv = x.value();
    Tensor value(xv.shape());
    for (int i = 0; i < xv.size(); ++i) value[i] = fwd(xv[i]);
    auto xn = x.node();
    return Var::from_node(make_op(std::move(value), {xn}, [xn, dop](Node& self) {
        Tensor& gx = xn->ensure_grad();
        for (int i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * dop(xn->value[i], self.value[i]);
    }));
}

} // namespace

Var add(const Var& a, const Var& b) {
    return binary_op(
        a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
    return binary_op(
        a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
    return binary_op(
        a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Var divide(const Var& a, const Var& b) {
    return binary_op(
        a, b, [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

// Ties route to the left operand so the subgradient choice is fixed.
Var minimum(const Var& a, const Var& b) {
    return binary_op(
        a, b, [](double x, double y) { return x <= y ? x : y; },
        [](double x, double y) { return x <= y ? 1.0 : 0.0; },
        [](double x, double y) { return x <= y ? 0.0 : 1.0; });
}

Var maximum(const Var& a, const Var& b) {
    return binary_op(
        a, b, [](double x, double y) { return x >= y ? x : y; },
        [](double x, double y) { return x >= y ? 1.0 : 0.0; },
        [](double x, double y) { return x >= y ? 0.0 : 1.0; });
}

Var neg(const Var& x) {
    return unary_op(x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Var scale(const Var& x, double s) {
    return unary_op(x, [s](double v) { return v * s; }, [s](double, double) { return s; });
}

Var add_const(const Var& x, double c) {
    return unary_op(x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Var relu(const Var& x) {
    return unary_op(x, [](double v) { return v > 0.0 ? v : 0.0; },
                    [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var vexp(const Var& x) {
    return unary_op(x, [](double v) { return std::exp(v); }, [](double, double out) { return out; });
}

Var vlog(const Var& x) {
    return unary_op(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var sigmoid(const Var& x) {
    return unary_op(x, [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                                      : std::exp(v) / (1.0 + std::exp(v)); },
                    [](double, double out) { return out * (1.0 - out); });
}

Var matmul(const Var& a, const Var& b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rank() != 2 || bv.rank() != 2) {
        throw ShapeError("matmul expects rank-2 operands, got " + shape_str(av.shape()) + " and " +
                         shape_str(bv.shape()));
    }
    if (av.cols() != bv.rows()) {
        throw ShapeError("matmul inner extents differ: " + shape_str(av.shape()) + " x " +
                         shape_str(bv.shape()));
    }
    const int m = av.rows(), k = av.cols(), n = bv.cols();
    Tensor out({m, n});
    const double* A = av.data();
    const double* B = bv.data();
    double* O = out.data();
    for (int i = 0; i < m; ++i) {
        const double* arow = A + static_cast<size_t>(i) * k;
        double* orow = O + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av_ip = arow[p];
            if (av_ip == 0.0) continue;
            const double* brow = B + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) orow[j] += av_ip * brow[j];
        }
    }
    auto an = a.node();
    auto bn = b.node();
    return Var::from_node(make_op(std::move(out), {an, bn}, [an, bn, m, k, n](Node& self) {
        const double* G = self.grad.data();
        if (an->requires_grad) {
            double* GA = an->ensure_grad().data();
            const double* B = bn->value.data();
            for (int i = 0; i < m; ++i)
                for (int p = 0; p < k; ++p) {
                    double s = 0.0;
                    const double* grow = G + static_cast<size_t>(i) * n;
                    const double* brow = B + static_cast<size_t>(p) * n;
                    for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
                    GA[static_cast<size_t>(i) * k + p] += s;
                }
        }
        if (bn->requires_grad) {
            double* GB = bn->ensure_grad().data();
            const double* A = an->value.data();
            for (int p = 0; p < k; ++p) {
                double* gbrow = GB + static_cast<size_t>(p) * n;
                for (int i = 0; i < m; ++i) {
                    const double a_ip = A[static_cast<size_t>(i) * k + p];
                    if (a_ip == 0.0) continue;
                    const double* grow = G + static_cast<size_t>(i) * n;
                    for (int j = 0; j < n; ++j) gbrow[j] += a_ip * grow[j];
                }
            }
        }
    }));
}

Var transpose2d(const Var& x) {
    const Tensor& xv = x.value();
    if (xv.rank() != 2) throw ShapeError("transpose2d expects rank-2, got " + shape_str(xv.shape()));
    const int r = xv.rows(), c = xv.cols();
    Tensor out({c, r});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out.at2(j, i) = xv.at2(i, j);
    auto xn = x.node();
    return Var::from_node(make_op(std::move(out), {xn}, [xn, r, c](Node& self) {
        Tensor& gx = xn->ensure_grad();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) gx.at2(i, j) += self.grad.at2(j, i);
    }));
}

Var reshape(const Var& x, Shape shape) {
    Tensor out = x.value().reshaped(std::move(shape));
    auto xn = x.node();
    return Var::from_node(make_op(std::move(out), {xn}, [xn](Node& self) {
        Tensor& gx = xn->ensure_grad();
        for (int i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
    }));
}

Var concat(const std::vector<Var>& xs, int axis) {
    if (xs.empty()) throw ContractError("concat of zero tensors");
    if (axis != 0 && axis != 1) throw ShapeError("concat supports axis 0 or 1");
    const int fixed = axis == 0 ? 1 : 0;
    int total = 0;
    for (const Var& v : xs) {
        if (v.value().rank() != 2) throw ShapeError("concat expects rank-2 inputs");
        if (v.value().extent(fixed) != xs[0].value().extent(fixed)) {
            throw ShapeError("concat inputs disagree on non-concat extent");
        }
        total += v.value().extent(axis);
    }
    Shape os = xs[0].value().shape();
    os[static_cast<size_t>(axis)] = total;
    Tensor out(os);
    std::vector<std::shared_ptr<Node>> parents;
    std::vector<int> offsets;
    int off = 0;
    for (const Var& v : xs) {
        const Tensor& t = v.value();
        offsets.push_back(off);
        if (axis == 0) {
            std::copy(t.data(), t.data() + t.size(), out.data() + static_cast<size_t>(off) * os[1]);
        } else {
            for (int i = 0; i < t.rows(); ++i)
                for (int j = 0; j < t.cols(); ++j) out.at2(i, off + j) = t.at2(i, j);
        }
        off += t.extent(axis);
        parents.push_back(v.node());
    }
    auto ps = parents;
    return Var::from_node(make_op(std::move(out), std::move(parents), [ps, offsets, axis](Node& self) {
        for (size_t s = 0; s < ps.size(); ++s) {
            if (!ps[s]->requires_grad) continue;
            Tensor& gx = ps[s]->ensure_grad();
            const int off = offsets[s];
            if (axis == 0) {
                const int w = gx.cols();
                for (int i = 0; i < gx.rows(); ++i)
                    for (int j = 0; j < w; ++j) gx.at2(i, j) += self.grad.at2(off + i, j);
            } else {
                for (int i = 0; i < gx.rows(); ++i)
                    for (int j = 0; j < gx.cols(); ++j) gx.at2(i, j) += self.grad.at2(i, off + j);
            }
        }
    }));
}

Var gather_rows(const Var& x, std::vector<int> rows) {
    const Tensor& xv = x.value();
    if (xv.rank() != 2) throw ShapeError("gather_rows expects rank-2");
    const int c = xv.cols();
    for (int r : rows) {
        if (r < 0 || r >= xv.rows()) throw ContractError("gather_rows index out of range");
    }
    Tensor out({static_cast<int>(rows.size()), c});
    for (size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < c; ++j) out.at2(static_cast<int>(i), j) = xv.at2(rows[i], j);
    auto xn = x.node();
    return Var::from_node(make_op(std::move(out), {xn}, [xn, rows, c](Node& self) {
        Tensor& gx = xn->ensure_grad();
        for (size_t i = 0; i < rows.size(); ++i)
            for (int j = 0; j < c; ++j) gx.at2(rows[i], j) += self.grad.at2(static_cast<int>(i), j);
    }));
}

Var slice_cols(const Var& x, int c0, int c1) {
    const Tensor& xv = x.value();
    if (xv.rank() != 2) throw ShapeError("slice_cols expects rank-2");
    if (c0 < 0 || c1 > xv.cols() || c0 >= c1) throw ContractError("slice_cols bad range");
    const int r = xv.rows(), w = c1 - c0;
    Tensor out({r, w});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < w; ++j) out.at2(i, j) = xv.at2(i, c0 + j);
    auto xn = x.node();
    return Var::from_node(make_op(std::move(out), {xn}, [xn, c0, r, w](Node& self) {
        Tensor& gx = xn->ensure_grad();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < w; ++j) gx.at2(i, c0 + j) += self.grad.at2(i, j);
    }));
}

Var sum_all(const Var& x) {
    double s = 0.0;
    for (int i = 0; i < x.value().size(); ++i) s += x.value()[i];
    auto xn = x.node();
    return Var::from_node(make_op(Tensor({1}, {s}), {xn}, [xn](Node& self) {
        Tensor& gx = xn->ensure_grad();
        const double g = self.grad[0];
        for (int i = 0; i < gx.size(); ++i) gx[i] += g;
    }));
}

Var mean_all(const Var& x) {
    const int n = x.value().size();
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += x.value()[i];
    auto xn = x.node();
    return Var::from_node(make_op(Tensor({1}, {s / n}), {xn}, [xn, n](Node& self) {
        Tensor& gx = xn->ensure_grad();
        const double g = self.grad[0] / n;
        for (int i = 0; i < gx.size(); ++i) gx[i] += g;
    }));
}

Var mean_rows(const Var& x) {
    const Tensor& xv = x.value();
    if (xv.rank() != 2) throw ShapeError("mean_rows expects rank-2");
    const int r = xv.rows(), c = xv.cols();
    Tensor out({1, c});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out[j] += xv.at2(i, j);
    for (int j = 0; j < c; ++j) out[j] /= r;
    auto xn = x.node();
    return Var::from_node(make_op(std::move(out), {xn}, [xn, r, c](Node& self) {
        Tensor& gx = xn->ensure_grad();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) gx.at2(i, j) += self.grad[j] / r;
    }));
}

Var softmax_rows(const Var& x) {
    const Tensor& xv = x.value();
    if (xv.rank() != 2) throw ShapeError("softmax_rows expects rank-2, got " + shape_str(xv.shape()));
    const int r = xv.rows(), c = xv.cols();
    Tensor out({r, c});
    for (int i = 0; i < r; ++i) {
        double mx = xv.at2(i, 0);
        for (int j = 1; j < c; ++j) mx = std::max(mx, xv.at2(i, j));
        double denom = 0.0;
        for (int j = 0; j < c; ++j) {
            const double e = std::exp(xv.at2(i, j) - mx);
            out.at2(i, j) = e;
            denom += e;
        }
        for (int j = 0; j < c; ++j) out.at2(i, j) /= denom;
    }
    auto xn = x.node();
    return Var::from_node(make_op(std::move(out), {xn}, [xn, r, c](Node& self) {
        Tensor& gx = xn->ensure_grad();
        for (int i = 0; i < r; ++i) {
            double dot = 0.0;
            for (int j = 0; j < c; ++j) dot += self.grad.at2(i, j) * self.value.at2(i, j);
            for (int j = 0; j < c; ++j)
                gx.at2(i, j) += self.value.at2(i, j) * (self.grad.at2(i, j) - dot);
        }
    }));
}

Var log_softmax_rows(const Var& x) {
    const Tensor& xv = x.value();
    if (xv.rank() != 2) throw ShapeError("log_softmax_rows expects rank-2");
    const int r = xv.rows(), c = xv.cols();
    Tensor out({r, c});
    for (int i = 0; i < r; ++i) {
        double mx = xv.at2(i, 0);
        for (int j = 1; j < c; ++j) mx = std::max(mx, xv.at2(i, j));
        double denom = 0.0;
        for (int j = 0; j < c; ++j) denom += std::exp(xv.at2(i, j) - mx);
        const double lse = mx + std::log(denom);
        for (int j = 0; j < c; ++j) out.at2(i, j) = xv.at2(i, j) - lse;
    }
    auto xn = x.node();
    return Var::from_node(make_op(std::move(out), {xn}, [xn, r, c](Node& self) {
        Tensor& gx = xn->ensure_grad();
        for (int i = 0; i < r; ++i) {
            double gsum = 0.0;
            for (int j = 0; j < c; ++j) gsum += self.grad.at2(i, j);
            for (int j = 0; j < c; ++j)
                gx.at2(i, j) += self.grad.at2(i, j) - std::exp(self.value.at2(i, j)) * gsum;
        }
    }));
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias) {
    constexpr double kEps = 1e-5;
    const Tensor& xv = x.value();
    if (xv.rank() != 2) throw ShapeError("layer_norm expects rank-2, got " + shape_str(xv.shape()));
    const int r = xv.rows(), c = xv.cols();
    if (gain.value().size() != c || bias.value().size() != c) {
        throw ShapeError("layer_norm gain/bias length must equal row width " + std::to_string(c));
    }
    Tensor out({r, c});
    Tensor norm({r, c}); // pre-affine, kept for backward
    std::vector<double> inv_sigma(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) {
        double mean = 0.0;
        for (int j = 0; j < c; ++j) mean += xv.at2(i, j);
        mean /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) {
            const double d = xv.at2(i, j) - mean;
            var += d * d;
        }
        var /= c;
        const double is = 1.0 / std::sqrt(var + kEps);
        inv_sigma[static_cast<size_t>(i)] = is;
        for (int j = 0; j < c; ++j) {
            const double y = (xv.at2(i, j) - mean) * is;
            norm.at2(i, j) = y;
            out.at2(i, j) = y * gain.value()[j] + bias.value()[j];
        }
    }
    auto xn = x.node();
    auto gn = gain.node();
    auto bn = bias.node();
    return Var::from_node(make_op(
        std::move(out), {xn, gn, bn},
        [xn, gn, bn, norm = std::move(norm), inv_sigma = std::move(inv_sigma), r, c](Node& self) {
            if (gn->requires_grad) {
                Tensor& gg = gn->ensure_grad();
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j) gg[j] += self.grad.at2(i, j) * norm.at2(i, j);
            }
            if (bn->requires_grad) {
                Tensor& gb = bn->ensure_grad();
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j) gb[j] += self.grad.at2(i, j);
            }
            if (xn->requires_grad) {
                Tensor& gx = xn->ensure_grad();
                for (int i = 0; i < r; ++i) {
                    double mean_dy = 0.0, mean_dyy = 0.0;
                    for (int j = 0; j < c; ++j) {
                        const double dy = self.grad.at2(i, j) * gn->value[j];
                        mean_dy += dy;
                        mean_dyy += dy * norm.at2(i, j);
                    }
                    mean_dy /= c;
                    mean_dyy /= c;
                    for (int j = 0; j < c; ++j) {
                        const double dy = self.grad.at2(i, j) * gn->value[j];
                        gx.at2(i, j) +=
                            inv_sigma[static_cast<size_t>(i)] * (dy - mean_dy - norm.at2(i, j) * mean_dyy);
                    }
                }
            }
        }));
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int padding) {
    const Tensor& xv = x.value();
    const Tensor& wv = weight.value();
    const Tensor& bv = bias.value();
    if (xv.rank() != 4 || wv.rank() != 4) {
        throw ShapeError("conv2d expects NCHW input and OIKK weight, got " + shape_str(xv.shape()) +
                         " and " + shape_str(wv.shape()));
    }
    if (stride < 1) throw ContractError("conv2d stride must be >= 1");
    const int N = xv.extent(0), Ci = xv.extent(1), H = xv.extent(2), W = xv.extent(3);
    const int Co = wv.extent(0), kh = wv.extent(2), kw = wv.extent(3);
    if (wv.extent(1) != Ci) {
        throw ShapeError("conv2d channel mismatch: input has " + std::to_string(Ci) +
                         ", weight expects " + std::to_string(wv.extent(1)));
    }
    if (bv.size() != Co) throw ShapeError("conv2d bias length must equal output channels");
    const int Ho = (H + 2 * padding - kh) / stride + 1;
    const int Wo = (W + 2 * padding - kw) / stride + 1;
    if (Ho <= 0 || Wo <= 0) throw ShapeError("conv2d kernel larger than padded input");

    Tensor out({N, Co, Ho, Wo});
    for (int n = 0; n < N; ++n) {
        for (int co = 0; co < Co; ++co) {
            for (int oy = 0; oy < Ho; ++oy) {
                for (int ox = 0; ox < Wo; ++ox) {
                    double s = bv[co];
                    const int y0 = oy * stride - padding;
                    const int x0 = ox * stride - padding;
                    for (int ci = 0; ci < Ci; ++ci) {
                        for (int ky = 0; ky < kh; ++ky) {
                            const int y = y0 + ky;
                            if (y < 0 || y >= H) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                const int xx = x0 + kx;
                                if (xx < 0 || xx >= W) continue;
                                s += xv.at4(n, ci, y, xx) * wv.at4(co, ci, ky, kx);
                            }
                        }
                    }
                    out.at4(n, co, oy, ox) = s;
                }
            }
        }
    }
    auto xn = x.node();
    auto wn = weight.node();
    auto bn = bias.node();
    return Var::from_node(make_op(
        std::move(out), {xn, wn, bn}, [xn, wn, bn, stride, padding, N, Ci, H, W, Co, kh, kw, Ho, Wo](Node& self) {
            const Tensor& g = self.grad;
            if (bn->requires_grad) {
                Tensor& gb = bn->ensure_grad();
                for (int n = 0; n < N; ++n)
                    for (int co = 0; co < Co; ++co)
                        for (int oy = 0; oy < Ho; ++oy)
                            for (int ox = 0; ox < Wo; ++ox) gb[co] += g.at4(n, co, oy, ox);
            }
            const bool need_x = xn->requires_grad;
            const bool need_w = wn->requires_grad;
            if (!need_x && !need_w) return;
            Tensor* gx = need_x ? &xn->ensure_grad() : nullptr;
            Tensor* gw = need_w ? &wn->ensure_grad() : nullptr;
            for (int n = 0; n < N; ++n) {
                for (int co = 0; co < Co; ++co) {
                    for (int oy = 0; oy < Ho; ++oy) {
                        for (int ox = 0; ox < Wo; ++ox) {
                            const double go = g.at4(n, co, oy, ox);
                            if (go == 0.0) continue;
                            const int y0 = oy * stride - padding;
                            const int x0 = ox * stride - padding;
                            for (int ci = 0; ci < Ci; ++ci) {
                                for (int ky = 0; ky < kh; ++ky) {
                                    const int y = y0 + ky;
                                    if (y < 0 || y >= H) continue;
                                    for (int kx = 0; kx < kw; ++kx) {
                                        const int xx = x0 + kx;
                                        if (xx < 0 || xx >= W) continue;
                                        if (need_w)
                                            gw->at4(co, ci, ky, kx) += go * xn->value.at4(n, ci, y, xx);
                                        if (need_x)
                                            gx->at4(n, ci, y, xx) += go * wn->value.at4(co, ci, ky, kx);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }));
}

Var xcorr_depthwise(const Var& templ, const Var& search) {
    const Tensor& tv = templ.value();
    const Tensor& sv = search.value();
    if (tv.rank() != 3 || sv.rank() != 3) throw ShapeError("xcorr_depthwise expects rank-3 CHW inputs");
    const int C = tv.extent(0), th = tv.extent(1), tw = tv.extent(2);
    if (sv.extent(0) != C) throw ShapeError("xcorr_depthwise channel mismatch");
    const int sh = sv.extent(1), sw = sv.extent(2);
    if (th > sh || tw > sw) {
        throw ShapeError("xcorr template " + shape_str(tv.shape()) + " larger than search " +
                         shape_str(sv.shape()));
    }
    const int Ho = sh - th + 1, Wo = sw - tw + 1;
    Tensor out({C, Ho, Wo});
    auto sidx = [sh, sw](int c, int y, int x) { return (static_cast<size_t>(c) * sh + y) * sw + x; };
    auto tidx = [th, tw](int c, int y, int x) { return (static_cast<size_t>(c) * th + y) * tw + x; };
    for (int c = 0; c < C; ++c) {
        for (int oy = 0; oy < Ho; ++oy) {
            for (int ox = 0; ox < Wo; ++ox) {
                double s = 0.0;
                for (int ky = 0; ky < th; ++ky)
                    for (int kx = 0; kx < tw; ++kx)
                        s += tv.data()[tidx(c, ky, kx)] * sv.data()[sidx(c, oy + ky, ox + kx)];
                out.data()[(static_cast<size_t>(c) * Ho + oy) * Wo + ox] = s;
            }
        }
    }
    auto tn = templ.node();
    auto sn = search.node();
    return Var::from_node(
        make_op(std::move(out), {tn, sn}, [tn, sn, C, th, tw, sh, sw, Ho, Wo](Node& self) {
            auto sidx = [sh, sw](int c, int y, int x) { return (static_cast<size_t>(c) * sh + y) * sw + x; };
            auto tidx = [th, tw](int c, int y, int x) { return (static_cast<size_t>(c) * th + y) * tw + x; };
            const Tensor& g = self.grad;
            const bool need_t = tn->requires_grad;
            const bool need_s = sn->requires_grad;
            Tensor* gt = need_t ? &tn->ensure_grad() : nullptr;
            Tensor* gs = need_s ? &sn->ensure_grad() : nullptr;
            for (int c = 0; c < C; ++c) {
                for (int oy = 0; oy < Ho; ++oy) {
                    for (int ox = 0; ox < Wo; ++ox) {
                        const double go = g.data()[(static_cast<size_t>(c) * Ho + oy) * Wo + ox];
                        if (go == 0.0) continue;
                        for (int ky = 0; ky < th; ++ky) {
                            for (int kx = 0; kx < tw; ++kx) {
                                if (need_t)
                                    gt->data()[tidx(c, ky, kx)] +=
                                        go * sn->value.data()[sidx(c, oy + ky, ox + kx)];
                                if (need_s)
                                    gs->data()[sidx(c, oy + ky, ox + kx)] +=
                                        go * tn->value.data()[tidx(c, ky, kx)];
                            }
                        }
                    }
                }
            }
        }));
}

Var bce_with_logits(const Var& logits, const Tensor& targets) {
    const Tensor& zv = logits.value();
    if (!zv.same_shape(targets)) throw ShapeError("bce_with_logits target shape mismatch");
    Tensor out(zv.shape());
    for (int i = 0; i < zv.size(); ++i) {
        const double z = zv[i], y = targets[i];
        // max(z,0) - z*y + log(1 + exp(-|z|))
        out[i] = std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    }
    auto zn = logits.node();
    return Var::from_node(make_op(std::move(out), {zn}, [zn, targets](Node& self) {
        Tensor& gz = zn->ensure_grad();
        for (int i = 0; i < gz.size(); ++i) {
            const double z = zn->value[i];
            const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
            gz[i] += self.grad[i] * (s - targets[i]);
        }
    }));
}

void backward(const Var& loss) {
    if (!loss.defined()) throw ContractError("backward on empty Var");
    if (loss.value().size() != 1) {
        throw ContractError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
    }
    // iterative post-order topo sort (graphs can be deep)
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [n, i] = stack.back();
        if (i < n->parents.size()) {
            Node* p = n->parents[i++].get();
            if (!visited.count(p) && p->requires_grad) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    loss.node()->ensure_grad().fill(1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && n->grad.size() != 0) n->backprop(*n);
    }
}

} // namespace hift
