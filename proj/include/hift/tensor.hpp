#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hift/errors.hpp"
#include "hift/rng.hpp"

namespace hift {

using Shape = std::vector<int>;

int shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor of doubles. Values only; differentiation lives in Var.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);
    Tensor(Shape shape, double fill);
    Tensor(Shape shape, std::vector<double> data);

    int size() const { return static_cast<int>(data_.size()); }
    int rank() const { return static_cast<int>(shape_.size()); }
    const Shape& shape() const { return shape_; }
    int extent(int d) const { return shape_[static_cast<size_t>(d)]; }

    // rank-2 helpers
    int rows() const;
    int cols() const;
    double& at2(int r, int c) { return data_[static_cast<size_t>(r) * shape_[1] + c]; }
    double at2(int r, int c) const { return data_[static_cast<size_t>(r) * shape_[1] + c]; }

    // NCHW helper
    double& at4(int n, int c, int y, int x) {
        return data_[((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }
    double at4(int n, int c, int y, int x) const {
        return data_[((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](int i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int i) const { return data_[static_cast<size_t>(i)]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    double item() const; // single-element tensors only

    void fill(double v);
    Tensor reshaped(Shape shape) const;

    static Tensor uniform(Shape shape, Rng& rng, double lo, double hi);
    static Tensor normal(Shape shape, Rng& rng, double mean, double stddev);

private:
    Shape shape_;
    std::vector<double> data_;
};

// One recorded node of the reverse-mode tape.
struct Node {
    Tensor value;
    Tensor grad; // allocated on demand, same shape as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Pulls this node's grad into the parents' grads.
    std::function<void(Node&)> backprop;

    Tensor& ensure_grad();
};

// Value-semantic handle to a graph node. Cheap to copy.
class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(node_); }
    const Tensor& value() const { return node_->value; }
    Tensor& mutable_value() { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    Tensor& grad() const { return node_->ensure_grad(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    const std::shared_ptr<Node>& node() const { return node_; }

    static Var from_node(std::shared_ptr<Node> n);

private:
    std::shared_ptr<Node> node_;
};

// Named trainable leaf.
struct Parameter {
    std::string name;
    Var var;
    bool trainable = true;

    Parameter() = default;
    Parameter(std::string n, Tensor value, bool train = true)
        : name(std::move(n)), var(std::move(value), true), trainable(train) {}

    Tensor& value() { return var.mutable_value(); }
    const Tensor& value() const { return var.value(); }
    Tensor& grad() { return var.grad(); }
    void zero_grad() { var.grad().fill(0.0); }
};

using ParamRefs = std::vector<Parameter*>;

// ---- graph construction ----

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var divide(const Var& a, const Var& b);
Var minimum(const Var& a, const Var& b);
Var maximum(const Var& a, const Var& b);

Var neg(const Var& x);
Var scale(const Var& x, double s);
Var add_const(const Var& x, double c);
Var relu(const Var& x);
Var vexp(const Var& x);
Var vlog(const Var& x);
Var sigmoid(const Var& x);

Var matmul(const Var& a, const Var& b); // rank-2
Var transpose2d(const Var& x);
Var reshape(const Var& x, Shape shape);
Var concat(const std::vector<Var>& xs, int axis); // rank-2, axis 0 or 1
Var gather_rows(const Var& x, std::vector<int> rows);
Var slice_cols(const Var& x, int c0, int c1);

Var sum_all(const Var& x);  // -> shape {1}
Var mean_all(const Var& x); // -> shape {1}
Var mean_rows(const Var& x); // rank-2 -> {1, C}

Var softmax_rows(const Var& x);
Var log_softmax_rows(const Var& x);
Var layer_norm(const Var& x, const Var& gain, const Var& bias); // rank-2, eps 1e-5

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int padding);
Var xcorr_depthwise(const Var& templ, const Var& search); // rank-3 CHW each

// Stable binary cross-entropy on logits; targets are plain data (no grad).
Var bce_with_logits(const Var& logits, const Tensor& targets);

// Seeds d(loss)/d(loss)=1 and runs the tape. loss must be a single-element tensor.
void backward(const Var& loss);

} // namespace hift
