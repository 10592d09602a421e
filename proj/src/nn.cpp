#include "hift/nn.hpp"

#include <cmath>

namespace hift {

Var attention(const Var& q, const Var& k, const Var& v, AttnTrace* trace) {
    if (q.value().rank() != 2 || k.value().rank() != 2 || v.value().rank() != 2) {
        throw ShapeError("attention expects rank-2 Q, K, V");
    }
    if (q.value().cols() != k.value().cols()) {
        throw ShapeError("attention: Q and K widths differ");
    }
    if (k.value().rows() != v.value().rows()) {
        throw ShapeError("attention: K and V row counts differ");
    }
    const double c = static_cast<double>(q.value().cols());
    Var scores = scale(matmul(q, transpose2d(k)), 1.0 / std::sqrt(c));
    Var weights = softmax_rows(scores);
    if (trace) trace->weights.push_back(weights.value());
    return matmul(weights, v);
}

namespace {

Tensor xavier_uniform(Shape shape, int fan_in, int fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    return Tensor::uniform(std::move(shape), rng, -limit, limit);
}

} // namespace

Linear::Linear(const std::string& name, int in, int out, Rng& rng, bool with_bias)
    : weight(name + ".weight", xavier_uniform({in, out}, in, out, rng)),
      bias(name + ".bias", Tensor({1, out})),
      has_bias(with_bias) {}

Var Linear::forward(const Var& x) const {
    Var y = matmul(x, weight.var);
    return has_bias ? add(y, bias.var) : y;
}

void Linear::collect(ParamRefs& out) {
    out.push_back(&weight);
    if (has_bias) out.push_back(&bias);
}

Conv2dLayer::Conv2dLayer(const std::string& name, int in, int out, int kernel, int stride, int padding,
                         Rng& rng)
    : stride(stride), padding(padding) {
    // Kaiming fan-in scaling, zero biases
    const int fan_in = in * kernel * kernel;
    const double stddev = std::sqrt(2.0 / fan_in);
    weight = Parameter(name + ".weight", Tensor::normal({out, in, kernel, kernel}, rng, 0.0, stddev));
    bias = Parameter(name + ".bias", Tensor({out}));
}

Var Conv2dLayer::forward(const Var& x) const { return conv2d(x, weight.var, bias.var, stride, padding); }

void Conv2dLayer::collect(ParamRefs& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

LayerNormLayer::LayerNormLayer(const std::string& name, int width)
    : gain(name + ".gain", Tensor({width}, 1.0)), bias(name + ".bias", Tensor({width})) {}

Var LayerNormLayer::forward(const Var& x) const { return layer_norm(x, gain.var, bias.var); }

void LayerNormLayer::collect(ParamRefs& out) {
    out.push_back(&gain);
    out.push_back(&bias);
}

Ffn::Ffn(const std::string& name, int width, int hidden, Rng& rng)
    : fc1(name + ".fc1", width, hidden, rng), fc2(name + ".fc2", hidden, width, rng) {}

Var Ffn::forward(const Var& x) const { return fc2.forward(relu(fc1.forward(x))); }

void Ffn::collect(ParamRefs& out) {
    fc1.collect(out);
    fc2.collect(out);
}

MultiHeadAttention::MultiHeadAttention(const std::string& name, int model_dim, int heads, Rng& rng)
    : heads(heads), model_dim(model_dim) {
    if (heads < 1 || model_dim % heads != 0) {
        throw ConfigError("attention head count " + std::to_string(heads) + " must divide width " +
                          std::to_string(model_dim));
    }
    head_dim = model_dim / heads;
    for (int j = 0; j < heads; ++j) {
        const std::string h = name + ".h" + std::to_string(j);
        wq.emplace_back(h + ".wq", xavier_uniform({model_dim, head_dim}, model_dim, head_dim, rng));
        wk.emplace_back(h + ".wk", xavier_uniform({model_dim, head_dim}, model_dim, head_dim, rng));
        wv.emplace_back(h + ".wv", xavier_uniform({model_dim, head_dim}, model_dim, head_dim, rng));
    }
    w_out = Parameter(name + ".wc", xavier_uniform({model_dim, model_dim}, model_dim, model_dim, rng));
}

Var MultiHeadAttention::forward(const Var& q, const Var& k, const Var& v, AttnTrace* trace) const {
    if (q.value().cols() != model_dim || k.value().cols() != model_dim || v.value().cols() != model_dim) {
        throw ShapeError("multi_head_attention expects inputs of width " + std::to_string(model_dim));
    }
    std::vector<Var> outs;
    outs.reserve(static_cast<size_t>(heads));
    for (int j = 0; j < heads; ++j) {
        const size_t js = static_cast<size_t>(j);
        outs.push_back(attention(matmul(q, wq[js].var), matmul(k, wk[js].var), matmul(v, wv[js].var),
                                 trace));
    }
    Var cat = heads == 1 ? outs[0] : concat(outs, 1);
    return matmul(cat, w_out.var);
}

void MultiHeadAttention::collect(ParamRefs& out) {
    for (int j = 0; j < heads; ++j) {
        out.push_back(&wq[static_cast<size_t>(j)]);
        out.push_back(&wk[static_cast<size_t>(j)]);
        out.push_back(&wv[static_cast<size_t>(j)]);
    }
    out.push_back(&w_out);
}

} // namespace hift
