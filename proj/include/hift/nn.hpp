#pragma once

#include <string>
#include <vector>

#include "hift/tensor.hpp"

namespace hift {

// Captured attention weight matrices (row-stochastic), one per head per call.
struct AttnTrace {
    std::vector<Tensor> weights;
};

// Scaled dot-product attention, Softmax(Q Kᵀ / sqrt(c)) V with c = Q width.
Var attention(const Var& q, const Var& k, const Var& v, AttnTrace* trace = nullptr);

struct Linear {
    Parameter weight; // in x out
    Parameter bias;   // 1 x out
    bool has_bias = true;

    Linear() = default;
    Linear(const std::string& name, int in, int out, Rng& rng, bool with_bias = true);
    Var forward(const Var& x) const;
    void collect(ParamRefs& out);
};

struct Conv2dLayer {
    Parameter weight; // out x in x k x k
    Parameter bias;   // out
    int stride = 1;
    int padding = 0;

    Conv2dLayer() = default;
    Conv2dLayer(const std::string& name, int in, int out, int kernel, int stride, int padding, Rng& rng);
    Var forward(const Var& x) const;
    void collect(ParamRefs& out);
};

struct LayerNormLayer {
    Parameter gain; // C
    Parameter bias; // C

    LayerNormLayer() = default;
    LayerNormLayer(const std::string& name, int width);
    Var forward(const Var& x) const;
    void collect(ParamRefs& out);
};

// Two linear maps with a ReLU between.
struct Ffn {
    Linear fc1;
    Linear fc2;

    Ffn() = default;
    Ffn(const std::string& name, int width, int hidden, Rng& rng);
    Var forward(const Var& x) const;
    void collect(ParamRefs& out);
};

// Multi-head attention: Cat(a^1..a^N) W_c with a^j = Att(Q W1^j, K W2^j, V W3^j).
struct MultiHeadAttention {
    int heads = 1;
    int model_dim = 0;
    int head_dim = 0;
    std::vector<Parameter> wq, wk, wv; // per head, C x C_d
    Parameter w_out;                   // C x C

    MultiHeadAttention() = default;
    MultiHeadAttention(const std::string& name, int model_dim, int heads, Rng& rng);
    Var forward(const Var& q, const Var& k, const Var& v, AttnTrace* trace = nullptr) const;
    void collect(ParamRefs& out);
};

} // namespace hift
