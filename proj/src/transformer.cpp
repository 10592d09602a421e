#include "hift/transformer.hpp"

#include <cmath>

namespace hift {

TransformerVariant parse_variant(const std::string& s) {
    if (s == "hft") return TransformerVariant::kHft;
    if (s == "ft") return TransformerVariant::kFt;
    if (s == "ot") return TransformerVariant::kOt;
    throw ConfigError("unknown transformer.variant '" + s + "' (expected hft, ft or ot)");
}

std::string variant_name(TransformerVariant v) {
    switch (v) {
        case TransformerVariant::kHft: return "hft";
        case TransformerVariant::kFt: return "ft";
        case TransformerVariant::kOt: return "ot";
    }
    return "?";
}

HftTransformer::HftTransformer(const TransformerConfig& cfg, Rng& rng) : cfg_(cfg) {
    const int c = cfg.channels;
    if (cfg.seq_len <= 0) throw ConfigError("transformer seq_len must be positive");
    if (cfg.heads < 1 || c % cfg.heads != 0) {
        throw ConfigError("transformer heads must divide channels");
    }
    pe_ = Parameter("transformer.pe", Tensor::normal({cfg.seq_len, c}, rng, 0.0, 0.1));
    enc_attn_ = MultiHeadAttention("transformer.enc.attn", c, cfg.heads, rng);
    enc_norm1_ = LayerNormLayer("transformer.enc.norm1", c);
    enc_norm2_ = LayerNormLayer("transformer.enc.norm2", c);
    enc_norm3_ = LayerNormLayer("transformer.enc.norm3", c);
    enc_ffn_ = Ffn("transformer.enc.ffn", c, cfg.ffn_mult * c, rng);
    if (cfg.variant == TransformerVariant::kHft) {
        const double limit = std::sqrt(6.0 / (3 * c));
        mod_proj_weight_ = Parameter("transformer.mod.proj.weight",
                                     Tensor::uniform({2 * c, c}, rng, -limit, limit));
        mod_proj_bias_ = Parameter("transformer.mod.proj.bias", Tensor({1, c}));
        mod_gate_ = Ffn("transformer.mod.gate", c, cfg.ffn_mult * c, rng);
        gamma1_ = Parameter("transformer.mod.gamma1", Tensor({1})); // identity start
    }
    for (int l = 0; l < cfg.decoder_layers; ++l) {
        const std::string base = "transformer.dec" + std::to_string(l);
        DecoderLayer layer;
        layer.self_attn = MultiHeadAttention(base + ".self", c, cfg.heads, rng);
        layer.cross_attn = MultiHeadAttention(base + ".cross", c, cfg.heads, rng);
        layer.ffn = Ffn(base + ".ffn", c, cfg.ffn_mult * c, rng);
        layer.norm_self = LayerNormLayer(base + ".norm_self", c);
        layer.norm_cross = LayerNormLayer(base + ".norm_cross", c);
        layer.norm_ffn = LayerNormLayer(base + ".norm_ffn", c);
        dec_.push_back(std::move(layer));
    }
    if (cfg.variant == TransformerVariant::kOt) {
        query_table_ = Parameter("transformer.queries", Tensor::normal({cfg.seq_len, c}, rng, 0.0, 0.1));
    }
}

Var HftTransformer::modulate(const Var& me3, const Var& m4p, const Var& gamma1) const {
    if (!mod_proj_weight_.var.defined()) {
        throw ContractError("modulation layer only exists in the hft variant");
    }
    if (me3.shape() != m4p.shape()) {
        throw ShapeError("modulate expects matching shapes, got " + shape_str(me3.shape()) + " and " +
                         shape_str(m4p.shape()));
    }
    Var proj = add(matmul(concat({me3, m4p}, 1), mod_proj_weight_.var), mod_proj_bias_.var);
    Var gate = mod_gate_.forward(mean_rows(m4p)); // 1 x C, broadcast over rows
    Var w_prime = mul(proj, gate);
    return add(me3, mul(mul(gamma1, w_prime), me3));
}

Var HftTransformer::encode(const Var& m3, const Var& m4, const Var& pe, AttnTrace* trace) const {
    if (m3.shape() != m4.shape() || m3.shape() != pe.shape()) {
        throw ShapeError("encode expects m3, m4 and pe of equal shape");
    }
    Var m3p = add(m3, pe);
    Var m4p = add(m4, pe);
    Var me1 = enc_norm1_.forward(add(m3p, m4p));
    Var me2 = enc_attn_.forward(me1, me1, m3p, trace);
    Var me3 = enc_norm2_.forward(add(m3p, me2));
    Var me4 = cfg_.variant == TransformerVariant::kHft ? modulate(me3, m4p, gamma1_.var) : me3;
    return enc_norm3_.forward(add(enc_ffn_.forward(me4), me4));
}

Var HftTransformer::decode(const Var& queries, const Var& memory, AttnTrace* trace) const {
    if (queries.shape() != memory.shape()) {
        throw ShapeError("decode expects queries and memory of equal shape");
    }
    Var x = queries;
    for (const DecoderLayer& layer : dec_) {
        x = layer.norm_self.forward(add(x, layer.self_attn.forward(x, x, x, trace)));
        x = layer.norm_cross.forward(add(x, layer.cross_attn.forward(x, memory, memory, trace)));
        x = layer.norm_ffn.forward(add(x, layer.ffn.forward(x)));
    }
    return x;
}

Var HftTransformer::forward(const Var& m3, const Var& m4, const Var& m5, AttnTrace* trace) const {
    if (m5.value().rows() != cfg_.seq_len || m5.value().cols() != cfg_.channels) {
        throw ShapeError("transformer built for " + std::to_string(cfg_.seq_len) + " x " +
                         std::to_string(cfg_.channels) + ", got " + shape_str(m5.shape()));
    }
    Var memory = encode(m3, m4, pe_.var, trace);
    Var queries = cfg_.variant == TransformerVariant::kOt ? query_table_.var : m5;
    if (cfg_.decoder_pe) queries = add(queries, pe_.var);
    return decode(queries, memory, trace);
}

void HftTransformer::collect(ParamRefs& out) {
    out.push_back(&pe_);
    enc_attn_.collect(out);
    enc_norm1_.collect(out);
    enc_norm2_.collect(out);
    enc_norm3_.collect(out);
    enc_ffn_.collect(out);
    if (cfg_.variant == TransformerVariant::kHft) {
        out.push_back(&mod_proj_weight_);
        out.push_back(&mod_proj_bias_);
        mod_gate_.collect(out);
        out.push_back(&gamma1_);
    }
    for (auto& layer : dec_) {
        layer.self_attn.collect(out);
        layer.cross_attn.collect(out);
        layer.ffn.collect(out);
        layer.norm_self.collect(out);
        layer.norm_cross.collect(out);
        layer.norm_ffn.collect(out);
    }
    if (cfg_.variant == TransformerVariant::kOt) out.push_back(&query_table_);
}

} // namespace hift
