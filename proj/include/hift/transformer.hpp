#pragma once

#include "hift/nn.hpp"

namespace hift {

enum class TransformerVariant {
    kHft, // feature queries + modulation layer
    kFt,  // feature queries, no modulation
    kOt,  // learned object-query table, no modulation
};

TransformerVariant parse_variant(const std::string& s);
std::string variant_name(TransformerVariant v);

struct TransformerConfig {
    int channels = 64; // C
    int heads = 4;     // N, must divide C
    int ffn_mult = 2;  // FFN hidden = ffn_mult * C
    int decoder_layers = 2;
    int seq_len = 0; // W*H, fixes the positional table extent
    TransformerVariant variant = TransformerVariant::kHft;
    bool decoder_pe = false; // also add the positional table to the decoder queries
};

// Encoder fusing M3'/M4' (one layer, with the modulation layer), decoder
// querying M5 without positional encoding (decoder_layers stacked).
class HftTransformer {
public:
    HftTransformer(const TransformerConfig& cfg, Rng& rng);

    // m3, m4, m5: (W*H) x C similarity maps. Returns the transformed feature.
    Var forward(const Var& m3, const Var& m4, const Var& m5, AttnTrace* trace = nullptr) const;

    // One encoder layer over M3' = m3 + pe and M4' = m4 + pe.
    Var encode(const Var& m3, const Var& m4, const Var& pe, AttnTrace* trace = nullptr) const;

    // me3 + gamma1 * W' ⊙ me3 with W' = F(Cat(me3, m4p)) ⊙ FFN(GAP(m4p)).
    Var modulate(const Var& me3, const Var& m4p, const Var& gamma1) const;

    // Two stacked decoder layers; the query stream is seeded from `queries`,
    // no positional table is added here.
    Var decode(const Var& queries, const Var& memory, AttnTrace* trace = nullptr) const;

    const Var& positional_encoding() const { return pe_.var; }
    Var gamma1() const { return gamma1_.var; }
    const TransformerConfig& config() const { return cfg_; }

    void collect(ParamRefs& out);

private:
    struct DecoderLayer {
        MultiHeadAttention self_attn;
        MultiHeadAttention cross_attn;
        Ffn ffn;
        LayerNormLayer norm_self, norm_cross, norm_ffn;
    };

    TransformerConfig cfg_;
    Parameter pe_; // learnable positional table, (W*H) x C
    MultiHeadAttention enc_attn_;
    LayerNormLayer enc_norm1_, enc_norm2_, enc_norm3_;
    Ffn enc_ffn_;
    // modulation layer (kHft only)
    Parameter mod_proj_weight_; // 2C x C, the 1x1 projection F over Cat(me3, m4')
    Parameter mod_proj_bias_;   // 1 x C
    Ffn mod_gate_;              // FFN after GAP, C -> C
    Parameter gamma1_;          // scalar, starts at 0
    // decoder
    std::vector<DecoderLayer> dec_;
    Parameter query_table_; // (W*H) x C, kOt only
};

} // namespace hift
