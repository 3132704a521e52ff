#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nestner/annotations.hpp"
#include "nestner/tensor.hpp"

namespace nestner {

struct EncoderConfig {
    int n_layers = 4;
    int n_heads = 4;
    int d_model = 64;
    int d_ff = 128;
    int vocab_size = 0;  // token vocabulary incl. <unk>; set when the vocab is built
    int max_len = 64;
    int l_tag = 2;  // observed-tag injection after this layer; 0 = at the embedding output
    double dropout_p = 0.25;
    SchemeKind read_scheme = SchemeKind::Bioul;
    bool tag_dropout = true;     // dropout on the summed tag vector at the injection point
    bool tag_injection = true;   // off = iteration outputs ignore history entirely

    void validate() const;
    // Deterministic fingerprint of every field; equal configs hash equal on
    // every platform.
    std::uint64_t fingerprint() const;
};

// Learnable encoder state. Weight matrices are stored [in, out] and applied
// as x * W + b.
struct EncoderLayerParams {
    ad::Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    ad::Tensor ln1_gain, ln1_bias;
    ad::Tensor ff_w1, ff_b1, ff_w2, ff_b2;
    ad::Tensor ln2_gain, ln2_bias;
};

struct EncoderParams {
    ad::Tensor tok_emb;  // [vocab, d_model]
    ad::Tensor pos_emb;  // [max_len, d_model]
    std::vector<EncoderLayerParams> layers;
    ad::Tensor tag_emb;  // [read tag vocab, d_model]; the O row participates
};

// Forward pass:
//   h0 = dropout(tok_emb[ids] + pos_emb[0..T))
//   layer l (post-norm):  h = LN1(h + dropout(MHA(h)))
//                         h = LN2(h + dropout(FFN_gelu(h)))
//   after layer l_tag:    h = h + dropout(sum over observed depths of tag_emb[tag])
// Attention uses per-head softmax(Q K^T / sqrt(d_head)) with dropout on the
// attention weights. An empty observed history adds nothing (a present layer
// whose tag is O adds the O embedding).
//
// `layer_capture`, when given, receives the pre-injection output of the
// embedding block and of every layer, in order.
ad::Tensor encode(ad::Tape& tape, const EncoderParams& params, const EncoderConfig& config,
                  const std::vector<int>& token_ids, const ObservedTags& observed, bool training,
                  Rng& rng, std::vector<ad::Tensor>* layer_capture = nullptr);

// Exact learnable scalar count for a config, with `n_read_tags` rows in the
// tag table (0 when injection is unused). Formula, per the parameter layout
// above:
//   vocab*d + max_len*d                                  embeddings
//   + n_layers * (4*(d*d + d) + 4*d + (d*ff + ff) + (ff*d + d))
//   + n_read_tags * d                                    tag table
long long num_params(const EncoderConfig& config, int n_read_tags);

}  // namespace nestner
