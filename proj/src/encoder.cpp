#include "nestner/encoder.hpp"

#include <cmath>
#include <cstring>
#include <numeric>

namespace nestner {

void EncoderConfig::validate() const {
    if (n_layers < 0) throw SchemaError("n_layers must be >= 0");
    if (n_heads < 1 || d_model < 1 || d_ff < 1) throw SchemaError("bad encoder dimensions");
    if (d_model % n_heads != 0) throw SchemaError("d_model must be divisible by n_heads");
    if (l_tag < 0 || l_tag > n_layers)
        throw SchemaError("l_tag must lie in [0, n_layers]");
    if (dropout_p < 0.0 || dropout_p >= 1.0) throw SchemaError("dropout_p must be in [0, 1)");
    if (max_len < 1) throw SchemaError("max_len must be >= 1");
    if (vocab_size < 1) throw SchemaError("vocab_size must be set before validation");
}

std::uint64_t EncoderConfig::fingerprint() const {
    // FNV-1a over the field values in declaration order
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 1099511628211ull;
        }
    };
    mix(static_cast<std::uint64_t>(n_layers));
    mix(static_cast<std::uint64_t>(n_heads));
    mix(static_cast<std::uint64_t>(d_model));
    mix(static_cast<std::uint64_t>(d_ff));
    mix(static_cast<std::uint64_t>(vocab_size));
    mix(static_cast<std::uint64_t>(max_len));
    mix(static_cast<std::uint64_t>(l_tag));
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(dropout_p));
    std::memcpy(&bits, &dropout_p, sizeof(bits));
    mix(bits);
    mix(read_scheme == SchemeKind::Bio ? 0 : 1);
    mix(tag_dropout ? 1 : 0);
    mix(tag_injection ? 1 : 0);
    return h;
}

namespace {

constexpr double kLayerNormEps = 1e-5;

ad::Tensor attention_block(ad::Tape& t, const EncoderLayerParams& L, const EncoderConfig& cfg,
                           const ad::Tensor& h, bool training, Rng& rng) {
    const int d_head = cfg.d_model / cfg.n_heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(d_head));

    ad::Tensor q = t.add_rowwise(t.matmul(h, L.wq), L.bq);
    ad::Tensor k = t.add_rowwise(t.matmul(h, L.wk), L.bk);
    ad::Tensor v = t.add_rowwise(t.matmul(h, L.wv), L.bv);

    std::vector<ad::Tensor> head_outputs;
    head_outputs.reserve(static_cast<size_t>(cfg.n_heads));
    for (int head = 0; head < cfg.n_heads; ++head) {
        const int c0 = head * d_head;
        const int c1 = c0 + d_head;
        ad::Tensor qh = t.slice_cols(q, c0, c1);
        ad::Tensor kh = t.slice_cols(k, c0, c1);
        ad::Tensor vh = t.slice_cols(v, c0, c1);
        ad::Tensor scores = t.scale(t.matmul(qh, t.transpose(kh)), att_scale);
        ad::Tensor weights = t.softmax_rows(scores);
        weights = t.dropout(weights, cfg.dropout_p, training, rng);
        head_outputs.push_back(t.matmul(weights, vh));
    }
    ad::Tensor merged = cfg.n_heads == 1 ? head_outputs[0] : t.concat_cols(head_outputs);
    return t.add_rowwise(t.matmul(merged, L.wo), L.bo);
}

ad::Tensor feed_forward_block(ad::Tape& t, const EncoderLayerParams& L, const ad::Tensor& h) {
    ad::Tensor inner = t.gelu(t.add_rowwise(t.matmul(h, L.ff_w1), L.ff_b1));
    return t.add_rowwise(t.matmul(inner, L.ff_w2), L.ff_b2);
}

ad::Tensor inject_observed(ad::Tape& t, const EncoderParams& params, const EncoderConfig& cfg,
                           const ad::Tensor& h, const ObservedTags& observed, bool training,
                           Rng& rng) {
    ad::Tensor tag_sum;
    for (const TagSequence& layer : observed.layers) {
        ad::Tensor e = t.embedding_lookup(params.tag_emb, layer.ids);
        tag_sum = tag_sum.defined() ? t.add(tag_sum, e) : e;
    }
    if (cfg.tag_dropout) tag_sum = t.dropout(tag_sum, cfg.dropout_p, training, rng);
    return t.add(h, tag_sum);
}

}  // namespace

ad::Tensor encode(ad::Tape& t, const EncoderParams& params, const EncoderConfig& config,
                  const std::vector<int>& token_ids, const ObservedTags& observed, bool training,
                  Rng& rng, std::vector<ad::Tensor>* layer_capture) {
    const int seq_len = static_cast<int>(token_ids.size());
    for (const TagSequence& layer : observed.layers) {
        if (layer.length() != seq_len)
            throw LengthMismatchError("observed layer length " + std::to_string(layer.length()) +
                                      " vs sequence length " + std::to_string(seq_len));
        if (layer.scheme.kind != config.read_scheme)
            throw SchemeMismatchError("observed layer scheme " + scheme_name(layer.scheme.kind) +
                                      " vs read scheme " + scheme_name(config.read_scheme));
    }
    if (seq_len > config.max_len)
        throw SequenceTooLongError("sequence of " + std::to_string(seq_len) +
                                   " tokens exceeds max_len " + std::to_string(config.max_len));

    std::vector<int> positions(static_cast<size_t>(seq_len));
    std::iota(positions.begin(), positions.end(), 0);

    ad::Tensor h = t.add(t.embedding_lookup(params.tok_emb, token_ids),
                         t.embedding_lookup(params.pos_emb, positions));
    h = t.dropout(h, config.dropout_p, training, rng);
    if (layer_capture) layer_capture->push_back(h);

    const bool inject = config.tag_injection && !observed.empty();
    if (config.l_tag == 0 && inject)
        h = inject_observed(t, params, config, h, observed, training, rng);

    for (int l = 1; l <= config.n_layers; ++l) {
        const EncoderLayerParams& L = params.layers[static_cast<size_t>(l - 1)];
        ad::Tensor attn = attention_block(t, L, config, h, training, rng);
        h = t.layer_norm_rows(t.add(h, t.dropout(attn, config.dropout_p, training, rng)),
                              L.ln1_gain, L.ln1_bias, kLayerNormEps);
        ad::Tensor ff = feed_forward_block(t, L, h);
        h = t.layer_norm_rows(t.add(h, t.dropout(ff, config.dropout_p, training, rng)),
                              L.ln2_gain, L.ln2_bias, kLayerNormEps);
        if (layer_capture) layer_capture->push_back(h);
        if (l == config.l_tag && inject)
            h = inject_observed(t, params, config, h, observed, training, rng);
    }
    return h;
}

long long num_params(const EncoderConfig& config, int n_read_tags) {
    const long long d = config.d_model;
    const long long ff = config.d_ff;
    const long long per_layer = 4 * (d * d + d)  // q, k, v, o projections
                                + 4 * d          // two layer norms
                                + (d * ff + ff)  // ff in
                                + (ff * d + d);  // ff out
    return static_cast<long long>(config.vocab_size) * d +
           static_cast<long long>(config.max_len) * d +
           static_cast<long long>(config.n_layers) * per_layer +
           static_cast<long long>(n_read_tags) * d;
}

}  // namespace nestner
