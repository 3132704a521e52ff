#include "nestner/model.hpp"

#include <algorithm>

namespace nestner {

int Model::token_id(const std::string& token) const {
    auto it = token_index_.find(token);
    return it == token_index_.end() ? 0 : it->second;
}

std::vector<int> Model::token_ids(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const std::string& t : tokens) ids.push_back(token_id(t));
    return ids;
}

void Model::rebuild_token_index() {
    token_index_.clear();
    for (size_t i = 0; i < token_vocab.size(); ++i) token_index_[token_vocab[i]] = static_cast<int>(i);
}

std::vector<ad::Parameter> Model::parameters() {
    using ad::ParamGroup;
    std::vector<ad::Parameter> out;
    out.push_back({"enc.tok_emb", ParamGroup::Encoder, enc.tok_emb});
    out.push_back({"enc.pos_emb", ParamGroup::Encoder, enc.pos_emb});
    for (size_t l = 0; l < enc.layers.size(); ++l) {
        EncoderLayerParams& L = enc.layers[l];
        const std::string p = "enc.layer" + std::to_string(l) + ".";
        out.push_back({p + "wq", ParamGroup::Encoder, L.wq});
        out.push_back({p + "bq", ParamGroup::Encoder, L.bq});
        out.push_back({p + "wk", ParamGroup::Encoder, L.wk});
        out.push_back({p + "bk", ParamGroup::Encoder, L.bk});
        out.push_back({p + "wv", ParamGroup::Encoder, L.wv});
        out.push_back({p + "bv", ParamGroup::Encoder, L.bv});
        out.push_back({p + "wo", ParamGroup::Encoder, L.wo});
        out.push_back({p + "bo", ParamGroup::Encoder, L.bo});
        out.push_back({p + "ln1_gain", ParamGroup::Encoder, L.ln1_gain});
        out.push_back({p + "ln1_bias", ParamGroup::Encoder, L.ln1_bias});
        out.push_back({p + "ff_w1", ParamGroup::Encoder, L.ff_w1});
        out.push_back({p + "ff_b1", ParamGroup::Encoder, L.ff_b1});
        out.push_back({p + "ff_w2", ParamGroup::Encoder, L.ff_w2});
        out.push_back({p + "ff_b2", ParamGroup::Encoder, L.ff_b2});
        out.push_back({p + "ln2_gain", ParamGroup::Encoder, L.ln2_gain});
        out.push_back({p + "ln2_bias", ParamGroup::Encoder, L.ln2_bias});
    }
    out.push_back({"head.tag_emb", ParamGroup::Head, enc.tag_emb});
    out.push_back({"crf.proj_w", ParamGroup::Head, crf.proj_w});
    out.push_back({"crf.proj_b", ParamGroup::Head, crf.proj_b});
    out.push_back({"crf.transitions", ParamGroup::Head, crf.transitions});
    out.push_back({"crf.start", ParamGroup::Head, crf.start});
    out.push_back({"crf.end", ParamGroup::Head, crf.end});
    return out;
}

void Model::zero_grads() {
    for (ad::Parameter& p : parameters()) p.value.zero_grad();
}

Model make_model(const EncoderConfig& config, const std::vector<std::string>& labels,
                 const std::vector<std::string>& token_vocab, SchemeKind write_scheme,
                 bool constrained_crf, std::uint64_t seed) {
    std::vector<std::string> sorted_labels = labels;
    std::sort(sorted_labels.begin(), sorted_labels.end());
    sorted_labels.erase(std::unique(sorted_labels.begin(), sorted_labels.end()),
                        sorted_labels.end());

    Model m;
    m.config = config;
    m.config.vocab_size = static_cast<int>(token_vocab.size()) + 1;  // + <unk>
    m.config.validate();
    m.seed = seed;
    m.read_tags = TagSet{m.config.read_scheme, sorted_labels};
    m.token_vocab.reserve(token_vocab.size() + 1);
    m.token_vocab.push_back("<unk>");
    m.token_vocab.insert(m.token_vocab.end(), token_vocab.begin(), token_vocab.end());
    m.rebuild_token_index();

    Rng rng(seed);
    const int d = m.config.d_model;
    auto weight = [&rng](std::vector<int> shape) {
        ad::Tensor t = ad::Tensor::glorot(std::move(shape), rng);
        t.set_requires_grad(true);
        return t;
    };
    auto filled = [](std::vector<int> shape, double v) {
        ad::Tensor t = ad::Tensor::zeros(std::move(shape));
        std::fill_n(t.data(), t.numel(), v);
        t.set_requires_grad(true);
        return t;
    };

    m.enc.tok_emb = weight({m.config.vocab_size, d});
    m.enc.pos_emb = weight({m.config.max_len, d});
    for (int l = 0; l < m.config.n_layers; ++l) {
        EncoderLayerParams L;
        L.wq = weight({d, d});
        L.bq = filled({d}, 0.0);
        L.wk = weight({d, d});
        L.bk = filled({d}, 0.0);
        L.wv = weight({d, d});
        L.bv = filled({d}, 0.0);
        L.wo = weight({d, d});
        L.bo = filled({d}, 0.0);
        L.ln1_gain = filled({d}, 1.0);
        L.ln1_bias = filled({d}, 0.0);
        L.ff_w1 = weight({d, m.config.d_ff});
        L.ff_b1 = filled({m.config.d_ff}, 0.0);
        L.ff_w2 = weight({m.config.d_ff, d});
        L.ff_b2 = filled({d}, 0.0);
        L.ln2_gain = filled({d}, 1.0);
        L.ln2_bias = filled({d}, 0.0);
        m.enc.layers.push_back(L);
    }
    m.enc.tag_emb = weight({m.read_tags.size(), d});

    TagSet write_tags{write_scheme, sorted_labels};
    m.crf = make_crf(write_tags, d, constrained_crf, rng);
    return m;
}

std::vector<ad::Tensor> snapshot(Model& model) {
    std::vector<ad::Tensor> snap;
    for (ad::Parameter& p : model.parameters()) snap.push_back(p.value.clone());
    return snap;
}

void restore(Model& model, const std::vector<ad::Tensor>& snap) {
    std::vector<ad::Parameter> params = model.parameters();
    if (params.size() != snap.size())
        throw ShapeMismatchError("snapshot with " + std::to_string(snap.size()) +
                                 " tensors for a model with " + std::to_string(params.size()));
    for (size_t i = 0; i < params.size(); ++i) {
        ad::Tensor& dst = params[i].value;
        const ad::Tensor& src = snap[i];
        if (dst.shape() != src.shape())
            throw ShapeMismatchError("snapshot shape mismatch at " + params[i].name);
        std::copy_n(src.data(), static_cast<size_t>(src.numel()), dst.data());
    }
}

}  // namespace nestner
