#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "nestner/crf.hpp"
#include "nestner/encoder.hpp"

namespace nestner {

// Encoder + CRF head + the vocabularies both were built against. Tensors are
// shared handles: copying a Model aliases its weights, snapshot()/restore()
// move values.
struct Model {
    EncoderConfig config;
    EncoderParams enc;
    CrfParams crf;           // crf.tags is the write scheme
    TagSet read_tags;        // scheme of injected histories; sizes enc.tag_emb
    std::vector<std::string> token_vocab;  // id 0 = <unk>
    std::uint64_t seed = 0;

    int token_id(const std::string& token) const;  // 0 when out of vocabulary
    std::vector<int> token_ids(const std::vector<std::string>& tokens) const;

    const std::vector<std::string>& labels() const { return crf.tags.labels; }

    // Every learnable tensor with a stable name and its learning-rate group.
    // Encoder group: token/position embeddings and transformer layers. Head
    // group: tag-embedding table and all CRF parameters (none exist in a
    // pretrained encoder, so they take the larger learning rate).
    std::vector<ad::Parameter> parameters();

    void zero_grads();

private:
    std::unordered_map<std::string, int> token_index_;
    friend Model make_model(const EncoderConfig&, const std::vector<std::string>&,
                            const std::vector<std::string>&, SchemeKind, bool, std::uint64_t);
    void rebuild_token_index();
};

// labels: entity label set (sorted, deduplicated by the caller or not — the
// model sorts); token_vocab: corpus tokens without <unk>.
Model make_model(const EncoderConfig& config, const std::vector<std::string>& labels,
                 const std::vector<std::string>& token_vocab, SchemeKind write_scheme,
                 bool constrained_crf, std::uint64_t seed);

// Deep copies of every parameter tensor, in parameters() order.
std::vector<ad::Tensor> snapshot(Model& model);
void restore(Model& model, const std::vector<ad::Tensor>& snap);

}  // namespace nestner
