#pragma once

#include <functional>
#include <vector>

#include "nestner/model.hpp"

namespace nestner {

struct DecodeConfig {
    int max_iterations = 8;  // real corpora rarely nest past depth 4; hard cap regardless

    void validate() const;
};

// One flat decode given the accumulated history, oldest layer first.
// Injected so the iteration loop can be tested against scripted decoders.
using StepDecoder = std::function<MentionSet(const std::vector<MentionSet>& history,
                                             const std::vector<std::string>& tokens)>;

struct PredictTrace {
    std::vector<MentionSet> layers;  // per-iteration raw decodes that added a new mention
    int iterations = 0;              // decode calls made, including the final empty-novelty one
};

// Iterate: decode, keep the mentions not seen before, feed the raw decode
// back as the next history layer; stop when an iteration adds nothing new or
// the cap is hit. Returns the union over iterations (may nest/overlap even
// though each single decode is disjoint).
MentionSet iterate_decode(const StepDecoder& step, const std::vector<std::string>& tokens,
                          const DecodeConfig& config, PredictTrace* trace = nullptr);

// Single Viterbi decode of the model conditioned on a history (dropout off).
MentionSet decode_step(const Model& model, const std::vector<int>& token_ids,
                       const std::vector<MentionSet>& history);

MentionSet predict_sentence(const Model& model, const std::vector<std::string>& tokens,
                            const DecodeConfig& config, PredictTrace* trace = nullptr);

// Order-preserving, independent per sentence; any thread count produces the
// same result.
std::vector<MentionSet> predict_corpus(const Model& model, const std::vector<Sentence>& sentences,
                                       const DecodeConfig& config, int n_threads = 1);

}  // namespace nestner
