#include "nestner/inference.hpp"

#include <atomic>
#include <mutex>
#include <thread>

#include "nestner/crf.hpp"

namespace nestner {

void DecodeConfig::validate() const {
    if (max_iterations < 1) throw SchemaError("max_iterations must be >= 1");
}

MentionSet iterate_decode(const StepDecoder& step, const std::vector<std::string>& tokens,
                          const DecodeConfig& config, PredictTrace* trace) {
    config.validate();
    std::vector<MentionSet> history;
    MentionSet all;
    int iterations = 0;
    for (int it = 0; it < config.max_iterations; ++it) {
        const MentionSet decoded = step(history, tokens);
        ++iterations;
        MentionSet novelty;
        for (const Mention& m : decoded)
            if (!all.count(m)) novelty.insert(m);
        if (novelty.empty()) break;
        all.insert(novelty.begin(), novelty.end());
        history.push_back(decoded);
    }
    if (trace) {
        trace->layers = std::move(history);
        trace->iterations = iterations;
    }
    return all;
}

MentionSet decode_step(const Model& model, const std::vector<int>& token_ids,
                       const std::vector<MentionSet>& history) {
    ad::Tape tape;
    const ObservedTags observed =
        build_observed(history, model.read_tags, static_cast<int>(token_ids.size()));
    Rng unused(0);  // dropout is off, nothing consumes randomness
    const ad::Tensor hidden =
        encode(tape, model.enc, model.config, token_ids, observed, /*training=*/false, unused);
    const ad::Tensor em = emissions(tape, model.crf, hidden);
    const TagSequence best = viterbi(em, model.crf);
    tape.clear();
    return decode_tags(best);
}

MentionSet predict_sentence(const Model& model, const std::vector<std::string>& tokens,
                            const DecodeConfig& config, PredictTrace* trace) {
    if (tokens.empty()) throw EmptySequenceError("cannot predict an empty sentence");
    const std::vector<int> ids = model.token_ids(tokens);
    StepDecoder step = [&model, &ids](const std::vector<MentionSet>& history,
                                      const std::vector<std::string>&) {
        return decode_step(model, ids, history);
    };
    return iterate_decode(step, tokens, config, trace);
}

std::vector<MentionSet> predict_corpus(const Model& model, const std::vector<Sentence>& sentences,
                                       const DecodeConfig& config, int n_threads) {
    std::vector<MentionSet> out(sentences.size());
    std::atomic<size_t> cursor{0};
    auto work = [&]() {
        for (size_t i = cursor.fetch_add(1); i < sentences.size(); i = cursor.fetch_add(1))
            out[i] = predict_sentence(model, sentences[i].tokens, config);
    };
    if (n_threads <= 1) {
        work();
    } else {
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t)
            pool.emplace_back([&] {
                try {
                    work();
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    cursor.store(sentences.size());  // stop the other workers
                }
            });
        for (std::thread& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }
    return out;
}

}  // namespace nestner
