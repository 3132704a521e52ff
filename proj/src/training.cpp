#include "nestner/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "nestner/crf.hpp"

namespace nestner {

void TrainConfig::validate() const {
    if (epochs < 1) throw SchemaError("epochs must be >= 1");
    if (batch_size < 1) throw SchemaError("batch_size must be >= 1");
    if (lr_encoder <= 0.0 || lr_head <= 0.0) throw SchemaError("learning rates must be > 0");
    if (warmup_fraction <= 0.0 || warmup_fraction >= 1.0)
        throw SchemaError("warmup_fraction must be in (0, 1)");
    if (dropout_p < 0.0 || dropout_p >= 1.0) throw SchemaError("dropout_p must be in [0, 1)");
    if (observed_sample_p < 0.0 || observed_sample_p > 1.0)
        throw SchemaError("observed_sample_p must be in [0, 1]");
}

AdamState make_adam(const std::vector<ad::Parameter>& params) {
    AdamState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const ad::Parameter& p : params) {
        s.m.emplace_back(static_cast<size_t>(p.value.numel()), 0.0);
        s.v.emplace_back(static_cast<size_t>(p.value.numel()), 0.0);
    }
    return s;
}

double lr_at(long long step, long long total_steps, double peak, double warmup_fraction) {
    if (total_steps <= 0) return 0.0;
    const long long warmup = std::max<long long>(
        1, static_cast<long long>(
               std::ceil(warmup_fraction * static_cast<double>(total_steps) - 1e-9)));
    if (step <= warmup)
        return peak * static_cast<double>(step) / static_cast<double>(warmup);
    if (step >= total_steps) return 0.0;
    return peak * static_cast<double>(total_steps - step) /
           static_cast<double>(total_steps - warmup);
}

void adam_step(std::vector<ad::Parameter>& params, AdamState& state, double lr_encoder,
               double lr_head) {
    if (state.m.size() != params.size())
        throw ShapeMismatchError("Adam state built for a different parameter list");
    ++state.step;
    const double bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        ad::Parameter& p = params[i];
        if (!p.value.requires_grad() || p.value.grad() == nullptr)
            throw MissingGradientError("no gradient for " + p.name);
        const double lr = p.group == ad::ParamGroup::Encoder ? lr_encoder : lr_head;
        double* x = p.value.data();
        const double* g = p.value.grad();
        double* m = state.m[i].data();
        double* v = state.v[i].data();
        for (int j = 0; j < p.value.numel(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double mhat = m[j] / bias1;
            const double vhat = v[j] / bias2;
            x[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

ad::Tensor sentence_loss(ad::Tape& tape, Model& model, const Sentence& sentence,
                         const TrainConfig& config, Rng& rng) {
    if (sentence.length() == 0) throw EmptySequenceError("cannot train on an empty sentence");
    const MentionSet& gold = sentence.mentions;
    const bool flat = is_flat(config.order_policy);

    MentionSet observed_set;
    std::vector<MentionSet> layers;
    if (!flat) {
        observed_set = sample_observed(gold, config.observed_sample_p, rng);
        layers = layer_observed(observed_set);
    }
    const std::vector<int> ids = model.token_ids(sentence.tokens);

    MentionSet target;
    switch (config.order_policy) {
        case OrderPolicy::Greedy:
        case OrderPolicy::FlatGreedy: {
            const MentionSet predicted = decode_step(model, ids, layers);
            target = select_greedy({gold, observed_set, predicted});
            break;
        }
        case OrderPolicy::ShortToLarge:
        case OrderPolicy::LargeToShort:
            target = select_by_depth({gold, observed_set, {}}, config.order_policy);
            break;
        case OrderPolicy::FlatShort:
        case OrderPolicy::FlatLarge:
            target = select_flat(gold, config.order_policy);
            break;
    }

    const ObservedTags observed = build_observed(layers, model.read_tags, sentence.length());
    const ad::Tensor hidden =
        encode(tape, model.enc, model.config, ids, observed, /*training=*/true, rng);
    const ad::Tensor em = emissions(tape, model.crf, hidden);
    const TagSequence gold_tags = encode_mentions(target, model.crf.tags, sentence.length());
    return nll(tape, em, model.crf, gold_tags);
}

namespace {

std::vector<MentionSet> gold_sets(const Corpus& corpus) {
    std::vector<MentionSet> out;
    out.reserve(corpus.size());
    for (const Sentence& s : corpus.sentences) out.push_back(s.mentions);
    return out;
}

}  // namespace

TrainHistory train(Model& model, const Corpus& train_split, const Corpus& dev_split,
                   const TrainConfig& config, std::ostream* metrics_log) {
    config.validate();
    if (train_split.empty()) throw EmptyCorpusError("training split is empty");
    model.config.dropout_p = config.dropout_p;

    std::vector<ad::Parameter> params = model.parameters();
    AdamState adam = make_adam(params);
    Rng rng(config.seed);

    const long long n = static_cast<long long>(train_split.size());
    const long long steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
    const long long total_steps = steps_per_epoch * config.epochs;

    DecodeConfig decode_config;
    decode_config.max_iterations = is_flat(config.order_policy) ? 1 : 8;
    const std::vector<MentionSet> dev_gold = gold_sets(dev_split);

    TrainHistory history;
    std::vector<ad::Tensor> best;
    std::vector<size_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0u);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i)  // Fisher-Yates, bit-stable across platforms
            std::swap(order[i - 1], order[static_cast<size_t>(rng.randint(0, static_cast<int>(i)))]);

        double loss_sum = 0.0;
        ad::Tape tape;
        for (long long b = 0; b < n; b += config.batch_size) {
            const long long batch_end = std::min<long long>(n, b + config.batch_size);
            ad::Tensor batch_loss;
            for (long long k = b; k < batch_end; ++k) {
                const Sentence& s = train_split.sentences[order[static_cast<size_t>(k)]];
                ad::Tensor l = sentence_loss(tape, model, s, config, rng);
                batch_loss = batch_loss.defined() ? tape.add(batch_loss, l) : l;
            }
            if (batch_end - b > 1)
                batch_loss = tape.scale(batch_loss, 1.0 / static_cast<double>(batch_end - b));
            loss_sum += batch_loss.item();
            tape.backward(batch_loss);
            const double fraction =
                lr_at(adam.step + 1, total_steps, 1.0, config.warmup_fraction);
            adam_step(params, adam, fraction * config.lr_encoder, fraction * config.lr_head);
            model.zero_grads();
        }

        EpochLog log;
        log.epoch = epoch;
        log.steps = adam.step;
        log.mean_loss = loss_sum / static_cast<double>(steps_per_epoch);
        if (!dev_split.empty()) {
            const std::vector<MentionSet> pred =
                predict_corpus(model, dev_split.sentences, decode_config, 1);
            log.dev = exact_match_prf(pred, dev_gold);
            if (history.best_epoch < 0 || log.dev.f1 > history.best_f1) {
                history.best_epoch = epoch;
                history.best_f1 = log.dev.f1;
                best = snapshot(model);
            }
        }
        if (metrics_log)
            *metrics_log << "epoch " << log.epoch << " steps " << log.steps << " loss "
                         << log.mean_loss << " dev_p " << log.dev.precision << " dev_r "
                         << log.dev.recall << " dev_f1 " << log.dev.f1 << '\n';
        history.epochs.push_back(log);
    }
    if (!best.empty()) restore(model, best);
    return history;
}

}  // namespace nestner
