#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "nestner/corpus_io.hpp"
#include "nestner/inference.hpp"
#include "nestner/metrics.hpp"
#include "nestner/model.hpp"
#include "nestner/ordering.hpp"

namespace nestner {

struct TrainConfig {
    int epochs = 20;
    int batch_size = 1;
    // A pretrained encoder would be fine-tuned around 4e-5; an encoder
    // trained from scratch needs a from-scratch rate. The head (tag table +
    // CRF) is fresh either way and keeps its 9e-3.
    double lr_encoder = 1e-3;
    double lr_head = 9e-3;
    double warmup_fraction = 0.10;
    double dropout_p = 0.25;  // applied to the model's encoder at train start
    OrderPolicy order_policy = OrderPolicy::ShortToLarge;
    double observed_sample_p = 0.5;
    std::uint64_t seed = 42;

    void validate() const;
};

// Adam without weight decay; bias-corrected; one slot pair per parameter in
// parameters() order.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long step = 0;
    std::vector<std::vector<double>> m, v;
};

AdamState make_adam(const std::vector<ad::Parameter>& params);

// Linear 0 -> peak over the first ceil(warmup_fraction * total) steps, then
// linear peak -> 0 by step = total.
double lr_at(long long step, long long total_steps, double peak, double warmup_fraction = 0.10);

// One update over whatever gradients are currently accumulated. The per-group
// learning rates are applied by Parameter.group; gradients are left in place
// (callers zero them).
void adam_step(std::vector<ad::Parameter>& params, AdamState& state, double lr_encoder,
               double lr_head);

// Loss of one training instance per the iterative regimen: sample an
// observed subset of the gold mentions, layer it, inject it as history, pick
// the target subset with the order policy, and score the CRF against the
// target's tag encoding. Flat policies skip observation entirely. An empty
// target trains the all-O termination behavior.
ad::Tensor sentence_loss(ad::Tape& tape, Model& model, const Sentence& sentence,
                         const TrainConfig& config, Rng& rng);

struct EpochLog {
    int epoch = 0;
    long long steps = 0;  // cumulative optimizer steps
    double mean_loss = 0.0;
    PRF dev;
};

struct TrainHistory {
    std::vector<EpochLog> epochs;
    int best_epoch = -1;  // 1-based; -1 when the dev split was empty
    double best_f1 = 0.0;
};

// Full loop: shuffled epochs, Adam with the warmup/decay schedule, per-epoch
// dev evaluation by full iterative inference, best-on-dev weights restored
// into `model` on return. Metrics stream gets one plain-text line per epoch.
TrainHistory train(Model& model, const Corpus& train_split, const Corpus& dev_split,
                   const TrainConfig& config, std::ostream* metrics_log = nullptr);

}  // namespace nestner
