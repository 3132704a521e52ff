#pragma once

#include <string>
#include <vector>

#include "nestner/annotations.hpp"
#include "nestner/rng.hpp"

namespace nestner {

// Which disjoint subset of the remaining gold mentions becomes the target of
// the current training iteration. flat_* policies describe single-iteration
// models and never see an observed history.
enum class OrderPolicy { Greedy, ShortToLarge, LargeToShort, FlatShort, FlatLarge, FlatGreedy };

bool is_flat(OrderPolicy p);
std::string policy_name(OrderPolicy p);
OrderPolicy policy_from_name(const std::string& name);

struct SelectionInput {
    MentionSet gold;
    MentionSet observed;   // subset of gold during training
    MentionSet predicted;  // model's current flat decode; internally disjoint
};

// Token-level labeled F1 between two internally disjoint mention sets: each
// mention contributes its (position, label) pairs, F1 = 2|A∩B| / (|A|+|B|).
// Both empty -> 1.0.
double overlap_f1(const MentionSet& candidate, const MentionSet& predicted);

// Greedy target selection: score every unobserved gold mention m by
// overlap_f1({m}, predicted mentions overlapping m), walk them in descending
// score (ties by the Mention order: earlier begin, then shorter, then
// label), and accept each mention that is disjoint from everything accepted
// so far. The result is a maximal disjoint subset of gold \ observed.
//
// Restricting the comparison to the predicted mentions around m keeps the
// scores local: a mention the decoder got exactly right scores 1.0
// regardless of what was predicted elsewhere in the sentence.
MentionSet select_greedy(const SelectionInput& input);

// Fixed depth orders. short_to_large targets the unobserved mentions of
// minimal depth (depths computed on the full gold set); large_to_short
// targets the containment-maximal mentions of the unobserved remainder.
// Overlaps within the chosen level fall back to the Mention-order tie-break,
// deferring losers to a later iteration.
MentionSet select_by_depth(const SelectionInput& input, OrderPolicy direction);

// Flat baselines: keep only the mentions that contain no other gold mention
// (flat_short) or are contained in none (flat_large), then resolve residual
// overlaps by the tie-break.
MentionSet select_flat(const MentionSet& gold, OrderPolicy kind);

// Independent Bernoulli(p) inclusion per gold mention.
MentionSet sample_observed(const MentionSet& gold, double p, Rng& rng);

// Partition an arbitrary mention set into disjoint layers: inner mentions
// first (depths computed within the set), each mention dropped into the
// first layer it does not overlap. Matches the history short-to-large
// inference would have produced.
std::vector<MentionSet> layer_observed(const MentionSet& observed);

// Exact selection oracle: enumerate every disjoint subset of gold \ observed
// and return the one maximizing overlap_f1(subset, predicted); ties go to
// the lexicographically smallest subset under the Mention order. Throws
// TooLarge beyond 14 unobserved mentions.
MentionSet brute_force_select(const SelectionInput& input);

}  // namespace nestner
