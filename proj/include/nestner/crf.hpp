#pragma once

#include <cstdint>
#include <vector>

#include "nestner/annotations.hpp"
#include "nestner/tensor.hpp"

namespace nestner {

// Finite stand-in for -inf inside log-space sums: large enough to vanish
// after logsumexp, small enough never to produce NaN. Applied uniformly by
// log_partition, viterbi and the enumeration oracle so score comparisons
// between them are exact.
constexpr double kMaskFill = -1e4;

// Scheme-legal transition structure. trans is row-major [n, n], row = from,
// col = to.
struct TransitionMask {
    int n_tags = 0;
    std::vector<std::uint8_t> trans;
    std::vector<std::uint8_t> start;
    std::vector<std::uint8_t> end;

    bool trans_ok(int from, int to) const { return trans[static_cast<size_t>(from) * n_tags + to] != 0; }
    bool start_ok(int tag) const { return start[static_cast<size_t>(tag)] != 0; }
    bool end_ok(int tag) const { return end[static_cast<size_t>(tag)] != 0; }
};

// Legal moves per scheme:
//   BIO:   I-X only after B-X/I-X; start in {O, B}; any tag may end (a
//          mention reaching the last token ends on B or I).
//   BIOUL: B-X is followed only by I-X/L-X, I-X only by I-X/L-X; start in
//          {O, B, U}; end in {O, U, L}.
TransitionMask scheme_mask(const TagSet& tags);
TransitionMask unconstrained_mask(int n_tags);

// Linear-chain CRF over encoder states. n_tags = tags.size() (the write
// scheme). Invalid transition/start/end entries are pinned at kMaskFill in
// the stored tensors and never receive gradient.
struct CrfParams {
    TagSet tags;
    TransitionMask mask;
    bool constrained = true;  // mask built from the scheme (vs all-permissive)
    ad::Tensor proj_w;      // [d_model, n_tags]
    ad::Tensor proj_b;      // [n_tags]
    ad::Tensor transitions; // [n_tags, n_tags]
    ad::Tensor start;       // [n_tags]
    ad::Tensor end;         // [n_tags]

    int n_tags() const { return tags.size(); }
};

CrfParams make_crf(const TagSet& tags, int d_model, bool constrained, Rng& rng);

// Affine projection of encoder states to per-tag scores, [seq_len, n_tags].
ad::Tensor emissions(ad::Tape& tape, const CrfParams& crf, const ad::Tensor& hidden);

// log sum over all tag sequences of exp(path score), path score =
// start[t0] + sum emissions[i][ti] + sum transitions[t(i-1)][ti] + end[tn].
// Forward algorithm in log space; illegal moves contribute kMaskFill.
ad::Tensor log_partition(ad::Tape& tape, const ad::Tensor& em, const CrfParams& crf);

// Score of one specific legal path (differentiable). Throws IllegalGoldPath
// when the path violates the mask.
ad::Tensor path_score(ad::Tape& tape, const ad::Tensor& em, const CrfParams& crf,
                      const TagSequence& gold);

// log_partition - path_score; >= 0 up to numeric slack.
ad::Tensor nll(ad::Tape& tape, const ad::Tensor& em, const CrfParams& crf,
               const TagSequence& gold);

// Max-score mask-legal sequence. Deterministic: at every argmax (backpointer
// and final tag) the lowest tag id wins ties, which yields the optimal
// sequence that is smallest when compared position-by-position from the end.
TagSequence viterbi(const ad::Tensor& em, const CrfParams& crf);

}  // namespace nestner
