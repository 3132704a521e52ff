// Brute-force CRF oracles: enumerate every tag sequence of length T over
// n_tags, score it with the same kMaskFill surrogate the implementation
// uses, and reduce. Viterbi ties resolve to the sequence that is smallest
// compared position-by-position from the end (matching the implementation's
// lowest-id argmax at every DP cell).
#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "nestner/crf.hpp"

namespace crforacle {

inline double masked(double raw, bool legal) { return legal ? raw : nestner::kMaskFill; }

inline double score_path(const std::vector<int>& seq, const nestner::ad::Tensor& em,
                         const nestner::CrfParams& crf) {
    const int n = crf.n_tags();
    const double* e = em.data();
    double s = masked(crf.start.data()[seq.front()], crf.mask.start_ok(seq.front()));
    s += e[seq[0]];
    for (size_t t = 1; t < seq.size(); ++t) {
        s += masked(crf.transitions.data()[seq[t - 1] * n + seq[t]],
                    crf.mask.trans_ok(seq[t - 1], seq[t]));
        s += e[t * static_cast<size_t>(n) + static_cast<size_t>(seq[t])];
    }
    s += masked(crf.end.data()[seq.back()], crf.mask.end_ok(seq.back()));
    return s;
}

template <typename Visit>
void for_each_path(int seq_len, int n_tags, Visit&& visit) {
    std::vector<int> seq(static_cast<size_t>(seq_len), 0);
    while (true) {
        visit(seq);
        int pos = seq_len - 1;
        while (pos >= 0 && ++seq[static_cast<size_t>(pos)] == n_tags) {
            seq[static_cast<size_t>(pos)] = 0;
            --pos;
        }
        if (pos < 0) break;
    }
}

inline double log_partition(const nestner::ad::Tensor& em, const nestner::CrfParams& crf) {
    const int seq_len = em.shape()[0];
    std::vector<double> scores;
    for_each_path(seq_len, crf.n_tags(),
                  [&](const std::vector<int>& seq) { scores.push_back(score_path(seq, em, crf)); });
    double mx = scores.front();
    for (double s : scores) mx = std::max(mx, s);
    double z = 0.0;
    for (double s : scores) z += std::exp(s - mx);
    return mx + std::log(z);
}

// true when a is smaller comparing tags from the last position backwards
inline bool rev_lex_less(const std::vector<int>& a, const std::vector<int>& b) {
    for (size_t i = a.size(); i-- > 0;)
        if (a[i] != b[i]) return a[i] < b[i];
    return false;
}

inline std::pair<double, std::vector<int>> viterbi(const nestner::ad::Tensor& em,
                                                   const nestner::CrfParams& crf) {
    const int seq_len = em.shape()[0];
    double best = -1e300;
    std::vector<int> best_seq;
    for_each_path(seq_len, crf.n_tags(), [&](const std::vector<int>& seq) {
        const double s = score_path(seq, em, crf);
        if (s > best || (s == best && rev_lex_less(seq, best_seq))) {
            best = s;
            best_seq = seq;
        }
    });
    return {best, best_seq};
}

}  // namespace crforacle
