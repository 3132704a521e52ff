#pragma once

#include <map>
#include <string>
#include <vector>

#include "nestner/annotations.hpp"

namespace nestner {

struct PRF {
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// precision = tp/(tp+fp), recall = tp/(tp+fn), f1 = 2PR/(P+R); every ratio
// is 0 when its denominator is 0.
PRF prf_from_counts(long long tp, long long fp, long long fn);
double f1_of(double precision, double recall);

// Micro-averaged exact-match scoring: a predicted mention counts as tp iff
// the same (begin, end, label) appears in the gold of the same sentence.
// MentionSet membership already collapses duplicates.
PRF exact_match_prf(const std::vector<MentionSet>& pred, const std::vector<MentionSet>& gold);

struct DepthHistogram {
    std::map<int, long long> counts;  // depth -> mention count
    long long total = 0;

    long long at(int depth) const;
    // fraction of mentions a single disjoint prediction can recover: any
    // disjoint subset contains at most one mention per innermost mention, so
    // recall is capped by D0 / total
    double flat_recall_ceiling() const;
};

DepthHistogram depth_histogram(const std::vector<Sentence>& sentences);

struct LabelReport {
    std::map<std::string, PRF> per_label;
    PRF micro;
    double macro_f1 = 0.0;  // unweighted mean of per-label f1 over labels present in gold or pred
};

LabelReport per_label_prf(const std::vector<MentionSet>& pred,
                          const std::vector<MentionSet>& gold);

}  // namespace nestner
