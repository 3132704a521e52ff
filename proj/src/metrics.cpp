#include "nestner/metrics.hpp"

#include <array>
#include <string>

namespace nestner {

double f1_of(double precision, double recall) {
    const double s = precision + recall;
    return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

PRF prf_from_counts(long long tp, long long fp, long long fn) {
    PRF r;
    r.tp = tp;
    r.fp = fp;
    r.fn = fn;
    r.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    r.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    r.f1 = f1_of(r.precision, r.recall);
    return r;
}

namespace {

void check_aligned(size_t pred, size_t gold) {
    if (pred != gold)
        throw LengthMismatchError("scoring " + std::to_string(pred) +
                                  " predicted sentences against " + std::to_string(gold) +
                                  " gold sentences");
}

}  // namespace

PRF exact_match_prf(const std::vector<MentionSet>& pred, const std::vector<MentionSet>& gold) {
    check_aligned(pred.size(), gold.size());
    long long tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        for (const Mention& m : pred[i])
            gold[i].count(m) ? ++tp : ++fp;
        for (const Mention& m : gold[i])
            if (!pred[i].count(m)) ++fn;
    }
    return prf_from_counts(tp, fp, fn);
}

long long DepthHistogram::at(int depth) const {
    auto it = counts.find(depth);
    return it == counts.end() ? 0 : it->second;
}

double DepthHistogram::flat_recall_ceiling() const {
    return total > 0 ? static_cast<double>(at(0)) / static_cast<double>(total) : 1.0;
}

DepthHistogram depth_histogram(const std::vector<Sentence>& sentences) {
    DepthHistogram h;
    for (const Sentence& s : sentences)
        for (const auto& [mention, depth] : compute_depths(s.mentions)) {
            ++h.counts[depth];
            ++h.total;
        }
    return h;
}

LabelReport per_label_prf(const std::vector<MentionSet>& pred,
                          const std::vector<MentionSet>& gold) {
    check_aligned(pred.size(), gold.size());
    LabelReport report;
    std::map<std::string, std::array<long long, 3>> counts;  // label -> {tp, fp, fn}
    for (size_t i = 0; i < pred.size(); ++i) {
        for (const Mention& m : pred[i])
            ++counts[m.label][gold[i].count(m) ? 0 : 1];
        for (const Mention& m : gold[i])
            if (!pred[i].count(m)) ++counts[m.label][2];
    }
    long long tp = 0, fp = 0, fn = 0;
    double f1_sum = 0.0;
    for (const auto& [label, c] : counts) {
        report.per_label[label] = prf_from_counts(c[0], c[1], c[2]);
        f1_sum += report.per_label[label].f1;
        tp += c[0];
        fp += c[1];
        fn += c[2];
    }
    report.micro = prf_from_counts(tp, fp, fn);
    report.macro_f1 = counts.empty() ? 0.0 : f1_sum / static_cast<double>(counts.size());
    return report;
}

}  // namespace nestner
