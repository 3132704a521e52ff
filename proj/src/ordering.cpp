#include "nestner/ordering.hpp"

#include <algorithm>
#include <map>

namespace nestner {

bool is_flat(OrderPolicy p) {
    return p == OrderPolicy::FlatShort || p == OrderPolicy::FlatLarge ||
           p == OrderPolicy::FlatGreedy;
}

std::string policy_name(OrderPolicy p) {
    switch (p) {
        case OrderPolicy::Greedy: return "greedy";
        case OrderPolicy::ShortToLarge: return "short_to_large";
        case OrderPolicy::LargeToShort: return "large_to_short";
        case OrderPolicy::FlatShort: return "flat_short";
        case OrderPolicy::FlatLarge: return "flat_large";
        case OrderPolicy::FlatGreedy: return "flat_greedy";
    }
    return "unknown";
}

OrderPolicy policy_from_name(const std::string& name) {
    if (name == "greedy") return OrderPolicy::Greedy;
    if (name == "short_to_large") return OrderPolicy::ShortToLarge;
    if (name == "large_to_short") return OrderPolicy::LargeToShort;
    if (name == "flat_short") return OrderPolicy::FlatShort;
    if (name == "flat_large") return OrderPolicy::FlatLarge;
    if (name == "flat_greedy") return OrderPolicy::FlatGreedy;
    throw SchemaError("unknown order policy: " + name);
}

double overlap_f1(const MentionSet& candidate, const MentionSet& predicted) {
    long long total_a = 0, total_b = 0;
    for (const Mention& m : candidate) total_a += m.span.length();
    for (const Mention& m : predicted) total_b += m.span.length();
    if (total_a + total_b == 0) return 1.0;

    long long hits = 0;
    for (const Mention& a : candidate)
        for (const Mention& b : predicted) {
            if (a.label != b.label) continue;
            const int lo = std::max(a.span.begin, b.span.begin);
            const int hi = std::min(a.span.end, b.span.end);
            if (hi > lo) hits += hi - lo;  // disjointness within each set keeps this exact
        }
    return 2.0 * static_cast<double>(hits) / static_cast<double>(total_a + total_b);
}

namespace {

std::vector<Mention> unobserved_of(const SelectionInput& input) {
    std::vector<Mention> out;
    for (const Mention& m : input.gold)
        if (!input.observed.count(m)) out.push_back(m);
    return out;
}

bool overlaps_any(const Mention& m, const MentionSet& accepted) {
    for (const Mention& a : accepted)
        if (spans_overlap(m.span, a.span)) return true;
    return false;
}

// accept mentions in the given order, skipping anything that overlaps an
// earlier acceptance
MentionSet accept_disjoint(const std::vector<Mention>& ordered) {
    MentionSet accepted;
    for (const Mention& m : ordered)
        if (!overlaps_any(m, accepted)) accepted.insert(m);
    return accepted;
}

}  // namespace

MentionSet select_greedy(const SelectionInput& input) {
    std::vector<Mention> pool = unobserved_of(input);
    std::vector<std::pair<double, Mention>> scored;
    scored.reserve(pool.size());
    for (const Mention& m : pool) {
        MentionSet nearby;
        for (const Mention& p : input.predicted)
            if (spans_overlap(p.span, m.span)) nearby.insert(p);
        scored.emplace_back(overlap_f1({m}, nearby), m);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<Mention> ordered;
    ordered.reserve(scored.size());
    for (auto& [score, m] : scored) ordered.push_back(m);
    return accept_disjoint(ordered);
}

MentionSet select_by_depth(const SelectionInput& input, OrderPolicy direction) {
    std::vector<Mention> pool = unobserved_of(input);
    if (pool.empty()) return {};

    std::vector<Mention> level;
    if (direction == OrderPolicy::ShortToLarge) {
        std::map<Mention, int> depths = compute_depths(input.gold);
        int dmin = depths.at(pool.front());
        for (const Mention& m : pool) dmin = std::min(dmin, depths.at(m));
        for (const Mention& m : pool)
            if (depths.at(m) == dmin) level.push_back(m);
    } else if (direction == OrderPolicy::LargeToShort) {
        for (const Mention& m : pool) {
            bool contained = false;
            for (const Mention& other : pool)
                if (other.span.contains(m.span)) {
                    contained = true;
                    break;
                }
            if (!contained) level.push_back(m);
        }
    } else {
        throw SchemaError("select_by_depth needs short_to_large or large_to_short");
    }
    return accept_disjoint(level);  // pool order is the Mention order already
}

MentionSet select_flat(const MentionSet& gold, OrderPolicy kind) {
    if (kind != OrderPolicy::FlatShort && kind != OrderPolicy::FlatLarge)
        throw SchemaError("select_flat needs flat_short or flat_large");
    std::vector<Mention> level;
    for (const Mention& m : gold) {
        bool keep = true;
        for (const Mention& other : gold) {
            if (kind == OrderPolicy::FlatShort ? m.span.contains(other.span)
                                               : other.span.contains(m.span)) {
                keep = false;
                break;
            }
        }
        if (keep) level.push_back(m);
    }
    return accept_disjoint(level);
}

MentionSet sample_observed(const MentionSet& gold, double p, Rng& rng) {
    MentionSet out;
    for (const Mention& m : gold)
        if (rng.bernoulli(p)) out.insert(m);
    return out;
}

std::vector<MentionSet> layer_observed(const MentionSet& observed) {
    std::map<Mention, int> depths = compute_depths(observed);
    std::vector<Mention> ordered(observed.begin(), observed.end());
    std::stable_sort(ordered.begin(), ordered.end(), [&depths](const Mention& a, const Mention& b) {
        return depths.at(a) < depths.at(b);
    });

    std::vector<MentionSet> layers;
    for (const Mention& m : ordered) {
        bool placed = false;
        for (MentionSet& layer : layers)
            if (!overlaps_any(m, layer)) {
                layer.insert(m);
                placed = true;
                break;
            }
        if (!placed) layers.push_back({m});
    }
    return layers;
}

MentionSet brute_force_select(const SelectionInput& input) {
    std::vector<Mention> pool = unobserved_of(input);
    const int n = static_cast<int>(pool.size());
    if (n > 14)
        throw TooLargeError("brute_force_select over " + std::to_string(n) + " mentions");

    std::vector<std::uint32_t> conflict(static_cast<size_t>(n), 0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j && spans_overlap(pool[static_cast<size_t>(i)].span,
                                        pool[static_cast<size_t>(j)].span))
                conflict[static_cast<size_t>(i)] |= 1u << j;

    double best_score = -1.0;
    std::vector<Mention> best;
    std::vector<Mention> subset;
    for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
        bool ok = true;
        for (int i = 0; i < n && ok; ++i)
            if ((bits >> i) & 1u)
                if (conflict[static_cast<size_t>(i)] & bits) ok = false;
        if (!ok) continue;
        subset.clear();
        for (int i = 0; i < n; ++i)
            if ((bits >> i) & 1u) subset.push_back(pool[static_cast<size_t>(i)]);
        const double score =
            overlap_f1(MentionSet(subset.begin(), subset.end()), input.predicted);
        if (score > best_score ||
            (score == best_score &&
             std::lexicographical_compare(subset.begin(), subset.end(), best.begin(), best.end()))) {
            best_score = score;
            best = subset;
        }
    }
    return MentionSet(best.begin(), best.end());
}

}  // namespace nestner
