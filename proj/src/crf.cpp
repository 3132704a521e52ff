#include "nestner/crf.hpp"

#include <algorithm>
#include <string>

namespace nestner {

TransitionMask unconstrained_mask(int n_tags) {
    TransitionMask m;
    m.n_tags = n_tags;
    m.trans.assign(static_cast<size_t>(n_tags) * n_tags, 1);
    m.start.assign(static_cast<size_t>(n_tags), 1);
    m.end.assign(static_cast<size_t>(n_tags), 1);
    return m;
}

TransitionMask scheme_mask(const TagSet& tags) {
    const int n = tags.size();
    TransitionMask m;
    m.n_tags = n;
    m.trans.assign(static_cast<size_t>(n) * n, 0);
    m.start.assign(static_cast<size_t>(n), 0);
    m.end.assign(static_cast<size_t>(n), 0);

    auto allow = [&m, n](int from, int to) { m.trans[static_cast<size_t>(from) * n + to] = 1; };

    for (int to = 0; to < n; ++to) {
        const TagPrefix tp = tags.prefix_of(to);
        const int tl = tags.label_of(to);
        m.start[static_cast<size_t>(to)] =
            (tp == TagPrefix::O || tp == TagPrefix::B || tp == TagPrefix::U) ? 1 : 0;
        if (tags.kind == SchemeKind::Bio)
            m.end[static_cast<size_t>(to)] = 1;  // B = single-token mention, I = runs to the end
        else
            m.end[static_cast<size_t>(to)] =
                (tp == TagPrefix::O || tp == TagPrefix::U || tp == TagPrefix::L) ? 1 : 0;

        for (int from = 0; from < n; ++from) {
            const TagPrefix fp = tags.prefix_of(from);
            const int fl = tags.label_of(from);
            bool ok;
            if (tags.kind == SchemeKind::Bio) {
                // I-X needs B-X/I-X before it; everything else is free
                ok = tp != TagPrefix::I ||
                     ((fp == TagPrefix::B || fp == TagPrefix::I) && fl == tl);
            } else {
                const bool from_open = fp == TagPrefix::B || fp == TagPrefix::I;
                if (from_open)
                    ok = (tp == TagPrefix::I || tp == TagPrefix::L) && fl == tl;
                else
                    ok = tp == TagPrefix::O || tp == TagPrefix::B || tp == TagPrefix::U;
            }
            if (ok) allow(from, to);
        }
    }
    return m;
}

CrfParams make_crf(const TagSet& tags, int d_model, bool constrained, Rng& rng) {
    const int n = tags.size();
    CrfParams crf;
    crf.tags = tags;
    crf.constrained = constrained;
    crf.mask = constrained ? scheme_mask(tags) : unconstrained_mask(n);
    crf.proj_w = ad::Tensor::glorot({d_model, n}, rng);
    crf.proj_b = ad::Tensor::zeros({n});
    crf.transitions = ad::Tensor::zeros({n, n});
    crf.start = ad::Tensor::zeros({n});
    crf.end = ad::Tensor::zeros({n});
    for (ad::Tensor* t : {&crf.proj_b, &crf.transitions, &crf.start, &crf.end})
        t->set_requires_grad(true);
    crf.proj_w.set_requires_grad(true);

    // pin illegal entries at the -inf surrogate; mask_fill keeps the
    // gradient away so they stay pinned through training
    double* tr = crf.transitions.data();
    for (int f = 0; f < n; ++f)
        for (int t = 0; t < n; ++t)
            if (!crf.mask.trans_ok(f, t)) tr[f * n + t] = kMaskFill;
    for (int t = 0; t < n; ++t) {
        if (!crf.mask.start_ok(t)) crf.start.data()[t] = kMaskFill;
        if (!crf.mask.end_ok(t)) crf.end.data()[t] = kMaskFill;
    }
    return crf;
}

ad::Tensor emissions(ad::Tape& tape, const CrfParams& crf, const ad::Tensor& hidden) {
    return tape.add_rowwise(tape.matmul(hidden, crf.proj_w), crf.proj_b);
}

namespace {

void check_emissions(const ad::Tensor& em, const CrfParams& crf) {
    if (!em.defined() || em.rows() < 1) throw EmptySequenceError("emissions for zero positions");
    if (em.cols() != crf.n_tags())
        throw ShapeError("emissions have " + std::to_string(em.cols()) + " tags, CRF has " +
                         std::to_string(crf.n_tags()));
}

}  // namespace

ad::Tensor log_partition(ad::Tape& tape, const ad::Tensor& em, const CrfParams& crf) {
    check_emissions(em, crf);
    const int seq_len = em.rows();

    ad::Tensor masked_start = tape.mask_fill(crf.start, crf.mask.start, kMaskFill);
    ad::Tensor masked_end = tape.mask_fill(crf.end, crf.mask.end, kMaskFill);

    ad::Tensor alpha = tape.add(tape.row(em, 0), masked_start);
    if (seq_len > 1) {
        ad::Tensor masked_trans = tape.mask_fill(crf.transitions, crf.mask.trans, kMaskFill);
        for (int t = 1; t < seq_len; ++t) {
            ad::Tensor scores = tape.add_colwise(masked_trans, alpha);  // [from][to] + alpha[from]
            alpha = tape.add(tape.logsumexp_cols(scores), tape.row(em, t));
        }
    }
    return tape.logsumexp(tape.add(alpha, masked_end));
}

ad::Tensor path_score(ad::Tape& tape, const ad::Tensor& em, const CrfParams& crf,
                      const TagSequence& gold) {
    check_emissions(em, crf);
    const int seq_len = em.rows();
    const int n = crf.n_tags();
    if (gold.length() != seq_len)
        throw LengthMismatchError("gold path length " + std::to_string(gold.length()) +
                                  " vs emissions " + std::to_string(seq_len));
    if (!(gold.scheme == crf.tags))
        throw SchemeMismatchError("gold path tag set (" + scheme_name(gold.scheme.kind) + ", " +
                                  std::to_string(gold.scheme.labels.size()) +
                                  " labels) differs from the CRF write scheme");
    for (int id : gold.ids)
        if (id < 0 || id >= n) throw SchemaError("gold tag id " + std::to_string(id) + " out of range");

    auto illegal = [&gold](const std::string& what, int pos) {
        throw IllegalGoldPathError(what + " at position " + std::to_string(pos) +
                                   " (tag id " + std::to_string(gold.ids[static_cast<size_t>(pos)]) + ")");
    };
    if (!crf.mask.start_ok(gold.ids.front())) illegal("illegal start tag", 0);
    if (!crf.mask.end_ok(gold.ids.back())) illegal("illegal end tag", seq_len - 1);
    for (int t = 1; t < seq_len; ++t)
        if (!crf.mask.trans_ok(gold.ids[static_cast<size_t>(t - 1)], gold.ids[static_cast<size_t>(t)]))
            illegal("illegal transition into", t);

    ad::Tensor score = tape.add(tape.pick(crf.start, gold.ids.front()),
                                tape.pick(crf.end, gold.ids.back()));
    for (int t = 0; t < seq_len; ++t)
        score = tape.add(score, tape.pick(em, t * n + gold.ids[static_cast<size_t>(t)]));
    for (int t = 1; t < seq_len; ++t)
        score = tape.add(score, tape.pick(crf.transitions,
                                          gold.ids[static_cast<size_t>(t - 1)] * n +
                                              gold.ids[static_cast<size_t>(t)]));
    return score;
}

ad::Tensor nll(ad::Tape& tape, const ad::Tensor& em, const CrfParams& crf,
               const TagSequence& gold) {
    return tape.sub(log_partition(tape, em, crf), path_score(tape, em, crf, gold));
}

TagSequence viterbi(const ad::Tensor& em, const CrfParams& crf) {
    check_emissions(em, crf);
    const int seq_len = em.rows();
    const int n = crf.n_tags();
    const double* e = em.data();
    const double* tr = crf.transitions.data();
    const double* st = crf.start.data();
    const double* en = crf.end.data();

    auto trans_score = [&](int from, int to) {
        return crf.mask.trans_ok(from, to) ? tr[from * n + to] : kMaskFill;
    };

    std::vector<double> delta(static_cast<size_t>(n));
    std::vector<double> next(static_cast<size_t>(n));
    std::vector<int> bp(static_cast<size_t>(seq_len) * n, -1);
    for (int j = 0; j < n; ++j)
        delta[static_cast<size_t>(j)] = (crf.mask.start_ok(j) ? st[j] : kMaskFill) + e[j];

    for (int t = 1; t < seq_len; ++t) {
        for (int j = 0; j < n; ++j) {
            double best = -1e300;
            int arg = -1;
            for (int i = 0; i < n; ++i) {
                const double s = delta[static_cast<size_t>(i)] + trans_score(i, j);
                if (s > best) {  // strict: ties keep the lower tag id
                    best = s;
                    arg = i;
                }
            }
            next[static_cast<size_t>(j)] = best + e[t * n + j];
            bp[static_cast<size_t>(t) * n + j] = arg;
        }
        delta = next;
    }

    double best = -1e300;
    int last = -1;
    for (int j = 0; j < n; ++j) {
        const double s = delta[static_cast<size_t>(j)] + (crf.mask.end_ok(j) ? en[j] : kMaskFill);
        if (s > best) {
            best = s;
            last = j;
        }
    }

    TagSequence out;
    out.scheme = crf.tags;
    out.ids.assign(static_cast<size_t>(seq_len), 0);
    out.ids[static_cast<size_t>(seq_len - 1)] = last;
    for (int t = seq_len - 1; t > 0; --t)
        out.ids[static_cast<size_t>(t - 1)] = bp[static_cast<size_t>(t) * n + out.ids[static_cast<size_t>(t)]];
    return out;
}

}  // namespace nestner
