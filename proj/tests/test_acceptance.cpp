// Acceptance gate: ten end-to-end properties with pinned tolerances. Each
// criterion prints exactly one PASS/FAIL line; the doctest assertions carry
// the details.

#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include "crf_oracle.hpp"
#include "grad_check.hpp"
#include "nestner/corpus_io.hpp"
#include "nestner/inference.hpp"
#include "nestner/metrics.hpp"
#include "nestner/training.hpp"

using namespace nestner;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// shared plumbing

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

void report(int criterion, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << criterion << ": " << detail
              << std::endl;
    CHECK_MESSAGE(ok, "criterion " << criterion << ": " << detail);
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream os;
    os.precision(precision);
    os << std::fixed << v;
    return os.str();
}

ad::Tensor randt(const std::vector<int>& shape, Rng& rng, double lo, double hi) {
    int n = 1;
    for (int d : shape) n *= d;
    std::vector<double> v(static_cast<size_t>(n));
    for (double& x : v) x = rng.uniform(lo, hi);
    ad::Tensor t = ad::Tensor::from(shape, std::move(v));
    t.set_requires_grad(true);
    return t;
}

// values bounded away from zero, either sign: safe around relu's kink
ad::Tensor randt_signed(const std::vector<int>& shape, Rng& rng) {
    ad::Tensor t = randt(shape, rng, 0.2, 1.5);
    for (int i = 0; i < t.numel(); ++i)
        if (rng.bernoulli(0.5)) t.data()[i] = -t.data()[i];
    return t;
}

MentionSet random_disjoint(Rng& rng, int length, int n_labels) {
    MentionSet out;
    const int attempts = rng.randint(0, 6);
    for (int i = 0; i < attempts; ++i) {
        const int b = rng.randint(0, length);
        const int e = b + 1 + rng.randint(0, std::min(4, length - b));
        if (e > length) continue;
        const Mention m(b, e, "L" + std::to_string(rng.randint(0, n_labels)));
        bool clash = false;
        for (const Mention& o : out)
            if (spans_overlap(o.span, m.span)) clash = true;
        if (!clash) out.insert(m);
    }
    return out;
}

MentionSet random_gold(Rng& rng, int length, int n_labels, int max_size) {
    MentionSet gold;
    for (int layer = 0; layer < 3; ++layer)
        for (const Mention& m : random_disjoint(rng, length, n_labels))
            if (static_cast<int>(gold.size()) < max_size) gold.insert(m);
    return gold;
}

MentionSet maximal_subset(const MentionSet& pool, Rng& rng) {
    std::vector<Mention> order(pool.begin(), pool.end());
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<size_t>(rng.randint(0, static_cast<int>(i)))]);
    MentionSet out;
    for (const Mention& m : order) {
        bool clash = false;
        for (const Mention& o : out)
            if (spans_overlap(o.span, m.span)) clash = true;
        if (!clash) out.insert(m);
    }
    return out;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() /
               ("nestner_accept_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// the end-to-end fixture: one synthetic corpus, one trained model (criterion
// 6 trains it; 7 and 10 reuse it)

struct Fixture {
    Corpus train, dev, test;
    Model model;
    TrainHistory history;
    double train_seconds = 0.0;
};

EncoderConfig toy_config(int max_len) {
    EncoderConfig config;
    config.n_layers = 4;
    config.n_heads = 4;
    config.d_model = 64;
    config.d_ff = 128;
    config.max_len = max_len;
    config.l_tag = 2;
    config.read_scheme = SchemeKind::Bioul;
    return config;
}

Fixture& trained_fixture() {
    static Fixture* fixture = [] {
        auto* f = new Fixture;
        const Corpus all = generate_synthetic(2400, 2, 1, 2026);
        f->train = slice(all, 0, 2000);
        f->dev = slice(all, 2000, 2200);
        f->test = slice(all, 2200, 2400);

        int longest = 0;
        for (const Sentence& s : all.sentences) longest = std::max(longest, s.length());
        f->model = make_model(toy_config(std::max(64, longest + 1)), f->train.labels,
                              f->train.token_vocab, SchemeKind::Bioul, true, 7);

        TrainConfig config;
        config.epochs = 20;
        config.order_policy = OrderPolicy::ShortToLarge;
        config.dropout_p = 0.1;
        config.observed_sample_p = 0.5;
        config.seed = 42;

        Timer timer;
        f->history = train(f->model, f->train, f->dev, config, &std::cout);
        f->train_seconds = timer.seconds();
        return f;
    }();
    return *fixture;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST_CASE("criterion 1: crf forward and viterbi match exhaustive enumeration") {
    Timer timer;
    Rng rng(101);
    double worst_z = 0.0;
    int score_mismatch = 0, seq_mismatch = 0;
    const int trials = 500;

    for (int trial = 0; trial < trials; ++trial) {
        TagSet tags;
        bool constrained = true;
        switch (trial % 4) {
            case 0: tags = TagSet{SchemeKind::Bio, {"A"}}; break;          // 3 tags
            case 1: tags = TagSet{SchemeKind::Bioul, {"A"}}; break;        // 5 tags
            case 2: tags = TagSet{SchemeKind::Bio, {"A", "B"}}; break;     // 5 tags
            default:
                tags = TagSet{SchemeKind::Bio, {"A"}};
                constrained = false;
                break;
        }
        CrfParams crf = make_crf(tags, 4, constrained, rng);
        const int n = crf.n_tags();
        for (int i = 0; i < n; ++i) {
            if (crf.mask.start_ok(i)) crf.start.data()[i] = rng.uniform(-2.0, 2.0);
            if (crf.mask.end_ok(i)) crf.end.data()[i] = rng.uniform(-2.0, 2.0);
            for (int j = 0; j < n; ++j)
                if (crf.mask.trans_ok(i, j))
                    crf.transitions.data()[static_cast<size_t>(i) * n + j] =
                        rng.uniform(-2.0, 2.0);
        }
        const int seq_len = 1 + rng.randint(0, 5);
        std::vector<double> e(static_cast<size_t>(seq_len * n));
        for (double& x : e) x = rng.uniform(-2.0, 2.0);
        const ad::Tensor em = ad::Tensor::from({seq_len, n}, std::move(e));

        ad::Tape tape;
        const double z = log_partition(tape, em, crf).item();
        tape.clear();
        worst_z = std::max(worst_z, std::abs(z - crforacle::log_partition(em, crf)));

        const TagSequence best = viterbi(em, crf);
        const auto [oracle_score, oracle_seq] = crforacle::viterbi(em, crf);
        if (crforacle::score_path(best.ids, em, crf) != oracle_score) ++score_mismatch;
        if (best.ids != oracle_seq) ++seq_mismatch;
    }

    const double elapsed = timer.seconds();
    CHECK(worst_z <= 1e-9);
    CHECK(score_mismatch == 0);
    CHECK(seq_mismatch == 0);
    CHECK(elapsed < 30.0);
    report(1,
           worst_z <= 1e-9 && score_mismatch == 0 && seq_mismatch == 0 && elapsed < 30.0,
           "crf oracle equivalence over " + std::to_string(trials) +
               " instances; worst |logZ - enum| " + fmt(worst_z, 12) + ", " +
               std::to_string(score_mismatch) + " score and " + std::to_string(seq_mismatch) +
               " sequence mismatches, " + fmt(elapsed, 1) + "s");
}

TEST_CASE("criterion 2: finite differences confirm every gradient path") {
    Timer timer;
    Rng rng(202);
    double worst = 0.0;
    long long scalars = 0;

    auto run = [&](const char* name, std::vector<ad::Tensor> inputs,
                   const gradcheck::BuildFn& build, double h = 1e-5) {
        const gradcheck::Report r = gradcheck::check(std::move(inputs), build, h);
        worst = std::max(worst, r.max_err);
        scalars += r.checked;
        CHECK_MESSAGE(r.max_err <= 1e-4, name << " rel err " << r.max_err);
    };

    // -- kernel ops, each against a fixed random weighting
    {
        const ad::Tensor a = randt({3, 4}, rng, -1.0, 1.0);
        const ad::Tensor b = randt({3, 4}, rng, -1.0, 1.0);
        ad::Tensor wab = randt({3, 4}, rng, -1.0, 1.0);
        wab.set_requires_grad(false);
        run("add", {a, b}, [=](ad::Tape& t) { return t.sum(t.mul(t.add(a, b), wab)); });
        run("sub", {a, b}, [=](ad::Tape& t) { return t.sum(t.mul(t.sub(a, b), wab)); });
        run("mul", {a, b}, [=](ad::Tape& t) { return t.sum(t.mul(a, b)); });
        run("scale", {a}, [=](ad::Tape& t) { return t.sum(t.mul(t.scale(a, -1.7), wab)); });
        const ad::Tensor v4 = randt({4}, rng, -1.0, 1.0);
        const ad::Tensor v3 = randt({3}, rng, -1.0, 1.0);
        run("add_rowwise", {a, v4},
            [=](ad::Tape& t) { return t.sum(t.mul(t.add_rowwise(a, v4), wab)); });
        run("add_colwise", {a, v3},
            [=](ad::Tape& t) { return t.sum(t.mul(t.add_colwise(a, v3), wab)); });
        run("transpose", {a}, [=](ad::Tape& t) {
            return t.sum(t.mul(t.transpose(a), t.transpose(wab)));
        });
    }
    {
        const ad::Tensor a = randt({3, 4}, rng, -1.0, 1.0);
        const ad::Tensor b = randt({4, 2}, rng, -1.0, 1.0);
        ad::Tensor w = randt({3, 2}, rng, -1.0, 1.0);
        w.set_requires_grad(false);
        run("matmul", {a, b}, [=](ad::Tape& t) { return t.sum(t.mul(t.matmul(a, b), w)); });
    }
    {
        const ad::Tensor left = randt({2, 3}, rng, -1.0, 1.0);
        const ad::Tensor right = randt({2, 2}, rng, -1.0, 1.0);
        run("concat_cols|slice_cols|row|pick", {left, right}, [=](ad::Tape& t) {
            const ad::Tensor joined = t.concat_cols({left, right});
            const ad::Tensor mid = t.slice_cols(joined, 1, 4);
            return t.add(t.sum(t.row(mid, 1)), t.pick(mid, 2));
        });
    }
    {
        const ad::Tensor table = randt({5, 3}, rng, -1.0, 1.0);
        ad::Tensor w = randt({4, 3}, rng, -1.0, 1.0);
        w.set_requires_grad(false);
        run("embedding_lookup", {table}, [=](ad::Tape& t) {
            return t.sum(t.mul(t.embedding_lookup(table, {0, 2, 2, 4}), w));
        });
    }
    {
        const ad::Tensor a = randt({3, 5}, rng, -1.5, 1.5);
        ad::Tensor w = randt({3, 5}, rng, -1.0, 1.0);
        ad::Tensor w5 = randt({5}, rng, -1.0, 1.0);
        w.set_requires_grad(false);
        w5.set_requires_grad(false);
        run("softmax_rows", {a},
            [=](ad::Tape& t) { return t.sum(t.mul(t.softmax_rows(a), w)); }, 1e-6);
        run("log_softmax_rows", {a},
            [=](ad::Tape& t) { return t.sum(t.mul(t.log_softmax_rows(a), w)); }, 1e-6);
        run("logsumexp", {a}, [=](ad::Tape& t) { return t.logsumexp(a); }, 1e-6);
        run("logsumexp_cols", {a},
            [=](ad::Tape& t) { return t.sum(t.mul(t.logsumexp_cols(a), w5)); }, 1e-6);
    }
    {
        const ad::Tensor x = randt({3, 4}, rng, -1.0, 1.0);
        const ad::Tensor gain = randt({4}, rng, 0.5, 1.5);
        const ad::Tensor bias = randt({4}, rng, -0.5, 0.5);
        ad::Tensor w = randt({3, 4}, rng, -1.0, 1.0);
        w.set_requires_grad(false);
        run("layer_norm_rows", {x, gain, bias}, [=](ad::Tape& t) {
            return t.sum(t.mul(t.layer_norm_rows(x, gain, bias, 1e-5), w));
        });
        const ad::Tensor s = randt_signed({3, 4}, rng);
        run("relu", {s}, [=](ad::Tape& t) { return t.sum(t.mul(t.relu(s), w)); });
        run("gelu", {s}, [=](ad::Tape& t) { return t.sum(t.mul(t.gelu(s), w)); });
        run("dropout", {x}, [=](ad::Tape& t) {
            Rng frozen(777);
            return t.sum(t.mul(t.dropout(x, 0.3, true, frozen), w));
        });
        const std::vector<std::uint8_t> keep{1, 0, 1, 1, 0, 1, 1, 1, 0, 1, 1, 1};
        run("mask_fill", {x},
            [=](ad::Tape& t) { return t.sum(t.mul(t.mask_fill(x, keep, -5.0), w)); });
    }

    // -- full encoder, tag-embedding rows included
    {
        EncoderConfig config;
        config.n_layers = 2;
        config.n_heads = 2;
        config.d_model = 8;
        config.d_ff = 12;
        config.max_len = 8;
        config.l_tag = 1;
        config.dropout_p = 0.25;
        config.read_scheme = SchemeKind::Bioul;
        Model model =
            make_model(config, {"X"}, {"alpha", "beta", "gamma"}, SchemeKind::Bioul, true, 11);
        const std::vector<int> ids{1, 2, 3, 0};
        const ObservedTags observed =
            build_observed({{Mention(1, 3, "X")}}, model.read_tags, 4);

        std::vector<ad::Tensor> inputs;
        for (ad::Parameter& p : model.parameters())
            if (p.name.rfind("crf.", 0) != 0) inputs.push_back(p.value);
        long long encoder_scalars = 0;
        for (const ad::Tensor& t : inputs) encoder_scalars += t.numel();
        CHECK(encoder_scalars ==
              num_params(model.config, model.read_tags.size()));

        EncoderParams& enc = model.enc;
        const EncoderConfig cfg = model.config;
        const gradcheck::Report r = gradcheck::check(inputs, [&enc, cfg, ids, observed](
                                                                 ad::Tape& t) {
            Rng frozen(555);
            return t.sum(encode(t, enc, cfg, ids, observed, /*training=*/true, frozen));
        });
        worst = std::max(worst, r.max_err);
        scalars += r.checked;
        CHECK_MESSAGE(r.max_err <= 1e-4, "encoder rel err " << r.max_err);
        CHECK(r.checked == encoder_scalars);
    }

    // -- crf nll through projection, transitions, boundaries
    {
        const TagSet tags{SchemeKind::Bioul, {"A"}};
        CrfParams crf = make_crf(tags, 6, true, rng);
        const ad::Tensor hidden = randt({4, 6}, rng, -1.0, 1.0);
        TagSequence gold{tags, {tags.id(TagPrefix::B, 0), tags.id(TagPrefix::L, 0), 0,
                                tags.id(TagPrefix::U, 0)}};
        const gradcheck::Report r = gradcheck::check(
            {hidden, crf.proj_w, crf.proj_b, crf.transitions, crf.start, crf.end},
            [&crf, hidden, gold](ad::Tape& t) {
                return nll(t, emissions(t, crf, hidden), crf, gold);
            });
        worst = std::max(worst, r.max_err);
        scalars += r.checked;
        CHECK_MESSAGE(r.max_err <= 1e-4, "crf nll rel err " << r.max_err);
    }

    const double elapsed = timer.seconds();
    CHECK(worst <= 1e-4);
    CHECK(elapsed < 120.0);
    report(2, worst <= 1e-4 && elapsed < 120.0,
           "finite-difference suite over " + std::to_string(scalars) +
               " parameter scalars; worst rel err " + fmt(worst, 8) + ", " + fmt(elapsed, 1) +
               "s");
}

TEST_CASE("criterion 3: tag codec round trip and total decode") {
    Rng rng(303);
    int round_trip_failures = 0;
    int decode_violations = 0;

    for (const SchemeKind kind : {SchemeKind::Bio, SchemeKind::Bioul}) {
        const TagSet tags{kind, {"A", "B", "C"}};
        for (int trial = 0; trial < 1000; ++trial) {
            const int length = 1 + rng.randint(0, 12);
            MentionSet m;
            for (const Mention& x : random_disjoint(rng, length, 3))
                m.insert(Mention(x.span.begin, x.span.end,
                                 std::string(1, static_cast<char>('A' + rng.randint(0, 3)))));
            if (decode_tags(encode_mentions(m, tags, length)) != m) ++round_trip_failures;
        }
        for (int trial = 0; trial < 1000; ++trial) {
            const int length = 1 + rng.randint(0, 12);
            TagSequence seq{tags, {}};
            for (int i = 0; i < length; ++i) seq.ids.push_back(rng.randint(0, tags.size()));
            const MentionSet decoded = decode_tags(seq);  // must not throw
            for (const Mention& a : decoded) {
                if (a.span.begin < 0 || a.span.end > length) ++decode_violations;
                for (const Mention& b : decoded)
                    if (!(a == b) && spans_overlap(a.span, b.span)) ++decode_violations;
            }
        }
    }

    CHECK(round_trip_failures == 0);
    CHECK(decode_violations == 0);
    report(3, round_trip_failures == 0 && decode_violations == 0,
           "codec: 1000 round trips per scheme, 1000 arbitrary sequences per scheme decoded "
           "totally; " +
               std::to_string(round_trip_failures) + " round-trip and " +
               std::to_string(decode_violations) + " disjointness failures");
}

TEST_CASE("criterion 4: greedy selection never beats the exact oracle") {
    Rng rng(404);
    int order_violations = 0;   // greedy > oracle
    int equality_failures = 0;  // maximal predicted subset not tied
    int equality_cases = 0;

    for (int trial = 0; trial < 500; ++trial) {
        const MentionSet gold = random_gold(rng, 12, 2, 12);
        MentionSet observed;
        for (const Mention& m : gold)
            if (rng.uniform() < 0.25) observed.insert(m);
        MentionSet pool;
        for (const Mention& m : gold)
            if (!observed.count(m)) pool.insert(m);

        const bool equality_trial = trial % 2 == 0;
        const MentionSet predicted =
            equality_trial ? maximal_subset(pool, rng) : random_disjoint(rng, 12, 2);

        const SelectionInput input{gold, observed, predicted};
        const double greedy = overlap_f1(select_greedy(input), predicted);
        const double oracle = overlap_f1(brute_force_select(input), predicted);
        if (greedy > oracle + 1e-12) ++order_violations;
        if (equality_trial) {
            ++equality_cases;
            if (greedy != oracle) ++equality_failures;
        }
    }

    // documented boundary: a non-maximal predicted subset cannot tie, because
    // select_greedy must return a maximal set while the oracle may stop early
    const MentionSet gold{Mention(0, 1, "X"), Mention(2, 3, "X")};
    const SelectionInput non_maximal{gold, {}, {Mention(0, 1, "X")}};
    const double g = overlap_f1(select_greedy(non_maximal), non_maximal.predicted);
    const double b = overlap_f1(brute_force_select(non_maximal), non_maximal.predicted);
    CHECK(g == doctest::Approx(2.0 / 3.0));
    CHECK(b == 1.0);

    CHECK(order_violations == 0);
    CHECK(equality_failures == 0);
    CHECK(equality_cases == 250);
    report(4, order_violations == 0 && equality_failures == 0 && g < b,
           "greedy <= oracle on 500 inputs (" + std::to_string(order_violations) +
               " violations); ties on all " + std::to_string(equality_cases) +
               " maximal-subset cases; strict gap confirmed on the non-maximal boundary case");
}

TEST_CASE("criterion 5: tag injection is invisible before l_tag and visible after") {
    EncoderConfig config;
    config.n_layers = 3;
    config.n_heads = 2;
    config.d_model = 8;
    config.d_ff = 12;
    config.max_len = 16;
    config.l_tag = 2;
    config.dropout_p = 0.0;
    config.read_scheme = SchemeKind::Bioul;
    Model model = make_model(config, {"X", "Y"}, {"t1", "t2", "t3", "t4", "t5"},
                             SchemeKind::Bioul, true, 55);

    Rng rng(505);
    int invariant_failures = 0;
    int influence_hits = 0;
    const int trials = 100;

    for (int trial = 0; trial < trials; ++trial) {
        const int length = 4 + rng.randint(0, 5);
        std::vector<int> ids;
        for (int i = 0; i < length; ++i)
            ids.push_back(rng.randint(0, static_cast<int>(model.token_vocab.size())));
        const int pos = rng.randint(0, length);
        const std::string label = rng.bernoulli(0.5) ? "X" : "Y";

        const ObservedTags all_o = build_observed({{}}, model.read_tags, length);
        const ObservedTags one_tag =
            build_observed({{Mention(pos, pos + 1, label)}}, model.read_tags, length);

        Rng unused(0);
        ad::Tape tape;
        std::vector<ad::Tensor> cap_o, cap_tag;
        const ad::Tensor h_o =
            encode(tape, model.enc, model.config, ids, all_o, false, unused, &cap_o);
        const ad::Tensor h_tag =
            encode(tape, model.enc, model.config, ids, one_tag, false, unused, &cap_tag);
        tape.clear();

        // bitwise equality of every pre-injection capture
        for (int layer = 0; layer <= config.l_tag; ++layer) {
            const ad::Tensor& a = cap_o[static_cast<size_t>(layer)];
            const ad::Tensor& b = cap_tag[static_cast<size_t>(layer)];
            for (int i = 0; i < a.numel(); ++i)
                if (a.data()[i] != b.data()[i]) {
                    ++invariant_failures;
                    break;
                }
        }

        double norm = 0.0;
        for (int c = 0; c < config.d_model; ++c) {
            const double d = h_o.data()[pos * config.d_model + c] -
                             h_tag.data()[pos * config.d_model + c];
            norm += d * d;
        }
        if (std::sqrt(norm) > 1e-9) ++influence_hits;
    }

    CHECK(invariant_failures == 0);
    CHECK(influence_hits >= 99);
    report(5, invariant_failures == 0 && influence_hits >= 99,
           "injection: pre-l_tag activations bitwise tag-invariant in 100/100 trials (" +
               std::to_string(invariant_failures) + " failures); one observed tag moved the "
               "final state in " +
               std::to_string(influence_hits) + "/100 trials");
}

TEST_CASE("criterion 6: iterative model learns the nested corpus, flat model hits the ceiling") {
    Timer timer;
    Fixture& f = trained_fixture();

    const DecodeConfig decode;
    const std::vector<MentionSet> pred = predict_corpus(f.model, f.test.sentences, decode, 4);
    std::vector<MentionSet> gold;
    for (const Sentence& s : f.test.sentences) gold.push_back(s.mentions);
    const PRF iterative = exact_match_prf(pred, gold);

    // flat baseline: same architecture, flat_short targets, one-shot decoding
    Model flat_model = make_model(f.model.config, f.train.labels, f.train.token_vocab,
                                  SchemeKind::Bioul, true, 7);
    TrainConfig flat_config;
    flat_config.epochs = 8;
    flat_config.order_policy = OrderPolicy::FlatShort;
    flat_config.dropout_p = 0.1;
    flat_config.seed = 42;
    train(flat_model, f.train, f.dev, flat_config, nullptr);

    DecodeConfig one_shot;
    one_shot.max_iterations = 1;
    const std::vector<MentionSet> flat_pred =
        predict_corpus(flat_model, f.test.sentences, one_shot, 4);
    const PRF flat = exact_match_prf(flat_pred, gold);

    const DepthHistogram hist = depth_histogram(f.test.sentences);
    const double ceiling = hist.flat_recall_ceiling();
    const double elapsed = timer.seconds();

    MESSAGE("iterative dev best f1 " << f.history.best_f1 << " (epoch " << f.history.best_epoch
                                     << "), test f1 " << iterative.f1);
    MESSAGE("flat_short test: p " << flat.precision << " r " << flat.recall << " f1 " << flat.f1
                                  << "; recall ceiling " << ceiling);
    MESSAGE("flat gap (iterative - flat F1): " << iterative.f1 - flat.f1);

    CHECK(iterative.f1 >= 0.95);
    CHECK(ceiling < 1.0);
    CHECK(flat.recall <= ceiling + 1e-12);
    CHECK(elapsed < 900.0);
    report(6,
           iterative.f1 >= 0.95 && ceiling < 1.0 && flat.recall <= ceiling + 1e-12 &&
               elapsed < 900.0,
           "short_to_large test F1 " + fmt(iterative.f1) + " >= 0.95; flat_short recall " +
               fmt(flat.recall) + " <= ceiling " + fmt(ceiling) + " < 1 (flat F1 " +
               fmt(flat.f1) + ", gap " + fmt(iterative.f1 - flat.f1) + "); " +
               fmt(elapsed, 1) + "s < 900s");
}

TEST_CASE("criterion 7: inference reaches a fixpoint within the cap") {
    Fixture& f = trained_fixture();
    DecodeConfig decode;
    int cap_violations = 0;
    int growth_violations = 0;

    for (const Sentence& s : f.test.sentences) {
        PredictTrace trace;
        predict_sentence(f.model, s.tokens, decode, &trace);
        if (trace.iterations > decode.max_iterations) ++cap_violations;
        MentionSet seen;
        for (const MentionSet& layer : trace.layers) {
            const size_t before = seen.size();
            seen.insert(layer.begin(), layer.end());
            if (seen.size() <= before) ++growth_violations;
        }
    }

    CHECK(cap_violations == 0);
    CHECK(growth_violations == 0);
    report(7, cap_violations == 0 && growth_violations == 0,
           "termination over " + std::to_string(f.test.size()) + " test sentences: " +
               std::to_string(cap_violations) + " cap violations, " +
               std::to_string(growth_violations) + " non-growing iterations");
}

TEST_CASE("criterion 8: order-ablation harness compares the three policies") {
    TempDir dir("ablate");
    const Corpus corpus = generate_synthetic(60, 1, 1, 88);
    write_jsonl(corpus, dir.file("corpus.jsonl"));

    const std::string cmd =
        std::string(NESTNER_CLI_PATH) + " ablate --kind order --train " +
        dir.file("corpus.jsonl") + " --dev " + dir.file("corpus.jsonl") + " --out " +
        dir.file("grid.txt") +
        " --set n_layers=2 --set n_heads=2 --set d_model=8 --set d_ff=12 --set max_len=64"
        " --set l_tag=1 --set epochs=2 --set dropout_p=0.0 --set ablation_seeds=3"
        " --set seed=300 > " +
        dir.file("stdout") + " 2> " + dir.file("stderr");
    const int status = std::system(cmd.c_str());
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    CHECK(code == 0);

    const std::string grid = slurp(dir.file("grid.txt"));
    int seed_lines = 0, mean_lines = 0;
    std::string means;
    std::istringstream in(grid);
    std::string line;
    while (std::getline(in, line)) {
        if (line.find(" seed ") != std::string::npos) ++seed_lines;
        if (line.find(" mean_dev_f1 ") != std::string::npos) {
            ++mean_lines;
            means += (means.empty() ? "" : "; ") + line.substr(std::string("ablate order ").size());
        }
    }
    CHECK(seed_lines == 9);  // 3 policies x 3 seeds
    CHECK(mean_lines == 3);
    // which policy wins is corpus-dependent: reported, not asserted
    MESSAGE("ablation means: " << means);
    report(8, code == 0 && seed_lines == 9 && mean_lines == 3,
           "order ablation grid: 3 policies x 3 seeds; " + means);
}

TEST_CASE("criterion 9: reported F1 arithmetic reproduces the reference rows") {
    const double genia = f1_of(0.8028, 0.7336);
    const double hesge = f1_of(0.702, 0.624);
    CHECK(std::abs(genia - 0.7666) < 0.0005);
    CHECK(std::abs(hesge - 0.660) < 0.001);
    report(9, std::abs(genia - 0.7666) < 0.0005 && std::abs(hesge - 0.660) < 0.001,
           "f1(0.8028, 0.7336) = " + fmt(genia) + " (0.7666 +- 0.0005); f1(0.702, 0.624) = " +
               fmt(hesge) + " (0.660 +- 0.001)");
}

TEST_CASE("criterion 10: checkpoints preserve behaviour exactly") {
    Fixture& f = trained_fixture();
    TempDir dir("ckpt");

    std::vector<Sentence> sample(f.test.sentences.begin(), f.test.sentences.begin() + 10);
    const DecodeConfig decode;
    const std::vector<MentionSet> before = predict_corpus(f.model, sample, decode, 1);

    save_checkpoint(dir.file("model.ckpt"), f.model);
    Model loaded = load_checkpoint(dir.file("model.ckpt"));
    const std::vector<MentionSet> after = predict_corpus(loaded, sample, decode, 1);

    int mismatches = 0;
    for (size_t i = 0; i < before.size(); ++i)
        if (before[i] != after[i]) ++mismatches;

    save_checkpoint(dir.file("again.ckpt"), loaded);
    const bool bytes_equal = slurp(dir.file("model.ckpt")) == slurp(dir.file("again.ckpt"));

    CHECK(mismatches == 0);
    CHECK(bytes_equal);
    report(10, mismatches == 0 && bytes_equal,
           "checkpoint round trip: " + std::to_string(mismatches) +
               "/10 prediction mismatches after reload; save-load-save byte-identical: " +
               std::string(bytes_equal ? "yes" : "no"));
}
