// nestner: train / predict / evaluate / ablate / gen-synth over the iterative
// nested-NER model. Every command echoes its resolved configuration first and
// is deterministic under --seed with --threads 1.
//
// Exit codes: 0 success, 2 usage or configuration, 3 checkpoint
// incompatibility, 4 data mismatch, 1 internal failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "nestner/corpus_io.hpp"
#include "nestner/inference.hpp"
#include "nestner/metrics.hpp"
#include "nestner/training.hpp"

namespace nn = nestner;

namespace {

struct RunConfig {
    nn::TrainConfig train;
    nn::EncoderConfig enc;
    nn::DecodeConfig decode;
    nn::SchemeKind write_scheme = nn::SchemeKind::Bioul;
    bool constrained = true;
    int threads = 1;
    int ablation_seeds = 3;

    void apply(const std::string& key, const std::string& value);
    void echo(std::ostream& out) const;
};

int parse_int(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const int out = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw nn::SchemaError("config key '" + key + "' needs an integer, got '" + v + "'");
    }
}

double parse_real(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw nn::SchemaError("config key '" + key + "' needs a number, got '" + v + "'");
    }
}

bool parse_flag(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "on") return true;
    if (v == "0" || v == "false" || v == "off") return false;
    throw nn::SchemaError("config key '" + key + "' needs a boolean, got '" + v + "'");
}

void RunConfig::apply(const std::string& key, const std::string& value) {
    if (key == "epochs") train.epochs = parse_int(key, value);
    else if (key == "batch_size") train.batch_size = parse_int(key, value);
    else if (key == "lr_encoder") train.lr_encoder = parse_real(key, value);
    else if (key == "lr_head") train.lr_head = parse_real(key, value);
    else if (key == "warmup_fraction") train.warmup_fraction = parse_real(key, value);
    else if (key == "dropout_p") train.dropout_p = parse_real(key, value);
    else if (key == "order") train.order_policy = nn::policy_from_name(value);
    else if (key == "observed_sample_p") train.observed_sample_p = parse_real(key, value);
    else if (key == "seed") train.seed = static_cast<std::uint64_t>(std::stoull(value));
    else if (key == "n_layers") enc.n_layers = parse_int(key, value);
    else if (key == "n_heads") enc.n_heads = parse_int(key, value);
    else if (key == "d_model") enc.d_model = parse_int(key, value);
    else if (key == "d_ff") enc.d_ff = parse_int(key, value);
    else if (key == "max_len") enc.max_len = parse_int(key, value);
    else if (key == "l_tag") enc.l_tag = parse_int(key, value);
    else if (key == "read_scheme") enc.read_scheme = nn::scheme_from_name(value);
    else if (key == "tag_dropout") enc.tag_dropout = parse_flag(key, value);
    else if (key == "tag_injection") enc.tag_injection = parse_flag(key, value);
    else if (key == "write_scheme") write_scheme = nn::scheme_from_name(value);
    else if (key == "constrained") constrained = parse_flag(key, value);
    else if (key == "max_iterations") decode.max_iterations = parse_int(key, value);
    else if (key == "threads") threads = parse_int(key, value);
    else if (key == "ablation_seeds") ablation_seeds = parse_int(key, value);
    else throw nn::SchemaError("unknown config key '" + key + "'");
}

void RunConfig::echo(std::ostream& out) const {
    out << "config epochs " << train.epochs << '\n'
        << "config batch_size " << train.batch_size << '\n'
        << "config lr_encoder " << train.lr_encoder << '\n'
        << "config lr_head " << train.lr_head << '\n'
        << "config warmup_fraction " << train.warmup_fraction << '\n'
        << "config dropout_p " << train.dropout_p << '\n'
        << "config order " << nn::policy_name(train.order_policy) << '\n'
        << "config observed_sample_p " << train.observed_sample_p << '\n'
        << "config seed " << train.seed << '\n'
        << "config n_layers " << enc.n_layers << '\n'
        << "config n_heads " << enc.n_heads << '\n'
        << "config d_model " << enc.d_model << '\n'
        << "config d_ff " << enc.d_ff << '\n'
        << "config max_len " << enc.max_len << '\n'
        << "config l_tag " << enc.l_tag << '\n'
        << "config read_scheme " << nn::scheme_name(enc.read_scheme) << '\n'
        << "config tag_dropout " << (enc.tag_dropout ? 1 : 0) << '\n'
        << "config tag_injection " << (enc.tag_injection ? 1 : 0) << '\n'
        << "config write_scheme " << nn::scheme_name(write_scheme) << '\n'
        << "config constrained " << (constrained ? 1 : 0) << '\n'
        << "config max_iterations " << decode.max_iterations << '\n'
        << "config threads " << threads << '\n'
        << "config ablation_seeds " << ablation_seeds << '\n';
}

void load_config_file(RunConfig& config, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw nn::ParseError("cannot open config file " + path);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream fields(line);
        std::string key, value, extra;
        if (!(fields >> key)) continue;
        if (!(fields >> value) || (fields >> extra))
            throw nn::ParseError(path + ":" + std::to_string(line_no) +
                                 ": expected 'key value'");
        config.apply(key, value);
    }
}

void apply_overrides(RunConfig& config, const std::vector<std::string>& sets) {
    for (const std::string& kv : sets) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw nn::SchemaError("--set expects key=value, got '" + kv + "'");
        config.apply(kv.substr(0, eq), kv.substr(eq + 1));
    }
}

nn::Corpus read_corpus(const std::string& path, bool brat) {
    return brat ? nn::read_brat(path) : nn::read_jsonl(path);
}

nn::Model build_model(const RunConfig& config, const nn::Corpus& train_corpus) {
    return nn::make_model(config.enc, train_corpus.labels, train_corpus.token_vocab,
                          config.write_scheme, config.constrained, config.train.seed);
}

std::vector<nn::MentionSet> gold_sets(const nn::Corpus& corpus) {
    std::vector<nn::MentionSet> out;
    for (const nn::Sentence& s : corpus.sentences) out.push_back(s.mentions);
    return out;
}

std::string fixed4(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << v;
    return os.str();
}

void print_evaluation(std::ostream& out, const std::vector<nn::MentionSet>& pred,
                      const nn::Corpus& gold_corpus, std::ostream* records) {
    const std::vector<nn::MentionSet> gold = gold_sets(gold_corpus);
    const nn::PRF micro = nn::exact_match_prf(pred, gold);
    const nn::LabelReport labels = nn::per_label_prf(pred, gold);
    const nn::DepthHistogram hist = nn::depth_histogram(gold_corpus.sentences);

    out << "exact-match micro\n";
    out << "  precision " << fixed4(micro.precision) << "  recall " << fixed4(micro.recall)
        << "  f1 " << fixed4(micro.f1) << '\n';
    out << "per label\n";
    for (const auto& [label, prf] : labels.per_label)
        out << "  " << std::left << std::setw(12) << label << std::right << " precision "
            << fixed4(prf.precision) << "  recall " << fixed4(prf.recall) << "  f1 "
            << fixed4(prf.f1) << '\n';
    out << "  macro f1 " << fixed4(labels.macro_f1) << '\n';
    out << "gold depth histogram\n";
    for (const auto& [depth, count] : hist.counts)
        out << "  depth " << depth << " count " << count << '\n';
    out << "  total " << hist.total << '\n';

    if (records) {
        *records << "micro p " << fixed4(micro.precision) << " r " << fixed4(micro.recall)
                 << " f1 " << fixed4(micro.f1) << '\n';
        for (const auto& [label, prf] : labels.per_label)
            *records << "label " << label << " p " << fixed4(prf.precision) << " r "
                     << fixed4(prf.recall) << " f1 " << fixed4(prf.f1) << '\n';
        for (const auto& [depth, count] : hist.counts)
            *records << "depth " << depth << " count " << count << '\n';
    }
}

// ---------------------------------------------------------------------------
// commands

int cmd_train(const RunConfig& config, const std::string& train_path,
              const std::string& dev_path, const std::string& test_path,
              const std::string& out_path, const std::string& metrics_path, bool brat,
              bool auto_split) {
    config.echo(std::cout);
    nn::Corpus train_corpus = read_corpus(train_path, brat);
    nn::Corpus dev_corpus, test_corpus;
    if (auto_split) {
        nn::SplitResult parts = nn::split_last_fraction(train_corpus);
        train_corpus = std::move(parts.train);
        dev_corpus = std::move(parts.dev);
        test_corpus = std::move(parts.test);
    } else {
        if (!dev_path.empty()) dev_corpus = read_corpus(dev_path, brat);
        if (!test_path.empty()) test_corpus = read_corpus(test_path, brat);
    }

    nn::Model model = build_model(config, train_corpus);
    std::ofstream metrics;
    if (!metrics_path.empty()) {
        metrics.open(metrics_path);
        if (!metrics) throw nn::ParseError("cannot open " + metrics_path + " for writing");
    }
    std::ostream* metrics_out = metrics.is_open() ? &metrics : nullptr;

    const nn::TrainHistory history =
        nn::train(model, train_corpus, dev_corpus, config.train, metrics_out);
    nn::save_checkpoint(out_path, model);
    std::cout << "checkpoint " << out_path << '\n';
    if (history.best_epoch > 0)
        std::cout << "best_epoch " << history.best_epoch << " dev_f1 "
                  << fixed4(history.best_f1) << '\n';

    if (!test_corpus.empty()) {
        const std::vector<nn::MentionSet> pred =
            nn::predict_corpus(model, test_corpus.sentences, config.decode, config.threads);
        const nn::PRF prf = nn::exact_match_prf(pred, gold_sets(test_corpus));
        std::cout << "test precision " << fixed4(prf.precision) << " recall "
                  << fixed4(prf.recall) << " f1 " << fixed4(prf.f1) << '\n';
    }
    return 0;
}

int cmd_predict(const RunConfig& config, const std::string& model_path,
                const std::string& in_path, const std::string& out_path) {
    config.echo(std::cout);
    nn::Model model = nn::load_checkpoint(model_path);
    nn::Corpus corpus = nn::read_jsonl(in_path);
    const std::vector<nn::MentionSet> pred =
        nn::predict_corpus(model, corpus.sentences, config.decode, config.threads);
    for (size_t i = 0; i < corpus.sentences.size(); ++i)
        corpus.sentences[i].mentions = pred[i];
    nn::write_jsonl(corpus, out_path);
    std::cout << "predictions " << out_path << " sentences " << corpus.size() << '\n';
    return 0;
}

int cmd_evaluate(const RunConfig& config, const std::string& pred_path,
                 const std::string& gold_path, const std::string& records_path) {
    config.echo(std::cout);
    const nn::Corpus pred = nn::read_jsonl(pred_path);
    const nn::Corpus gold = nn::read_jsonl(gold_path);
    std::ofstream records;
    if (!records_path.empty()) {
        records.open(records_path);
        if (!records) throw nn::ParseError("cannot open " + records_path + " for writing");
    }
    print_evaluation(std::cout, gold_sets(pred), gold, records.is_open() ? &records : nullptr);
    return 0;
}

int cmd_ablate(const RunConfig& base, const std::string& kind, const std::string& train_path,
               const std::string& dev_path, const std::string& out_path, bool brat) {
    base.echo(std::cout);
    const nn::Corpus train_corpus = read_corpus(train_path, brat);
    const nn::Corpus dev_corpus = read_corpus(dev_path, brat);

    struct Cell {
        std::string name;
        RunConfig config;
    };
    std::vector<Cell> cells;
    if (kind == "order") {
        for (nn::OrderPolicy p : {nn::OrderPolicy::ShortToLarge, nn::OrderPolicy::LargeToShort,
                                  nn::OrderPolicy::Greedy}) {
            RunConfig c = base;
            c.train.order_policy = p;
            cells.push_back({"order=" + nn::policy_name(p), c});
        }
    } else if (kind == "layer") {
        for (int l = 0; l <= base.enc.n_layers; ++l) {
            RunConfig c = base;
            c.enc.l_tag = l;
            cells.push_back({"l_tag=" + std::to_string(l), c});
        }
    } else if (kind == "scheme") {
        for (nn::SchemeKind read : {nn::SchemeKind::Bio, nn::SchemeKind::Bioul})
            for (nn::SchemeKind write : {nn::SchemeKind::Bio, nn::SchemeKind::Bioul}) {
                RunConfig c = base;
                c.enc.read_scheme = read;
                c.write_scheme = write;
                cells.push_back(
                    {"read=" + nn::scheme_name(read) + " write=" + nn::scheme_name(write), c});
            }
    } else {
        throw nn::SchemaError("unknown ablation kind '" + kind + "'");
    }

    std::ofstream records;
    if (!out_path.empty()) {
        records.open(out_path);
        if (!records) throw nn::ParseError("cannot open " + out_path + " for writing");
    }
    auto emit = [&records](const std::string& line) {
        std::cout << line << '\n';
        if (records.is_open()) records << line << '\n';
    };

    for (const Cell& cell : cells) {
        double sum = 0.0;
        for (int s = 0; s < base.ablation_seeds; ++s) {
            RunConfig run = cell.config;
            run.train.seed = base.train.seed + static_cast<std::uint64_t>(s);
            nn::Model model = build_model(run, train_corpus);
            const nn::TrainHistory history =
                nn::train(model, train_corpus, dev_corpus, run.train, nullptr);
            const double f1 = history.best_epoch > 0 ? history.best_f1 : 0.0;
            sum += f1;
            emit("ablate " + kind + " " + cell.name + " seed " +
                 std::to_string(run.train.seed) + " dev_f1 " + fixed4(f1));
        }
        emit("ablate " + kind + " " + cell.name + " mean_dev_f1 " +
             fixed4(sum / std::max(1, base.ablation_seeds)));
    }
    return 0;
}

int cmd_gen_synth(const RunConfig& config, const std::string& out_path, int sentences,
                  int max_depth, int labels) {
    config.echo(std::cout);
    std::cout << "config sentences " << sentences << '\n'
              << "config max_depth " << max_depth << '\n'
              << "config labels " << labels << '\n';
    const nn::Corpus corpus =
        nn::generate_synthetic(sentences, max_depth, labels, config.train.seed);
    nn::write_jsonl(corpus, out_path);
    const nn::DepthHistogram hist = nn::depth_histogram(corpus.sentences);
    std::cout << "generated " << out_path << " sentences " << corpus.size() << " mentions "
              << hist.total << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Iterative nested named-entity recognition"};
    app.require_subcommand(1);
    // let subcommands hand --config/--set back to the parent app
    app.fallthrough();

    std::string config_file;
    std::vector<std::string> overrides;
    app.add_option("--config", config_file, "flat key-value configuration file");
    app.add_option("--set", overrides, "override a config key, key=value (repeatable)");

    std::string train_path, dev_path, test_path, out_path, metrics_path;
    bool brat = false, auto_split = false;
    CLI::App* train = app.add_subcommand("train", "train a model");
    train->add_option("--train", train_path, "training corpus")->required();
    train->add_option("--dev", dev_path, "development corpus");
    train->add_option("--test", test_path, "test corpus scored after training");
    train->add_option("--out", out_path, "checkpoint output path")->required();
    train->add_option("--metrics", metrics_path, "per-epoch metrics log");
    train->add_flag("--brat", brat, "read corpora as BRAT directories");
    train->add_flag("--auto-split", auto_split, "split --train into train/dev/test (80/10/10-style)");

    std::string model_path, in_path;
    CLI::App* predict = app.add_subcommand("predict", "decode a corpus with a checkpoint");
    predict->add_option("--model", model_path, "checkpoint")->required();
    predict->add_option("--input", in_path, "input corpus (jsonl)")->required();
    predict->add_option("--output", out_path, "predictions (jsonl)")->required();

    std::string pred_path, gold_path, records_path;
    CLI::App* evaluate = app.add_subcommand("evaluate", "score predictions against gold");
    evaluate->add_option("--pred", pred_path, "predicted corpus (jsonl)")->required();
    evaluate->add_option("--gold", gold_path, "gold corpus (jsonl)")->required();
    evaluate->add_option("--records", records_path, "machine-readable record output");

    std::string ablate_kind;
    CLI::App* ablate = app.add_subcommand("ablate", "comparison grids: order, layer, scheme");
    ablate->add_option("--kind", ablate_kind, "order | layer | scheme")->required();
    ablate->add_option("--train", train_path, "training corpus")->required();
    ablate->add_option("--dev", dev_path, "development corpus")->required();
    ablate->add_option("--out", out_path, "record output path");
    ablate->add_flag("--brat", brat, "read corpora as BRAT directories");

    int gen_sentences = 1000, gen_depth = 2, gen_labels = 1;
    CLI::App* gen = app.add_subcommand("gen-synth", "generate a synthetic nested corpus");
    gen->add_option("--out", out_path, "corpus output path (jsonl)")->required();
    gen->add_option("--sentences", gen_sentences, "sentence count");
    gen->add_option("--max-depth", gen_depth, "maximum nesting depth (0-3)");
    gen->add_option("--labels", gen_labels, "item label classes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        RunConfig config;
        if (!config_file.empty()) load_config_file(config, config_file);
        apply_overrides(config, overrides);
        config.decode.validate();

        if (train->parsed())
            return cmd_train(config, train_path, dev_path, test_path, out_path, metrics_path,
                             brat, auto_split);
        if (predict->parsed()) return cmd_predict(config, model_path, in_path, out_path);
        if (evaluate->parsed()) return cmd_evaluate(config, pred_path, gold_path, records_path);
        if (ablate->parsed())
            return cmd_ablate(config, ablate_kind, train_path, dev_path, out_path, brat);
        if (gen->parsed())
            return cmd_gen_synth(config, out_path, gen_sentences, gen_depth, gen_labels);
        return 2;
    } catch (const nn::VersionMismatchError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const nn::ShapeMismatchError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const nn::CorruptPayloadError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const nn::LengthMismatchError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const nn::SchemeMismatchError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const nn::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const nn::SchemaError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const nn::MissingTextFileError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const nn::TooSmallError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
}
