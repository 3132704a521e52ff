#include "nestner/corpus_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace nestner {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written as native f64 and documented little-endian");

void Corpus::rebuild_vocabularies() {
    std::set<std::string> label_set, token_set;
    for (const Sentence& s : sentences) {
        for (const std::string& t : s.tokens) token_set.insert(t);
        for (const Mention& m : s.mentions) label_set.insert(m.label);
    }
    labels.assign(label_set.begin(), label_set.end());
    token_vocab.assign(token_set.begin(), token_set.end());
}

// ---------------------------------------------------------------------------
// jsonl

Corpus read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);

    Corpus corpus;
    std::string line;
    size_t record = 0;
    while (std::getline(in, line)) {
        if (line.empty()) {
            ++record;
            continue;
        }
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path + ":" + std::to_string(record + 1) + ": " + e.what());
        }
        auto bad = [&record](const std::string& why) {
            throw SchemaError("record " + std::to_string(record) + ": " + why);
        };
        if (!j.is_object() || !j.contains("tokens") || !j["tokens"].is_array())
            bad("expected an object with a tokens array");
        Sentence s;
        for (const auto& t : j["tokens"]) {
            if (!t.is_string()) bad("tokens must be strings");
            s.tokens.push_back(t.get<std::string>());
        }
        if (j.contains("mentions")) {
            if (!j["mentions"].is_array()) bad("mentions must be an array");
            for (const auto& mj : j["mentions"]) {
                if (!mj.is_object() || !mj.contains("begin") || !mj.contains("end") ||
                    !mj.contains("label") || !mj["begin"].is_number_integer() ||
                    !mj["end"].is_number_integer() || !mj["label"].is_string())
                    bad("mentions need integer begin/end and a string label");
                Mention m(mj["begin"].get<int>(), mj["end"].get<int>(),
                          mj["label"].get<std::string>());
                if (m.span.begin < 0 || m.span.end > s.length() || m.span.begin >= m.span.end)
                    bad("mention [" + std::to_string(m.span.begin) + ", " +
                        std::to_string(m.span.end) + ") outside the " +
                        std::to_string(s.length()) + "-token sentence");
                s.mentions.insert(std::move(m));
            }
        }
        if (j.contains("doc_id")) {
            if (!j["doc_id"].is_string()) bad("doc_id must be a string");
            s.doc_id = j["doc_id"].get<std::string>();
        }
        corpus.sentences.push_back(std::move(s));
        ++record;
    }
    corpus.rebuild_vocabularies();
    return corpus;
}

void write_jsonl(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open " + path + " for writing");
    for (const Sentence& s : corpus.sentences) {
        ordered_json j;
        j["tokens"] = s.tokens;
        ordered_json mentions = ordered_json::array();
        for (const Mention& m : s.mentions) {
            ordered_json mj;
            mj["begin"] = m.span.begin;
            mj["end"] = m.span.end;
            mj["label"] = m.label;
            mentions.push_back(std::move(mj));
        }
        j["mentions"] = std::move(mentions);
        j["doc_id"] = s.doc_id;
        out << j.dump() << '\n';
    }
    if (!out) throw ParseError("failed writing " + path);
}

// ---------------------------------------------------------------------------
// brat

std::vector<std::pair<std::string, int>> tokenize_with_offsets(const std::string& text) {
    static const std::string punct = "()[]{}.,;:!?\"'`-/";
    std::vector<std::pair<std::string, int>> out;
    std::string current;
    int start = 0;
    auto flush = [&]() {
        if (!current.empty()) {
            out.emplace_back(current, start);
            current.clear();
        }
    };
    for (int i = 0; i < static_cast<int>(text.size()); ++i) {
        const char c = text[static_cast<size_t>(i)];
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else if (punct.find(c) != std::string::npos) {
            flush();
            out.emplace_back(std::string(1, c), i);
        } else {
            if (current.empty()) start = i;
            current.push_back(c);
        }
    }
    flush();
    return out;
}

namespace {

struct BratLine {
    int char_begin = 0;                            // offset of the line in the document
    std::vector<std::pair<std::string, int>> tokens;  // offsets document-relative
    MentionSet mentions;
};

int parse_offset(const std::string& field, const std::string& file, size_t line_no) {
    try {
        size_t used = 0;
        const int v = std::stoi(field, &used);
        if (used != field.size() || v < 0) throw std::invalid_argument(field);
        return v;
    } catch (const std::exception&) {
        throw ParseError(file + ":" + std::to_string(line_no) + ": bad offset '" + field + "'");
    }
}

}  // namespace

Corpus read_brat(const std::string& directory, BratWarnings* warnings) {
    BratWarnings local;
    BratWarnings& warn = warnings ? *warnings : local;

    std::vector<fs::path> ann_files, txt_files;
    for (const auto& entry : fs::directory_iterator(directory)) {
        if (!entry.is_regular_file()) continue;
        if (entry.path().extension() == ".ann") ann_files.push_back(entry.path());
        if (entry.path().extension() == ".txt") txt_files.push_back(entry.path());
    }
    std::sort(txt_files.begin(), txt_files.end());
    for (const fs::path& ann : ann_files)
        if (!fs::exists(fs::path(ann).replace_extension(".txt")))
            throw MissingTextFileError(ann.string() + " has no matching .txt");

    Corpus corpus;
    for (const fs::path& txt : txt_files) {
        std::ifstream in(txt, std::ios::binary);
        std::stringstream buffer;
        buffer << in.rdbuf();
        const std::string text = buffer.str();

        std::vector<BratLine> lines;
        size_t pos = 0;
        while (pos <= text.size()) {
            const size_t nl = text.find('\n', pos);
            const size_t end = nl == std::string::npos ? text.size() : nl;
            BratLine line;
            line.char_begin = static_cast<int>(pos);
            line.tokens = tokenize_with_offsets(text.substr(pos, end - pos));
            for (auto& [tok, off] : line.tokens) off += line.char_begin;
            lines.push_back(std::move(line));
            if (nl == std::string::npos) break;
            pos = nl + 1;
        }

        const fs::path ann_path = fs::path(txt).replace_extension(".ann");
        if (fs::exists(ann_path)) {
            std::ifstream ann(ann_path, std::ios::binary);
            std::string raw;
            size_t line_no = 0;
            while (std::getline(ann, raw)) {
                ++line_no;
                if (raw.empty() || raw[0] != 'T') continue;  // only text-bound annotations
                std::vector<std::string> fields;
                size_t from = 0;
                while (true) {
                    const size_t tab = raw.find('\t', from);
                    fields.push_back(raw.substr(from, tab - from));
                    if (tab == std::string::npos) break;
                    from = tab + 1;
                }
                if (fields.size() < 2)
                    throw ParseError(ann_path.string() + ":" + std::to_string(line_no) +
                                     ": expected tab-separated id, span, surface");
                if (fields[1].find(';') != std::string::npos) {
                    ++warn.discontinuous;
                    continue;
                }
                std::istringstream span(fields[1]);
                std::string label, begin_s, end_s, extra;
                span >> label >> begin_s >> end_s;
                if (label.empty() || begin_s.empty() || end_s.empty() || (span >> extra))
                    throw ParseError(ann_path.string() + ":" + std::to_string(line_no) +
                                     ": expected 'TYPE begin end', got '" + fields[1] + "'");
                const int cb = parse_offset(begin_s, ann_path.string(), line_no);
                const int ce = parse_offset(end_s, ann_path.string(), line_no);
                if (ce <= cb)
                    throw ParseError(ann_path.string() + ":" + std::to_string(line_no) +
                                     ": empty span");

                // locate the line holding the span
                BratLine* home = nullptr;
                for (BratLine& l : lines)
                    if (cb >= l.char_begin &&
                        (&l == &lines.back() || cb < (&l + 1)->char_begin))
                        home = &l;
                if (!home) {
                    ++warn.unmapped;
                    continue;
                }
                // snap outward to token boundaries
                int tb = -1, te = -1;
                for (int i = 0; i < static_cast<int>(home->tokens.size()); ++i) {
                    const auto& [tok, off] = home->tokens[static_cast<size_t>(i)];
                    const int tok_end = off + static_cast<int>(tok.size());
                    if (tb < 0 && tok_end > cb) tb = i;
                    if (off < ce) te = i + 1;
                }
                if (tb < 0 || te <= tb) {
                    ++warn.unmapped;
                    continue;
                }
                const auto& first = home->tokens[static_cast<size_t>(tb)];
                const auto& last = home->tokens[static_cast<size_t>(te - 1)];
                if (first.second != cb || last.second + static_cast<int>(last.first.size()) != ce)
                    ++warn.snapped;
                home->mentions.insert(Mention(tb, te, label));
            }
        }

        for (size_t i = 0; i < lines.size(); ++i) {
            if (lines[i].tokens.empty() && lines[i].mentions.empty()) continue;
            Sentence s;
            for (auto& [tok, off] : lines[i].tokens) s.tokens.push_back(tok);
            s.mentions = std::move(lines[i].mentions);
            s.doc_id = txt.stem().string() + ":" + std::to_string(i);
            corpus.sentences.push_back(std::move(s));
        }
    }
    corpus.rebuild_vocabularies();
    return corpus;
}

// ---------------------------------------------------------------------------
// splits

Corpus slice(const Corpus& corpus, size_t begin, size_t end) {
    Corpus out;
    out.sentences.assign(corpus.sentences.begin() + static_cast<std::ptrdiff_t>(begin),
                         corpus.sentences.begin() + static_cast<std::ptrdiff_t>(end));
    out.rebuild_vocabularies();
    return out;
}

SplitResult split_last_fraction(const Corpus& corpus, double test_fraction, double dev_fraction) {
    const size_t n = corpus.size();
    if (n < 10) throw TooSmallError("split needs at least 10 sentences, got " + std::to_string(n));
    const size_t n_test = std::max<size_t>(
        1, static_cast<size_t>(std::floor(static_cast<double>(n) * test_fraction + 1e-9)));
    const size_t rest = n - n_test;
    const size_t n_dev = std::max<size_t>(
        1, static_cast<size_t>(std::floor(static_cast<double>(rest) * dev_fraction + 1e-9)));
    SplitResult r;
    r.train = slice(corpus, 0, rest - n_dev);
    r.dev = slice(corpus, rest - n_dev, rest);
    r.test = slice(corpus, rest, n);
    return r;
}

// ---------------------------------------------------------------------------
// synthetic corpus

namespace {

struct SynthPools {
    std::vector<std::string> fillers{"we", "saw", "the", "old", "mill", "near"};
    std::vector<std::vector<std::string>> singles, openers, closers;
    std::vector<std::string> item_labels;

    explicit SynthPools(int label_count) {
        for (int c = 0; c < label_count; ++c) {
            const char suffix = static_cast<char>('a' + c);
            item_labels.push_back(label_count == 1 ? "ITM" : std::string("ITM") + suffix);
            std::vector<std::string> s, o, k;
            for (int i = 0; i < 6; ++i) {
                s.push_back(std::string("p") + suffix + std::to_string(i));
                o.push_back(std::string("d") + suffix + std::to_string(i));
                k.push_back(std::string("q") + suffix + std::to_string(i));
            }
            singles.push_back(std::move(s));
            openers.push_back(std::move(o));
            closers.push_back(std::move(k));
        }
    }
};

class SynthBuilder {
public:
    SynthBuilder(const SynthPools& pools, Rng& rng, Sentence& out)
        : pools_(pools), rng_(rng), out_(out) {}

    void filler() { push(pools_.fillers[static_cast<size_t>(rng_.randint(0, 6))]); }

    void item() {
        const int c = rng_.randint(0, static_cast<int>(pools_.item_labels.size()));
        const int v = rng_.randint(0, 6);
        const int begin = length();
        if (rng_.bernoulli(0.5)) {
            push(pools_.singles[static_cast<size_t>(c)][static_cast<size_t>(v)]);
        } else {
            push(pools_.openers[static_cast<size_t>(c)][static_cast<size_t>(v)]);
            push(pools_.closers[static_cast<size_t>(c)][static_cast<size_t>(rng_.randint(0, 6))]);
        }
        mention(begin, pools_.item_labels[static_cast<size_t>(c)]);
    }

    void group() {
        const int begin = length();
        push("(");
        item();
        if (rng_.bernoulli(0.4)) {
            if (rng_.bernoulli(0.5)) filler();
            item();
        }
        push(")");
        mention(begin, "GRP");
    }

    void block() {
        const int begin = length();
        push("[");
        group();
        if (rng_.bernoulli(0.5)) {
            if (rng_.bernoulli(0.5)) filler();
            item();
        }
        push("]");
        mention(begin, "BLK");
    }

    void super() {
        const int begin = length();
        push("{");
        block();
        if (rng_.bernoulli(0.4)) item();
        push("}");
        mention(begin, "SUP");
    }

    void unit(int depth) {
        switch (depth) {
            case 0: item(); break;
            case 1: group(); break;
            case 2: block(); break;
            default: super(); break;
        }
    }

    int length() const { return out_.length(); }

private:
    void push(const std::string& tok) { out_.tokens.push_back(tok); }
    void mention(int begin, const std::string& label) {
        out_.mentions.insert(Mention(begin, length(), label));
    }

    const SynthPools& pools_;
    Rng& rng_;
    Sentence& out_;
};

int sample_unit_depth(int max_depth, Rng& rng) {
    const double u = rng.uniform();
    switch (max_depth) {
        case 0: return 0;
        case 1: return u < 0.55 ? 0 : 1;
        case 2: return u < 0.45 ? 0 : (u < 0.78 ? 1 : 2);
        default: return u < 0.40 ? 0 : (u < 0.70 ? 1 : (u < 0.90 ? 2 : 3));
    }
}

}  // namespace

Corpus generate_synthetic(int n_sentences, int max_depth, int label_count, std::uint64_t seed) {
    if (max_depth < 0 || max_depth > 3) throw SchemaError("max_depth must be in [0, 3]");
    if (label_count < 1) throw SchemaError("label_count must be >= 1");
    const SynthPools pools(label_count);
    Rng rng(seed);

    Corpus corpus;
    for (int i = 0; i < n_sentences; ++i) {
        Sentence s;
        s.doc_id = "synth-" + std::to_string(i);
        SynthBuilder build(pools, rng, s);

        const bool force_deep = max_depth > 0 && i % 3 == 0;
        if (!force_deep && rng.uniform() < 0.05) {
            const int n = 2 + rng.randint(0, 3);
            for (int k = 0; k < n; ++k) build.filler();
        } else {
            const int n_units = 1 + rng.randint(0, max_depth >= 3 ? 2 : 3);
            if (rng.bernoulli(0.3)) build.filler();
            for (int u = 0; u < n_units; ++u) {
                if (u > 0 && rng.bernoulli(0.5)) build.filler();
                build.unit(u == 0 && force_deep ? max_depth : sample_unit_depth(max_depth, rng));
            }
            if (rng.bernoulli(0.3)) build.filler();
        }
        corpus.sentences.push_back(std::move(s));
    }
    corpus.rebuild_vocabularies();
    return corpus;
}

// ---------------------------------------------------------------------------
// checkpoints

namespace {

constexpr const char* kMagic = "nestner-checkpoint v1";

std::string fmt_double(double v) {
    std::ostringstream os;
    os << std::hexfloat << v;  // bit-exact round trip
    return os.str();
}

double parse_double(const std::string& s, const std::string& key) {
    try {
        return std::stod(s);  // accepts hexfloat
    } catch (const std::exception&) {
        throw CorruptPayloadError("bad value for " + key + ": '" + s + "'");
    }
}

std::string expect_line(std::istream& in, const std::string& what) {
    std::string line;
    if (!std::getline(in, line)) throw CorruptPayloadError("checkpoint ends before " + what);
    return line;
}

std::string expect_kv(std::istream& in, const std::string& key) {
    const std::string line = expect_line(in, key);
    const size_t sp = line.find(' ');
    const std::string k = line.substr(0, sp);
    if (k != key) throw CorruptPayloadError("expected '" + key + "', found '" + k + "'");
    return sp == std::string::npos ? "" : line.substr(sp + 1);
}

}  // namespace

void save_checkpoint(const std::string& path, Model& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open " + path + " for writing");
    const EncoderConfig& c = model.config;

    out << kMagic << '\n';
    out << "seed " << model.seed << '\n';
    out << "n_layers " << c.n_layers << '\n';
    out << "n_heads " << c.n_heads << '\n';
    out << "d_model " << c.d_model << '\n';
    out << "d_ff " << c.d_ff << '\n';
    out << "max_len " << c.max_len << '\n';
    out << "l_tag " << c.l_tag << '\n';
    out << "dropout_p " << fmt_double(c.dropout_p) << '\n';
    out << "read_scheme " << scheme_name(c.read_scheme) << '\n';
    out << "tag_dropout " << (c.tag_dropout ? 1 : 0) << '\n';
    out << "tag_injection " << (c.tag_injection ? 1 : 0) << '\n';
    out << "write_scheme " << scheme_name(model.crf.tags.kind) << '\n';
    out << "constrained " << (model.crf.constrained ? 1 : 0) << '\n';

    out << "labels " << model.labels().size() << '\n';
    for (const std::string& l : model.labels()) out << ordered_json(l).dump() << '\n';
    out << "tokens " << model.token_vocab.size() - 1 << '\n';
    for (size_t i = 1; i < model.token_vocab.size(); ++i)  // skip <unk>
        out << ordered_json(model.token_vocab[i]).dump() << '\n';

    std::vector<ad::Parameter> params = model.parameters();
    out << "params " << params.size() << '\n';
    for (ad::Parameter& p : params) {
        out << "param " << p.name << ' ' << p.value.shape().size();
        for (int d : p.value.shape()) out << ' ' << d;
        out << '\n';
        out.write(reinterpret_cast<const char*>(p.value.data()),
                  static_cast<std::streamsize>(sizeof(double)) * p.value.numel());
        out << '\n';
    }
    out << "end\n";
    if (!out) throw ParseError("failed writing " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);

    const std::string magic = expect_line(in, "format header");
    if (magic != kMagic)
        throw VersionMismatchError("unsupported checkpoint format: '" + magic + "'");

    auto next_int = [&in](const std::string& key) {
        const std::string v = expect_kv(in, key);
        try {
            return std::stoll(v);
        } catch (const std::exception&) {
            throw CorruptPayloadError("bad value for " + key + ": '" + v + "'");
        }
    };
    auto next_str = [&in](const std::string& key) { return expect_kv(in, key); };

    const std::uint64_t seed = static_cast<std::uint64_t>(next_int("seed"));
    EncoderConfig c;
    c.n_layers = static_cast<int>(next_int("n_layers"));
    c.n_heads = static_cast<int>(next_int("n_heads"));
    c.d_model = static_cast<int>(next_int("d_model"));
    c.d_ff = static_cast<int>(next_int("d_ff"));
    c.max_len = static_cast<int>(next_int("max_len"));
    c.l_tag = static_cast<int>(next_int("l_tag"));
    c.dropout_p = parse_double(next_str("dropout_p"), "dropout_p");
    c.read_scheme = scheme_from_name(next_str("read_scheme"));
    c.tag_dropout = next_int("tag_dropout") != 0;
    c.tag_injection = next_int("tag_injection") != 0;
    const SchemeKind write_scheme = scheme_from_name(next_str("write_scheme"));
    const bool constrained = next_int("constrained") != 0;

    auto read_strings = [&in](long long n, const std::string& what) {
        std::vector<std::string> out;
        for (long long i = 0; i < n; ++i) {
            const std::string line = expect_line(in, what);
            try {
                out.push_back(ordered_json::parse(line).get<std::string>());
            } catch (const nlohmann::json::exception& e) {
                throw CorruptPayloadError("bad " + what + " entry: " + e.what());
            }
        }
        return out;
    };
    const std::vector<std::string> labels = read_strings(next_int("labels"), "label");
    const std::vector<std::string> tokens = read_strings(next_int("tokens"), "token");

    Model model = make_model(c, labels, tokens, write_scheme, constrained, seed);

    const long long n_params = next_int("params");
    std::vector<ad::Parameter> params = model.parameters();
    if (n_params != static_cast<long long>(params.size()))
        throw ShapeMismatchError("checkpoint has " + std::to_string(n_params) +
                                 " parameters, model needs " + std::to_string(params.size()));
    for (ad::Parameter& p : params) {
        std::istringstream header(expect_line(in, "parameter record"));
        std::string kw, name;
        size_t rank = 0;
        header >> kw >> name >> rank;
        if (kw != "param" || !header)
            throw CorruptPayloadError("malformed parameter record for " + p.name);
        if (name != p.name)
            throw ShapeMismatchError("expected parameter " + p.name + ", found " + name);
        std::vector<int> shape(rank);
        for (size_t i = 0; i < rank; ++i) header >> shape[i];
        if (!header || shape != p.value.shape())
            throw ShapeMismatchError("shape mismatch for " + p.name);
        in.read(reinterpret_cast<char*>(p.value.data()),
                static_cast<std::streamsize>(sizeof(double)) * p.value.numel());
        if (in.gcount() != static_cast<std::streamsize>(sizeof(double)) * p.value.numel())
            throw CorruptPayloadError("truncated payload for " + p.name);
        const std::string trailer = expect_line(in, "payload terminator");
        if (!trailer.empty()) throw CorruptPayloadError("misaligned payload for " + p.name);
    }
    if (expect_line(in, "end marker") != "end")
        throw CorruptPayloadError("missing end marker");
    return model;
}

}  // namespace nestner
