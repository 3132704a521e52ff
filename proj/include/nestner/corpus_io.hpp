#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nestner/annotations.hpp"
#include "nestner/model.hpp"

namespace nestner {

struct Corpus {
    std::vector<Sentence> sentences;
    std::vector<std::string> labels;       // sorted, unique
    std::vector<std::string> token_vocab;  // sorted, unique, no <unk>

    size_t size() const { return sentences.size(); }
    bool empty() const { return sentences.empty(); }

    // recompute labels/token_vocab from the sentences
    void rebuild_vocabularies();
};

// One JSON object per line:
//   {"tokens": ["after", "anesthesia"],
//    "mentions": [{"begin": 1, "end": 2, "label": "Treatment"}],
//    "doc_id": "doc-7"}
// write_jsonl emits mentions in Mention order and fields in the order above,
// so writing what was read reproduces the bytes.
Corpus read_jsonl(const std::string& path);
void write_jsonl(const Corpus& corpus, const std::string& path);

// Whitespace tokenization with punctuation split off as single-character
// tokens; returns (token, character offset) pairs.
std::vector<std::pair<std::string, int>> tokenize_with_offsets(const std::string& text);

struct BratWarnings {
    int snapped = 0;         // annotations widened to token boundaries
    int discontinuous = 0;   // semicolon offset lists, skipped
    int unmapped = 0;        // spans outside any line or covering no token, skipped
};

// BRAT standoff: every .txt in the directory is a document, each line a
// sentence; a sibling .ann holds "T<n>\t<TYPE> <begin> <end>\t<surface>"
// records with document-level character offsets. Offsets that fall inside a
// token are snapped outward.
Corpus read_brat(const std::string& directory, BratWarnings* warnings = nullptr);

struct SplitResult {
    Corpus train, dev, test;
};

// Order-preserving split: the last floor(test_fraction . N) sentences are
// the test set, the last floor(dev_fraction . rest) of the remainder the dev
// set. Each part gets its own vocabularies.
SplitResult split_last_fraction(const Corpus& corpus, double test_fraction = 0.10,
                                double dev_fraction = 0.10);

Corpus slice(const Corpus& corpus, size_t begin, size_t end);

// Synthetic nested-entity corpus over a closed token grammar in which every
// mention is recoverable from surface tokens alone:
//   items  - a single token from a per-class pool, or an opener/closer token
//            pair (label ITM, or ITMa/ITMb/... for several classes)
//   groups - "(" items ")"      label GRP, contains >= 1 item   (depth >= 1)
//   blocks - "[" group items "]" label BLK, contains >= 1 group (depth >= 2)
//   supers - "{" block items "}" label SUP                      (depth = 3)
// Innermost mentions never overlap each other, so the flat recall ceiling of
// the corpus is exactly D0 / total. Every third sentence is forced to
// contain a unit of the deepest kind so all depths up to max_depth are
// realized for any seed.
Corpus generate_synthetic(int n_sentences, int max_depth, int label_count, std::uint64_t seed);

// Versioned container, one file: a text header (format version, every config
// field, label and token vocabularies) followed by named parameter records
// with raw little-endian f64 payloads.
void save_checkpoint(const std::string& path, Model& model);
Model load_checkpoint(const std::string& path);

}  // namespace nestner
