#pragma once

#include <compare>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "nestner/errors.hpp"

namespace nestner {

// Token span, end-exclusive. Character offsets from external formats are
// converted to token indices at ingestion; everything past that point is
// token-indexed.
struct Span {
    int begin = 0;
    int end = 0;

    int length() const { return end - begin; }

    // strict containment: other is a subset of this and not equal
    bool contains(const Span& other) const {
        return begin <= other.begin && other.end <= end && !(*this == other);
    }

    auto operator<=>(const Span&) const = default;
};

bool spans_overlap(const Span& a, const Span& b);

// A labeled span. The default ordering (begin, end, label) doubles as the
// selection tie-break used throughout the ordering module: earlier begin
// first, then shorter (same begin implies end order = length order), then
// label.
struct Mention {
    Span span;
    std::string label;

    Mention() = default;
    Mention(int begin, int end, std::string lbl) : span{begin, end}, label(std::move(lbl)) {}
    Mention(Span s, std::string lbl) : span(s), label(std::move(lbl)) {}

    auto operator<=>(const Mention&) const = default;
};

using MentionSet = std::set<Mention>;

struct Sentence {
    std::vector<std::string> tokens;
    MentionSet mentions;
    std::string doc_id;

    int length() const { return static_cast<int>(tokens.size()); }
};

// ---------------------------------------------------------------------------
// tag schemes

enum class SchemeKind { Bio, Bioul };

enum class TagPrefix { O, B, I, U, L };

std::string scheme_name(SchemeKind kind);
SchemeKind scheme_from_name(const std::string& name);

// Tag vocabulary for one scheme over a closed label set.
// Ids: 0 = O; label k occupies a contiguous block, prefix order B, I (BIO)
// or B, I, U, L (BIOUL).
struct TagSet {
    SchemeKind kind = SchemeKind::Bio;
    std::vector<std::string> labels;

    int stride() const { return kind == SchemeKind::Bio ? 2 : 4; }
    int size() const { return 1 + stride() * static_cast<int>(labels.size()); }

    int o_id() const { return 0; }
    int id(TagPrefix prefix, int label_index) const;
    TagPrefix prefix_of(int tag_id) const;
    int label_of(int tag_id) const;  // -1 for O
    int label_index(const std::string& label) const;  // -1 if unknown
    std::string name(int tag_id) const;  // "O", "B-TIME", ...

    bool operator==(const TagSet&) const = default;
};

struct TagSequence {
    TagSet scheme;
    std::vector<int> ids;

    int length() const { return static_cast<int>(ids.size()); }
};

// Per-depth stack of tag sequences describing previously extracted mentions,
// oldest layer first. Empty at the first iteration.
struct ObservedTags {
    std::vector<TagSequence> layers;

    int depth() const { return static_cast<int>(layers.size()); }
    bool empty() const { return layers.empty(); }
};

// ---------------------------------------------------------------------------
// operations

// depth(m) = 0 if m strictly contains no other mention of the set, else
// 1 + max depth over strictly contained mentions. Labels play no part in
// containment.
std::map<Mention, int> compute_depths(const MentionSet& mentions);

// Mentions must be pairwise disjoint (equal spans with different labels
// count as overlapping). Throws OverlapError otherwise.
TagSequence encode_mentions(const MentionSet& mentions, const TagSet& scheme, int length);

// Total decode with repair: orphan I/L opens a new entity; an open entity
// closes at label change, O, B/U, or sequence end (a BIOUL entity missing
// its L is still emitted). decode(encode(M)) == M for any valid disjoint M.
MentionSet decode_tags(const TagSequence& tags);

ObservedTags build_observed(const std::vector<MentionSet>& history, const TagSet& read_scheme,
                            int length);

}  // namespace nestner
