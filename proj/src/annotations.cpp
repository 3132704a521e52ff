#include "nestner/annotations.hpp"

#include <algorithm>
#include <sstream>

namespace nestner {

bool spans_overlap(const Span& a, const Span& b) {
    return a.begin < b.end && b.begin < a.end;
}

std::string scheme_name(SchemeKind kind) {
    return kind == SchemeKind::Bio ? "BIO" : "BIOUL";
}

SchemeKind scheme_from_name(const std::string& name) {
    if (name == "BIO" || name == "bio") return SchemeKind::Bio;
    if (name == "BIOUL" || name == "bioul") return SchemeKind::Bioul;
    throw SchemaError("unknown tag scheme: " + name);
}

int TagSet::id(TagPrefix prefix, int label_index) const {
    if (prefix == TagPrefix::O) return 0;
    int offset = 0;
    switch (prefix) {
        case TagPrefix::B: offset = 0; break;
        case TagPrefix::I: offset = 1; break;
        case TagPrefix::U: offset = 2; break;
        case TagPrefix::L: offset = 3; break;
        default: break;
    }
    if (kind == SchemeKind::Bio && offset > 1)
        throw SchemaError("tag prefix not valid for BIO scheme");
    return 1 + stride() * label_index + offset;
}

TagPrefix TagSet::prefix_of(int tag_id) const {
    if (tag_id == 0) return TagPrefix::O;
    const int offset = (tag_id - 1) % stride();
    static constexpr TagPrefix kOrder[4] = {TagPrefix::B, TagPrefix::I, TagPrefix::U,
                                            TagPrefix::L};
    return kOrder[offset];
}

int TagSet::label_of(int tag_id) const {
    if (tag_id == 0) return -1;
    return (tag_id - 1) / stride();
}

int TagSet::label_index(const std::string& label) const {
    for (size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) return static_cast<int>(i);
    return -1;
}

std::string TagSet::name(int tag_id) const {
    if (tag_id == 0) return "O";
    const char* prefixes = "BIUL";
    const int offset = (tag_id - 1) % stride();
    static constexpr int kOrder[4] = {0, 1, 2, 3};
    std::string out(1, prefixes[kOrder[offset]]);
    out += "-";
    out += labels[static_cast<size_t>(label_of(tag_id))];
    return out;
}

std::map<Mention, int> compute_depths(const MentionSet& mentions) {
    // Strictly contained mentions are strictly shorter, so processing by
    // increasing length makes every dependency available.
    std::vector<Mention> order(mentions.begin(), mentions.end());
    std::sort(order.begin(), order.end(), [](const Mention& a, const Mention& b) {
        if (a.span.length() != b.span.length()) return a.span.length() < b.span.length();
        return a < b;
    });
    std::map<Mention, int> depth;
    for (const Mention& m : order) {
        int d = 0;
        for (const Mention& inner : order) {
            if (inner == m) continue;
            if (m.span.contains(inner.span)) d = std::max(d, depth.at(inner) + 1);
        }
        depth[m] = d;
    }
    return depth;
}

TagSequence encode_mentions(const MentionSet& mentions, const TagSet& scheme, int length) {
    for (auto it = mentions.begin(); it != mentions.end(); ++it) {
        auto jt = it;
        for (++jt; jt != mentions.end(); ++jt) {
            if (spans_overlap(it->span, jt->span)) {
                std::ostringstream msg;
                msg << "overlapping mentions [" << it->span.begin << "," << it->span.end
                    << ")/" << it->label << " and [" << jt->span.begin << "," << jt->span.end
                    << ")/" << jt->label;
                throw OverlapError(msg.str());
            }
        }
    }

    TagSequence seq{scheme, std::vector<int>(static_cast<size_t>(length), 0)};
    for (const Mention& m : mentions) {
        if (m.span.begin < 0 || m.span.end > length || m.span.begin >= m.span.end)
            throw LengthMismatchError("mention span outside sequence of length " +
                                      std::to_string(length));
        const int label = scheme.label_index(m.label);
        if (label < 0) throw SchemaError("label not in tag set: " + m.label);
        const int b = m.span.begin;
        const int e = m.span.end;
        if (scheme.kind == SchemeKind::Bio) {
            seq.ids[static_cast<size_t>(b)] = scheme.id(TagPrefix::B, label);
            for (int t = b + 1; t < e; ++t)
                seq.ids[static_cast<size_t>(t)] = scheme.id(TagPrefix::I, label);
        } else {
            if (e - b == 1) {
                seq.ids[static_cast<size_t>(b)] = scheme.id(TagPrefix::U, label);
            } else {
                seq.ids[static_cast<size_t>(b)] = scheme.id(TagPrefix::B, label);
                for (int t = b + 1; t < e - 1; ++t)
                    seq.ids[static_cast<size_t>(t)] = scheme.id(TagPrefix::I, label);
                seq.ids[static_cast<size_t>(e - 1)] = scheme.id(TagPrefix::L, label);
            }
        }
    }
    return seq;
}

MentionSet decode_tags(const TagSequence& tags) {
    MentionSet out;
    const TagSet& scheme = tags.scheme;
    int open_begin = -1;
    int open_label = -1;

    auto close_open = [&](int end) {
        if (open_label >= 0) {
            out.insert(Mention(open_begin, end, scheme.labels[static_cast<size_t>(open_label)]));
            open_label = -1;
        }
    };

    for (int t = 0; t < tags.length(); ++t) {
        const int id = tags.ids[static_cast<size_t>(t)];
        const TagPrefix prefix = scheme.prefix_of(id);
        const int label = scheme.label_of(id);
        switch (prefix) {
            case TagPrefix::O:
                close_open(t);
                break;
            case TagPrefix::B:
                close_open(t);
                open_begin = t;
                open_label = label;
                break;
            case TagPrefix::U:
                close_open(t);
                out.insert(Mention(t, t + 1, scheme.labels[static_cast<size_t>(label)]));
                break;
            case TagPrefix::I:
                if (open_label == label) break;  // extend
                close_open(t);                   // repair: orphan I opens
                open_begin = t;
                open_label = label;
                break;
            case TagPrefix::L:
                if (open_label == label) {
                    close_open(t + 1);
                } else {
                    close_open(t);  // repair: orphan L is a unit mention
                    out.insert(Mention(t, t + 1, scheme.labels[static_cast<size_t>(label)]));
                }
                break;
        }
    }
    close_open(tags.length());
    return out;
}

ObservedTags build_observed(const std::vector<MentionSet>& history, const TagSet& read_scheme,
                            int length) {
    ObservedTags out;
    out.layers.reserve(history.size());
    for (const MentionSet& layer : history)
        out.layers.push_back(encode_mentions(layer, read_scheme, length));
    return out;
}

}  // namespace nestner
