#pragma once
// Immutable triple store.
//
// A KnowledgeGraph owns a canonical, duplicate-free triple list (sorted by
// serialized line) and derives every lookup index from it:
//   - subject/relation  -> objects
//   - relation/object   -> subjects
//   - relation          -> triple indices
//   - subject           -> triple indices
//   - relation          -> distinct literal texts (value inventory)
//   - relation/normalized literal text -> subjects (equality filter index)
//
// Triple file format: UTF-8, one triple per line, four tab-separated columns
// (subject, relation, object, kind) with kind in {ent, lit}. Lines starting
// with '#' are comments; blank lines are skipped.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "ehrqa/error.hpp"
#include "ehrqa/text.hpp"

namespace ehrqa {

class NodeId {
public:
    explicit NodeId(std::string path) : path_(std::move(path)) {
        if (path_.empty() || path_.front() != '/')
            throw InputError("node id must begin with '/': '" + path_ + "'");
        for (char c : path_)
            if (text::is_space(c)) throw InputError("node id contains whitespace: '" + path_ + "'");
    }

    const std::string& str() const noexcept { return path_; }
    auto operator<=>(const NodeId&) const = default;

private:
    std::string path_;
};

class Relation {
public:
    explicit Relation(std::string path) : path_(std::move(path)) {
        if (path_.empty() || path_.front() != '/')
            throw InputError("relation must begin with '/': '" + path_ + "'");
        if (path_.find_first_of("\t\n\r") != std::string::npos)
            throw InputError("relation contains a tab or newline");
    }

    const std::string& str() const noexcept { return path_; }
    auto operator<=>(const Relation&) const = default;

private:
    std::string path_;
};

// Accepts [sign] digits [. digits] [exponent] (or a leading '.'); the value
// must be finite. Anything else is non-numeric.
inline std::optional<double> parse_decimal(std::string_view s) {
    std::size_t i = 0;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
    std::size_t digits = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++digits;
    if (i < s.size() && s[i] == '.') {
        ++i;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++digits;
    }
    if (digits == 0) return std::nullopt;
    if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        ++i;
        if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
        std::size_t exp_digits = 0;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++exp_digits;
        if (exp_digits == 0) return std::nullopt;
    }
    if (i != s.size()) return std::nullopt;
    std::string buf(s);
    double v = std::strtod(buf.c_str(), nullptr);
    if (!std::isfinite(v)) return std::nullopt;
    return v;
}

class Literal {
public:
    explicit Literal(std::string text) : text_(std::move(text)), numeric_(parse_decimal(text_)) {
        if (text_.find_first_of("\t\n\r") != std::string::npos)
            throw InputError("literal contains a tab or newline");
    }

    const std::string& text() const noexcept { return text_; }
    const std::optional<double>& numeric_value() const noexcept { return numeric_; }

    bool operator==(const Literal& o) const { return text_ == o.text_; }
    auto operator<=>(const Literal& o) const { return text_ <=> o.text_; }

private:
    std::string text_;
    std::optional<double> numeric_;
};

using Object = std::variant<NodeId, Literal>;

inline bool is_entity(const Object& o) noexcept { return std::holds_alternative<NodeId>(o); }

inline const std::string& object_text(const Object& o) {
    return is_entity(o) ? std::get<NodeId>(o).str() : std::get<Literal>(o).text();
}

struct Triple {
    NodeId subject;
    Relation relation;
    Object object;

    std::string line() const {
        return subject.str() + '\t' + relation.str() + '\t' + object_text(object) + '\t' +
               (is_entity(object) ? "ent" : "lit");
    }

    bool operator==(const Triple& o) const {
        return subject == o.subject && relation == o.relation && object == o.object;
    }
};

class KnowledgeGraph {
public:
    KnowledgeGraph() = default;

    explicit KnowledgeGraph(std::vector<Triple> triples) {
        std::vector<std::pair<std::string, Triple>> keyed;
        keyed.reserve(triples.size());
        for (auto& t : triples) keyed.emplace_back(t.line(), std::move(t));
        std::sort(keyed.begin(), keyed.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        keyed.erase(std::unique(keyed.begin(), keyed.end(),
                                [](const auto& a, const auto& b) { return a.first == b.first; }),
                    keyed.end());
        triples_.reserve(keyed.size());
        for (auto& [_, t] : keyed) triples_.push_back(std::move(t));
        build_indexes();
    }

    std::span<const Triple> triples() const noexcept { return triples_; }
    std::size_t size() const noexcept { return triples_.size(); }
    bool empty() const noexcept { return triples_.empty(); }

    std::span<const Object> objects(const NodeId& s, const Relation& r) const {
        auto it = by_subject_relation_.find({s.str(), r.str()});
        if (it == by_subject_relation_.end()) return {};
        return it->second;
    }

    std::span<const NodeId> subjects(const Relation& r, const Object& o) const {
        auto it = by_relation_object_.find({r.str(), object_key(o)});
        if (it == by_relation_object_.end()) return {};
        return it->second;
    }

    // Indices into triples() of every triple with relation r.
    std::span<const std::size_t> triples_with(const Relation& r) const {
        auto it = by_relation_.find(r.str());
        if (it == by_relation_.end()) return {};
        return it->second;
    }

    std::span<const std::size_t> triples_of(const NodeId& s) const {
        auto it = by_subject_.find(s.str());
        if (it == by_subject_.end()) return {};
        return it->second;
    }

    // Distinct literal texts among objects of relation r, sorted.
    std::span<const std::string> value_inventory(const Relation& r) const {
        auto it = inventory_.find(r.str());
        if (it == inventory_.end()) return {};
        return it->second;
    }

    bool in_inventory(const Relation& r, std::string_view value) const {
        return !subjects_with_value(r, value).empty();
    }

    // Subjects s with a literal (s, r, v) where normalize(v) == normalize(value).
    std::span<const NodeId> subjects_with_value(const Relation& r, std::string_view value) const {
        auto it = by_normalized_value_.find({r.str(), text::normalize_literal(value)});
        if (it == by_normalized_value_.end()) return {};
        return it->second;
    }

    const std::vector<Relation>& relations() const noexcept { return relations_; }

    // Every node that appears as a subject or entity object, sorted.
    const std::vector<NodeId>& nodes() const noexcept { return nodes_; }

    bool operator==(const KnowledgeGraph& o) const { return triples_ == o.triples_; }

private:
    static std::string object_key(const Object& o) {
        return (is_entity(o) ? "e:" : "l:") + object_text(o);
    }

    template <class Map, class Key, class Value>
    static void push_unique(Map& m, const Key& k, const Value& v) {
        auto& list = m[k];
        if (std::find(list.begin(), list.end(), v) == list.end()) list.push_back(v);
    }

    void build_indexes() {
        std::map<std::string, std::set<std::string>> inventory;
        std::set<NodeId> nodes;
        std::set<std::string> relations;
        for (std::size_t i = 0; i < triples_.size(); ++i) {
            const auto& t = triples_[i];
            by_subject_relation_[{t.subject.str(), t.relation.str()}].push_back(t.object);
            push_unique(by_relation_object_, std::pair{t.relation.str(), object_key(t.object)},
                        t.subject);
            by_relation_[t.relation.str()].push_back(i);
            by_subject_[t.subject.str()].push_back(i);
            relations.insert(t.relation.str());
            nodes.insert(t.subject);
            if (is_entity(t.object)) {
                nodes.insert(std::get<NodeId>(t.object));
            } else {
                const auto& lit = std::get<Literal>(t.object);
                inventory[t.relation.str()].insert(lit.text());
                push_unique(by_normalized_value_,
                            std::pair{t.relation.str(), text::normalize_literal(lit.text())},
                            t.subject);
            }
        }
        for (auto& [r, values] : inventory) inventory_[r].assign(values.begin(), values.end());
        for (auto& [_, subjects] : by_relation_object_) std::sort(subjects.begin(), subjects.end());
        for (auto& [_, subjects] : by_normalized_value_) std::sort(subjects.begin(), subjects.end());
        nodes_.assign(nodes.begin(), nodes.end());
        for (const auto& r : relations) relations_.emplace_back(r);
    }

    std::vector<Triple> triples_;
    std::map<std::pair<std::string, std::string>, std::vector<Object>> by_subject_relation_;
    std::map<std::pair<std::string, std::string>, std::vector<NodeId>> by_relation_object_;
    std::map<std::pair<std::string, std::string>, std::vector<NodeId>> by_normalized_value_;
    std::map<std::string, std::vector<std::size_t>> by_relation_;
    std::map<std::string, std::vector<std::size_t>> by_subject_;
    std::map<std::string, std::vector<std::string>> inventory_;
    std::vector<Relation> relations_;
    std::vector<NodeId> nodes_;
};

inline KnowledgeGraph load_kg(std::string_view source) {
    std::vector<Triple> triples;
    auto all = text::lines(source);
    for (std::size_t n = 0; n < all.size(); ++n) {
        const auto& line = all[n];
        const int line_no = static_cast<int>(n) + 1;
        if (line.empty() || line.front() == '#') continue;
        auto cols = text::split(line, '\t');
        if (cols.size() != 4)
            throw ParseError(line_no, 1,
                             "expected 4 tab-separated columns, found " + std::to_string(cols.size()));
        try {
            NodeId subject(cols[0]);
            Relation relation(cols[1]);
            if (cols[3] == "ent")
                triples.push_back({std::move(subject), std::move(relation), NodeId(cols[2])});
            else if (cols[3] == "lit")
                triples.push_back({std::move(subject), std::move(relation), Literal(cols[2])});
            else
                throw InputError("object kind must be 'ent' or 'lit', found '" + cols[3] + "'");
        } catch (const InputError& e) {
            throw ParseError(line_no, 1, e.what());
        }
    }
    return KnowledgeGraph(std::move(triples));
}

inline KnowledgeGraph load_kg_file(const std::string& path) { return load_kg(text::read_file(path)); }

// Canonical form: one line per triple, lexicographically sorted.
inline std::string serialize_kg(const KnowledgeGraph& kg) {
    std::vector<std::string> lines;
    lines.reserve(kg.size());
    for (const auto& t : kg.triples()) lines.push_back(t.line());
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto& l : lines) {
        out += l;
        out += '\n';
    }
    return out;
}

}  // namespace ehrqa
