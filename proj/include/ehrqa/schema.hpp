#pragma once
// Class-level view of a KnowledgeGraph plus the surface vocabulary used to
// render and read questions.
//
// A node's class is the first segment of its path ("/patient/7" -> "patient").
// Entity-valued relations induce class links; literal-valued relations are
// grouped per (class, relation) with their own value inventories.

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ehrqa/kg.hpp"

namespace ehrqa {

inline std::string class_of(const NodeId& n) {
    const auto& p = n.str();
    auto end = p.find('/', 1);
    return p.substr(1, end == std::string::npos ? std::string::npos : end - 1);
}

// One hop between classes. Downward hops follow a link from subject to
// object (gen_entset_down); upward hops go back (gen_entset_up).
struct PathStep {
    Relation relation;
    bool downward;
    std::string to_class;
};

// A literal relation as it occurs on one class.
struct ClassRelation {
    std::string cls;
    Relation rel;

    auto operator<=>(const ClassRelation&) const = default;
    std::string key() const { return cls + ":" + rel.str(); }
};

class GraphSchema {
public:
    explicit GraphSchema(const KnowledgeGraph& kg, Relation id_relation = Relation("/id"))
        : kg_(&kg), id_relation_(std::move(id_relation)) {
        std::map<std::string, std::set<NodeId>> nodes;
        std::map<ClassRelation, std::set<std::string>> values;
        std::set<std::string> non_numeric;
        for (const auto& t : kg.triples()) {
            const auto sc = class_of(t.subject);
            nodes[sc].insert(t.subject);
            if (is_entity(t.object)) {
                const auto& o = std::get<NodeId>(t.object);
                const auto oc = class_of(o);
                nodes[oc].insert(o);
                links_.insert({sc, t.relation.str(), oc});
            } else {
                const auto& lit = std::get<Literal>(t.object);
                if (t.relation == id_relation_) {
                    ids_.insert_or_assign(std::pair{sc, lit.text()}, t.subject);
                    id_classes_.insert(sc);
                    continue;
                }
                values[{sc, t.relation}].insert(lit.text());
                if (!lit.numeric_value()) non_numeric.insert(t.relation.str());
            }
        }
        for (auto& [cls, ns] : nodes) {
            classes_.push_back(cls);
            nodes_[cls].assign(ns.begin(), ns.end());
        }
        for (auto& [cr, vs] : values) {
            inventory_[cr].assign(vs.begin(), vs.end());
            literal_relations_[cr.cls].push_back(cr.rel);
            relation_classes_[cr.rel.str()].push_back(cr.cls);
        }
        for (const auto& [rel, _] : relation_classes_)
            if (!non_numeric.count(rel)) numeric_.insert(rel);
    }

    const KnowledgeGraph& kg() const noexcept { return *kg_; }
    const Relation& id_relation() const noexcept { return id_relation_; }
    const std::vector<std::string>& classes() const noexcept { return classes_; }

    bool has_class(const std::string& cls) const { return nodes_.count(cls) > 0; }

    const std::vector<NodeId>& nodes_of(const std::string& cls) const {
        static const std::vector<NodeId> none;
        auto it = nodes_.find(cls);
        return it == nodes_.end() ? none : it->second;
    }

    // Literal relations (excluding the id relation) present on a class.
    const std::vector<Relation>& literal_relations(const std::string& cls) const {
        static const std::vector<Relation> none;
        auto it = literal_relations_.find(cls);
        return it == literal_relations_.end() ? none : it->second;
    }

    // Classes carrying literal relation r.
    const std::vector<std::string>& classes_with(const Relation& r) const {
        static const std::vector<std::string> none;
        auto it = relation_classes_.find(r.str());
        return it == relation_classes_.end() ? none : it->second;
    }

    std::vector<ClassRelation> all_literal_relations() const {
        std::vector<ClassRelation> out;
        for (const auto& [cr, _] : inventory_) out.push_back(cr);
        return out;
    }

    // Distinct literal texts of r on nodes of cls, sorted.
    const std::vector<std::string>& inventory(const ClassRelation& cr) const {
        static const std::vector<std::string> none;
        auto it = inventory_.find(cr);
        return it == inventory_.end() ? none : it->second;
    }

    bool in_inventory(const ClassRelation& cr, std::string_view value) const {
        const auto norm = text::normalize_literal(value);
        for (const auto& v : inventory(cr))
            if (text::normalize_literal(v) == norm) return true;
        return false;
    }

    // The inventory entry equal to value under literal normalization.
    std::optional<std::string> canonical_value(const ClassRelation& cr, std::string_view value) const {
        const auto norm = text::normalize_literal(value);
        for (const auto& v : inventory(cr))
            if (text::normalize_literal(v) == norm) return v;
        return std::nullopt;
    }

    // A relation is numeric when every literal object it has is numeric.
    bool is_numeric(const Relation& r) const { return numeric_.count(r.str()) > 0; }

    bool has_id(const std::string& cls) const { return id_classes_.count(cls) > 0; }

    std::optional<NodeId> node_by_id(const std::string& cls, const std::string& id) const {
        auto it = ids_.find({cls, id});
        if (it == ids_.end()) return std::nullopt;
        return it->second;
    }

    std::optional<std::string> id_of(const NodeId& n) const {
        for (const auto& o : kg_->objects(n, id_relation_))
            if (!is_entity(o)) return std::get<Literal>(o).text();
        return std::nullopt;
    }

    // Classes with outgoing links or ids: the ones a question can count or
    // address directly.
    std::vector<std::string> entity_classes() const {
        std::set<std::string> out(id_classes_.begin(), id_classes_.end());
        for (const auto& l : links_) out.insert(l.from);
        return {out.begin(), out.end()};
    }

    // Outgoing entity links of a class, sorted by relation.
    std::vector<PathStep> links_from(const std::string& cls) const {
        std::vector<PathStep> out;
        for (const auto& l : links_)
            if (l.from == cls) out.push_back({Relation(l.relation), true, l.to});
        return out;
    }

    // Shortest class path (BFS over links in both directions). Empty when
    // from == to; nullopt when unreachable. Deterministic: neighbours are
    // visited in (relation, direction, class) order.
    std::optional<std::vector<PathStep>> path(const std::string& from, const std::string& to) const {
        if (from == to) return std::vector<PathStep>{};
        std::map<std::string, std::pair<std::string, PathStep>> parent;
        std::deque<std::string> queue{from};
        std::set<std::string> seen{from};
        while (!queue.empty()) {
            auto cur = queue.front();
            queue.pop_front();
            for (const auto& step : neighbours(cur)) {
                if (seen.count(step.to_class)) continue;
                seen.insert(step.to_class);
                parent.emplace(step.to_class, std::pair{cur, step});
                if (step.to_class == to) {
                    std::vector<PathStep> out;
                    std::string at = to;
                    while (at != from) {
                        const auto& [prev, s] = parent.at(at);
                        out.push_back(s);
                        at = prev;
                    }
                    return std::vector<PathStep>(out.rbegin(), out.rend());
                }
                queue.push_back(step.to_class);
            }
        }
        return std::nullopt;
    }

private:
    struct Link {
        std::string from;
        std::string relation;
        std::string to;
        auto operator<=>(const Link&) const = default;
    };

    std::vector<PathStep> neighbours(const std::string& cls) const {
        std::vector<PathStep> out;
        for (const auto& l : links_) {
            if (l.from == cls) out.push_back({Relation(l.relation), true, l.to});
            if (l.to == cls) out.push_back({Relation(l.relation), false, l.from});
        }
        return out;
    }

    const KnowledgeGraph* kg_;
    Relation id_relation_;
    std::vector<std::string> classes_;
    std::map<std::string, std::vector<NodeId>> nodes_;
    std::set<Link> links_;
    std::map<ClassRelation, std::vector<std::string>> inventory_;
    std::map<std::string, std::vector<Relation>> literal_relations_;
    std::map<std::string, std::vector<std::string>> relation_classes_;
    std::set<std::string> numeric_;
    std::set<std::string> id_classes_;
    std::map<std::pair<std::string, std::string>, NodeId> ids_;
};

// Surface words. Relation words default to the path without the leading '/'
// and with '_' read as a space; class words default to the class name.
struct Vocabulary {
    std::map<std::string, std::string> class_words;
    std::map<std::string, std::string> class_plurals;
    // A word standing for several relations ("title" -> short and long title).
    std::map<std::string, std::vector<Relation>> aliases;

    static Vocabulary defaults() {
        Vocabulary v;
        v.aliases.emplace("title", std::vector{Relation("/short_title"), Relation("/long_title")});
        return v;
    }

    static std::string relation_word(const Relation& r) {
        std::string w = r.str().substr(1);
        for (auto& c : w)
            if (c == '_') c = ' ';
        return w;
    }

    std::string class_word(const std::string& cls) const {
        auto it = class_words.find(cls);
        return it == class_words.end() ? cls : it->second;
    }

    std::string plural(const std::string& cls) const {
        auto it = class_plurals.find(cls);
        if (it != class_plurals.end()) return it->second;
        auto w = class_word(cls);
        return w + (!w.empty() && w.back() == 's' ? "es" : "s");
    }
};

}  // namespace ehrqa
