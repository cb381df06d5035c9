#pragma once
// The eight question templates, their canonical program skeletons, surface
// rendering, and the reverse direction (matching a question against the
// templates and resolving slot words to KG relations).
//
// Skeletons, by template:
//   1 what is RELATION of ENTITY?                       id filter, walk, litset
//   2 what is RELATION1 and RELATION2 of ENTITY?        id filter, 2x(walk, litset), concat
//   3 what is RELATION1 of RELATION2 VALUE?             filter, walk, litset
//   4 what is RELATION1 and RELATION2 of RELATION3 VALUE?  filter, 2x(walk, litset), concat
//   5 number of ENTITY whose RELATION CONDITION LITERAL    filter, walk, count
//   6 ... two conditions                                 2x(filter, walk), intersect, count
//   7 AGGR RELATION1 of ENTITY whose ... one condition   filter, walk, walk, litset, AGGR
//   8 AGGR ... two conditions                            2x(filter, walk), intersect, walk, litset, AGGR
// A "walk" is the shortest class path between two classes (possibly empty).

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ehrqa/dsl.hpp"
#include "ehrqa/error.hpp"
#include "ehrqa/kg.hpp"
#include "ehrqa/schema.hpp"

namespace ehrqa {

enum class Comparator { Equal, Greater, Less, AtMost, AtLeast };

inline constexpr std::array<Comparator, 5> all_comparators{Comparator::Equal, Comparator::Greater, Comparator::Less,
                                                           Comparator::AtMost, Comparator::AtLeast};

inline std::string_view comparator_word(Comparator c) {
    switch (c) {
    case Comparator::Equal: return "equal to";
    case Comparator::Greater: return "greater than";
    case Comparator::Less: return "less than";
    case Comparator::AtMost: return "less than or equal to";
    case Comparator::AtLeast: return "greater than or equal to";
    }
    return "";
}

inline std::optional<Comparator> comparator_from_word(std::string_view w) {
    for (auto c : all_comparators)
        if (comparator_word(c) == w) return c;
    return std::nullopt;
}

inline OpKind filter_op(Comparator c) {
    switch (c) {
    case Comparator::Equal: return OpKind::GenEntsetEqual;
    case Comparator::Greater: return OpKind::GenEntsetMore;
    case Comparator::Less: return OpKind::GenEntsetLess;
    case Comparator::AtMost: return OpKind::GenEntsetAtmost;
    case Comparator::AtLeast: return OpKind::GenEntsetAtleast;
    }
    return OpKind::GenEntsetEqual;
}

enum class Aggregate { Minimum, Maximum, Average };

inline constexpr std::array<Aggregate, 3> all_aggregates{Aggregate::Minimum, Aggregate::Maximum, Aggregate::Average};

inline std::string_view aggregate_word(Aggregate a) {
    switch (a) {
    case Aggregate::Minimum: return "minimum";
    case Aggregate::Maximum: return "maximum";
    case Aggregate::Average: return "average";
    }
    return "";
}

inline std::optional<Aggregate> aggregate_from_word(std::string_view w) {
    for (auto a : all_aggregates)
        if (aggregate_word(a) == w) return a;
    return std::nullopt;
}

inline OpKind aggregate_op(Aggregate a) {
    switch (a) {
    case Aggregate::Minimum: return OpKind::MinimumLitset;
    case Aggregate::Maximum: return OpKind::MaximumLitset;
    case Aggregate::Average: return OpKind::AverageLitset;
    }
    return OpKind::AverageLitset;
}

// ---------------------------------------------------------------------------
// Templates

enum class EntitySlot { None, Node, Class };
enum class Finale { Retrieve, Concat, Count, Aggregate };

struct ConditionSlots {
    std::string relation;
    std::string condition;  // empty: equality with a VALUE slot
    std::string value;
};

struct QuestionTemplate {
    int id;
    std::string pattern;
    EntitySlot entity;
    std::vector<std::string> asked;
    std::vector<ConditionSlots> conditions;
    Finale finale;
};

inline const std::vector<QuestionTemplate>& question_templates() {
    static const std::vector<QuestionTemplate> templates{
        {1, "what is {RELATION} of {ENTITY}?", EntitySlot::Node, {"RELATION"}, {}, Finale::Retrieve},
        {2, "what is {RELATION1} and {RELATION2} of {ENTITY}?", EntitySlot::Node, {"RELATION1", "RELATION2"}, {},
         Finale::Concat},
        {3, "what is {RELATION1} of {RELATION2} {VALUE}?", EntitySlot::None, {"RELATION1"},
         {{"RELATION2", "", "VALUE"}}, Finale::Retrieve},
        {4, "what is {RELATION1} and {RELATION2} of {RELATION3} {VALUE}?", EntitySlot::None,
         {"RELATION1", "RELATION2"}, {{"RELATION3", "", "VALUE"}}, Finale::Concat},
        {5, "what is the number of {ENTITY} whose {RELATION} {CONDITION} {LITERAL}?", EntitySlot::Class, {},
         {{"RELATION", "CONDITION", "LITERAL"}}, Finale::Count},
        {6,
         "what is the number of {ENTITY} whose {RELATION1} {CONDITION1} {LITERAL1} and {RELATION2} {CONDITION2} "
         "{LITERAL2}?",
         EntitySlot::Class,
         {},
         {{"RELATION1", "CONDITION1", "LITERAL1"}, {"RELATION2", "CONDITION2", "LITERAL2"}},
         Finale::Count},
        {7, "what is {AGGR} {RELATION1} of {ENTITY} whose {RELATION2} {CONDITION} {LITERAL}?", EntitySlot::Class,
         {"RELATION1"}, {{"RELATION2", "CONDITION", "LITERAL"}}, Finale::Aggregate},
        {8,
         "what is {AGGR} {RELATION1} of {ENTITY} whose {RELATION2} {CONDITION1} {LITERAL1} and {RELATION3} "
         "{CONDITION2} {LITERAL2}?",
         EntitySlot::Class,
         {"RELATION1"},
         {{"RELATION2", "CONDITION1", "LITERAL1"}, {"RELATION3", "CONDITION2", "LITERAL2"}},
         Finale::Aggregate},
    };
    return templates;
}

inline const QuestionTemplate& question_template(int id) {
    if (id < 1 || id > 8) throw GenerationError("template id must be in 1..8, got " + std::to_string(id));
    return question_templates()[static_cast<std::size_t>(id - 1)];
}

// ---------------------------------------------------------------------------
// Bindings and program construction

struct ConditionBinding {
    ClassRelation target;
    Comparator cmp = Comparator::Equal;
    std::string value;
};

struct Bindings {
    int template_id = 1;
    std::string entity_class;  // Node and Class templates
    std::string entity_id;     // Node templates
    std::vector<ClassRelation> asked;
    std::vector<ConditionBinding> conditions;
    Aggregate aggr = Aggregate::Average;
};

namespace detail {

inline Register walk(ProgramBuilder& b, Register cur, const std::vector<PathStep>& path) {
    for (const auto& step : path) {
        if (step.downward)
            cur = b.add(OpKind::GenEntsetDown, {cur, step.relation});
        else
            cur = b.add(OpKind::GenEntsetUp, {step.relation, cur});
    }
    return cur;
}

}  // namespace detail

// Canonical program for a binding; nullopt when a needed class path does not
// exist or the binding does not fit the template.
inline std::optional<Program> build_program(const GraphSchema& schema, const Bindings& b) {
    const auto& t = question_template(b.template_id);
    if (b.asked.size() != t.asked.size() || b.conditions.size() != t.conditions.size()) return std::nullopt;
    ProgramBuilder pb;
    Register anchor{0};
    std::string anchor_class;

    auto filter = [&](const ConditionBinding& c) {
        return pb.add(filter_op(c.cmp), {c.target.rel, Literal(c.value)});
    };

    switch (t.entity) {
    case EntitySlot::Node:
        anchor = pb.add(OpKind::GenEntsetEqual, {schema.id_relation(), Literal(b.entity_id)});
        anchor_class = b.entity_class;
        break;
    case EntitySlot::None:
        anchor = filter(b.conditions.at(0));
        anchor_class = b.conditions.at(0).target.cls;
        break;
    case EntitySlot::Class: {
        anchor_class = b.entity_class;
        std::optional<Register> acc;
        for (const auto& c : b.conditions) {
            auto path = schema.path(c.target.cls, anchor_class);
            if (!path) return std::nullopt;
            auto r = detail::walk(pb, filter(c), *path);
            acc = acc ? pb.add(OpKind::IntersectEntsets, {*acc, r}) : r;
        }
        anchor = *acc;
        break;
    }
    }

    auto litset_of = [&](const ClassRelation& target) -> std::optional<Register> {
        auto path = schema.path(anchor_class, target.cls);
        if (!path) return std::nullopt;
        auto r = detail::walk(pb, anchor, *path);
        return pb.add(OpKind::GenLitset, {r, target.rel});
    };

    switch (t.finale) {
    case Finale::Retrieve:
        if (!litset_of(b.asked[0])) return std::nullopt;
        break;
    case Finale::Concat: {
        auto a = litset_of(b.asked[0]);
        if (!a) return std::nullopt;
        auto c = litset_of(b.asked[1]);
        if (!c) return std::nullopt;
        pb.add(OpKind::ConcatLitsets, {*a, *c});
        break;
    }
    case Finale::Count:
        pb.add(OpKind::CountEntset, {anchor});
        break;
    case Finale::Aggregate: {
        auto a = litset_of(b.asked[0]);
        if (!a) return std::nullopt;
        pb.add(aggregate_op(b.aggr), {*a});
        break;
    }
    }
    return std::move(pb).build();
}

// ---------------------------------------------------------------------------
// Surface rendering

using SlotMap = std::map<std::string, std::string>;

inline SlotMap default_surface(const Vocabulary& vocab, const Bindings& b) {
    const auto& t = question_template(b.template_id);
    SlotMap slots;
    if (t.entity == EntitySlot::Node)
        slots["ENTITY"] = vocab.class_word(b.entity_class) + " " + b.entity_id;
    else if (t.entity == EntitySlot::Class)
        slots["ENTITY"] = vocab.plural(b.entity_class);
    for (std::size_t i = 0; i < t.asked.size(); ++i) slots[t.asked[i]] = Vocabulary::relation_word(b.asked[i].rel);
    for (std::size_t i = 0; i < t.conditions.size(); ++i) {
        const auto& cs = t.conditions[i];
        const auto& c = b.conditions[i];
        slots[cs.relation] = Vocabulary::relation_word(c.target.rel);
        if (!cs.condition.empty()) slots[cs.condition] = std::string(comparator_word(c.cmp));
        slots[cs.value] = c.value;
    }
    if (t.finale == Finale::Aggregate) slots["AGGR"] = std::string(aggregate_word(b.aggr));
    return slots;
}

inline std::string render_question(const QuestionTemplate& t, const SlotMap& slots) {
    std::string out;
    const auto& p = t.pattern;
    std::size_t i = 0;
    while (i < p.size()) {
        if (p[i] == '{') {
            auto end = p.find('}', i);
            auto name = p.substr(i + 1, end - i - 1);
            auto it = slots.find(name);
            if (it == slots.end()) throw GenerationError("template " + std::to_string(t.id) + " slot " + name + " unbound");
            out += it->second;
            i = end + 1;
        } else {
            out += p[i++];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reading questions back

// Maps slot words to KG artifacts.
class SlotResolver {
public:
    SlotResolver(const GraphSchema& schema, Vocabulary vocab) : schema_(&schema), vocab_(std::move(vocab)) {
        for (const auto& cr : schema.all_literal_relations()) words_.emplace(Vocabulary::relation_word(cr.rel), cr.rel);
        for (const auto& cls : schema.classes()) {
            class_words_.emplace(vocab_.class_word(cls), cls);
            plurals_.emplace(vocab_.plural(cls), cls);
        }
    }

    const GraphSchema& schema() const noexcept { return *schema_; }
    const Vocabulary& vocabulary() const noexcept { return vocab_; }

    std::optional<Relation> relation_from_word(const std::string& w) const {
        auto it = words_.find(w);
        if (it == words_.end()) return std::nullopt;
        return it->second;
    }

    std::optional<std::string> class_from_word(const std::string& w) const {
        auto it = class_words_.find(w);
        if (it == class_words_.end()) return std::nullopt;
        return it->second;
    }

    std::optional<std::string> class_from_plural(const std::string& w) const {
        auto it = plurals_.find(w);
        if (it == plurals_.end()) return std::nullopt;
        return it->second;
    }

    // Candidate (class, relation) pairs for a relation slot. A relation word
    // names one relation (possibly on several classes); an alias names
    // several; a class word leaves the relation unstated and stands for every
    // literal relation of that class.
    std::vector<ClassRelation> resolve_relation(const std::string& w) const {
        std::vector<ClassRelation> out;
        auto add_relation = [&](const Relation& r) {
            for (const auto& c : schema_->classes_with(r)) out.push_back({c, r});
        };
        if (auto r = relation_from_word(w)) {
            add_relation(*r);
        } else if (auto a = vocab_.aliases.find(w); a != vocab_.aliases.end()) {
            for (const auto& r : a->second) add_relation(r);
        } else if (auto c = class_from_word(w)) {
            for (const auto& r : schema_->literal_relations(*c)) out.push_back({*c, r});
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    // "patient 12" -> (patient, "12") when such a node exists.
    std::optional<std::pair<std::string, std::string>> resolve_entity_node(const std::string& w) const {
        auto sp = w.rfind(' ');
        if (sp == std::string::npos) return std::nullopt;
        auto cls = class_from_word(w.substr(0, sp));
        if (!cls) return std::nullopt;
        auto id = w.substr(sp + 1);
        if (!schema_->node_by_id(*cls, id)) return std::nullopt;
        return std::pair{*cls, id};
    }

private:
    const GraphSchema* schema_;
    Vocabulary vocab_;
    std::map<std::string, Relation> words_;
    std::map<std::string, std::string> class_words_;
    std::map<std::string, std::string> plurals_;
};

struct ParsedQuestion {
    int template_id;
    SlotMap slots;
};

namespace detail {

struct PatternPart {
    bool slot;
    std::string text;
};

inline std::vector<PatternPart> pattern_parts(const std::string& p) {
    std::vector<PatternPart> parts;
    std::size_t i = 0;
    while (i < p.size()) {
        if (p[i] == '{') {
            auto end = p.find('}', i);
            parts.push_back({true, p.substr(i + 1, end - i - 1)});
            i = end + 1;
        } else {
            auto end = p.find('{', i);
            if (end == std::string::npos) end = p.size();
            parts.push_back({false, p.substr(i, end - i)});
            i = end;
        }
    }
    return parts;
}

using SlotCheck = std::function<bool(const std::string& slot, const std::string& text, const SlotMap& bound)>;

// Backtracking match; every slot is followed by a literal part in the
// templates, so each slot boundary is an occurrence of that literal. Longer
// slot texts are tried first ("less than or equal to" before "less than",
// "admission type" before "admission").
inline bool match_parts(const std::vector<PatternPart>& parts, std::size_t k, std::string_view q,
                        std::size_t pos, const SlotCheck& check, SlotMap& out) {
    if (k == parts.size()) return pos == q.size();
    const auto& part = parts[k];
    if (!part.slot) {
        if (q.substr(pos, part.text.size()) != part.text) return false;
        return match_parts(parts, k + 1, q, pos + part.text.size(), check, out);
    }
    const auto& next = parts.at(k + 1).text;
    std::vector<std::size_t> ends;
    for (auto at = q.find(next, pos + 1); at != std::string_view::npos; at = q.find(next, at + 1)) ends.push_back(at);
    for (auto e = ends.rbegin(); e != ends.rend(); ++e) {
        const auto at = *e;
        std::string value(q.substr(pos, at - pos));
        if (!check(part.text, value, out)) continue;
        out[part.text] = value;
        if (match_parts(parts, k + 1, q, at, check, out)) return true;
        out.erase(part.text);
    }
    return false;
}

}  // namespace detail

// Tries the templates most-specific first and returns the first match whose
// slots all validate.
inline std::optional<ParsedQuestion> match_question(std::string_view question, const SlotResolver& resolver) {
    static constexpr std::array<int, 8> order{8, 7, 6, 5, 2, 1, 4, 3};
    for (int id : order) {
        const auto& t = question_template(id);
        auto check = [&](const std::string& slot, const std::string& text, const SlotMap& bound) -> bool {
            if (text.empty() || text.front() == ' ' || text.back() == ' ') return false;
            if (slot == "ENTITY") {
                if (t.entity == EntitySlot::Node) return resolver.resolve_entity_node(text).has_value();
                return resolver.class_from_plural(text).has_value();
            }
            if (slot == "AGGR") return aggregate_from_word(text).has_value();
            if (slot.rfind("CONDITION", 0) == 0) return comparator_from_word(text).has_value();
            if (slot.rfind("RELATION", 0) == 0) return !resolver.resolve_relation(text).empty();
            // A threshold after an ordering comparator must be a number.
            for (const auto& cs : t.conditions) {
                if (cs.value != slot || cs.condition.empty()) continue;
                auto it = bound.find(cs.condition);
                if (it != bound.end() && it->second != comparator_word(Comparator::Equal))
                    return parse_decimal(text).has_value();
            }
            return true;
        };
        SlotMap slots;
        if (detail::match_parts(detail::pattern_parts(t.pattern), 0, question, 0, check, slots))
            return ParsedQuestion{id, std::move(slots)};
    }
    return std::nullopt;
}

}  // namespace ehrqa
