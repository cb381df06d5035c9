#pragma once
// Evaluator for programs over a KnowledgeGraph.
//
// Semantics:
//   down(E, r)   objects o with (s, r, o), s in E, o an entity; as a set
//   up(r, E)     subjects s with (s, r, o), o in E; as a set
//   litset(E, r) literal objects of (s, r, v), s in E; a bag
//   filters      existential: s is kept iff SOME (s, rel, v) satisfies the
//                predicate. equal compares trimmed, case-folded text; the
//                numeric comparisons skip non-numeric v and require a numeric
//                threshold.
//   max/min/avg  over the numeric members of the bag; no numeric member is a
//                runtime error (the engine's NULL answer).

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ehrqa/dsl.hpp"
#include "ehrqa/error.hpp"
#include "ehrqa/kg.hpp"
#include "ehrqa/text.hpp"

namespace ehrqa {

// Sorted and duplicate-free.
struct EntSet {
    std::vector<NodeId> items;
    bool operator==(const EntSet&) const = default;
};

// Multiplicity preserved; order is evaluation order.
struct LitSet {
    std::vector<Literal> items;
    bool operator==(const LitSet&) const = default;
};

struct LitSets {
    LitSet first;
    LitSet second;
    bool operator==(const LitSets&) const = default;
};

using Value = std::variant<EntSet, LitSet, LitSets, std::int64_t, double, Relation, Literal>;

inline ValueType value_type(const Value& v) {
    switch (v.index()) {
    case 0: return ValueType::EntSet;
    case 1: return ValueType::LitSet;
    case 2: return ValueType::LitSets;
    case 3: return ValueType::Int;
    case 4: return ValueType::Float;
    case 5: return ValueType::Rel;
    default: return ValueType::Lit;
    }
}

inline EntSet make_entset(std::vector<NodeId> nodes) {
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    return EntSet{std::move(nodes)};
}

// ---------------------------------------------------------------------------
// Per-operation evaluation

inline EntSet eval_down(const EntSet& in, const Relation& r, const KnowledgeGraph& kg) {
    std::vector<NodeId> out;
    for (const auto& s : in.items)
        for (const auto& o : kg.objects(s, r))
            if (is_entity(o)) out.push_back(std::get<NodeId>(o));
    return make_entset(std::move(out));
}

inline EntSet eval_up(const Relation& r, const EntSet& in, const KnowledgeGraph& kg) {
    std::vector<NodeId> out;
    for (const auto& o : in.items) {
        auto subjects = kg.subjects(r, Object{o});
        out.insert(out.end(), subjects.begin(), subjects.end());
    }
    return make_entset(std::move(out));
}

inline LitSet eval_litset(const EntSet& in, const Relation& r, const KnowledgeGraph& kg) {
    LitSet out;
    for (const auto& s : in.items)
        for (const auto& o : kg.objects(s, r))
            if (!is_entity(o)) out.items.push_back(std::get<Literal>(o));
    return out;
}

inline bool is_traversal(OpKind k) {
    return k == OpKind::GenEntsetDown || k == OpKind::GenEntsetUp || k == OpKind::GenLitset;
}

inline bool is_filter(OpKind k) {
    return k == OpKind::GenEntsetEqual || k == OpKind::GenEntsetAtleast || k == OpKind::GenEntsetAtmost ||
           k == OpKind::GenEntsetLess || k == OpKind::GenEntsetMore;
}

inline bool is_numeric_filter(OpKind k) { return is_filter(k) && k != OpKind::GenEntsetEqual; }

inline Value eval_traversal(OpKind kind, const std::vector<Value>& args, const KnowledgeGraph& kg) {
    switch (kind) {
    case OpKind::GenEntsetDown:
        return eval_down(std::get<EntSet>(args.at(0)), std::get<Relation>(args.at(1)), kg);
    case OpKind::GenEntsetUp:
        return eval_up(std::get<Relation>(args.at(0)), std::get<EntSet>(args.at(1)), kg);
    case OpKind::GenLitset:
        return eval_litset(std::get<EntSet>(args.at(0)), std::get<Relation>(args.at(1)), kg);
    default:
        throw RuntimeError("not a traversal: " + std::string(signature(kind).name));
    }
}

inline bool numeric_predicate(OpKind kind, double v, double threshold) {
    switch (kind) {
    case OpKind::GenEntsetAtleast: return v >= threshold;
    case OpKind::GenEntsetAtmost: return v <= threshold;
    case OpKind::GenEntsetLess: return v < threshold;
    case OpKind::GenEntsetMore: return v > threshold;
    default: return false;
    }
}

inline EntSet eval_filter(OpKind kind, const Relation& rel, const Literal& lit, const KnowledgeGraph& kg) {
    if (kind == OpKind::GenEntsetEqual) {
        auto subjects = kg.subjects_with_value(rel, lit.text());
        return EntSet{{subjects.begin(), subjects.end()}};
    }
    if (!is_filter(kind)) throw RuntimeError("not a filter: " + std::string(signature(kind).name));
    if (!lit.numeric_value()) throw RuntimeError("non-numeric threshold '" + lit.text() + "'");
    const double threshold = *lit.numeric_value();
    std::vector<NodeId> out;
    const auto triples = kg.triples();
    for (std::size_t i : kg.triples_with(rel)) {
        const auto& t = triples[i];
        if (is_entity(t.object)) continue;
        const auto& v = std::get<Literal>(t.object).numeric_value();
        if (v && numeric_predicate(kind, *v, threshold)) out.push_back(t.subject);
    }
    return make_entset(std::move(out));
}

inline std::vector<double> numeric_members(const LitSet& s) {
    std::vector<double> out;
    for (const auto& l : s.items)
        if (l.numeric_value()) out.push_back(*l.numeric_value());
    return out;
}

inline Value eval_aggregate(OpKind kind, const std::vector<Value>& args) {
    switch (kind) {
    case OpKind::CountEntset:
        return static_cast<std::int64_t>(std::get<EntSet>(args.at(0)).items.size());
    case OpKind::IntersectEntsets: {
        const auto& a = std::get<EntSet>(args.at(0)).items;
        const auto& b = std::get<EntSet>(args.at(1)).items;
        EntSet out;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out.items));
        return out;
    }
    case OpKind::MaximumLitset:
    case OpKind::MinimumLitset:
    case OpKind::AverageLitset: {
        auto nums = numeric_members(std::get<LitSet>(args.at(0)));
        if (nums.empty()) throw RuntimeError("empty numeric aggregate");
        if (kind == OpKind::MaximumLitset) return *std::max_element(nums.begin(), nums.end());
        if (kind == OpKind::MinimumLitset) return *std::min_element(nums.begin(), nums.end());
        return std::accumulate(nums.begin(), nums.end(), 0.0) / static_cast<double>(nums.size());
    }
    case OpKind::ConcatLitsets:
        return LitSets{std::get<LitSet>(args.at(0)), std::get<LitSet>(args.at(1))};
    default:
        throw RuntimeError("not an aggregate: " + std::string(signature(kind).name));
    }
}

// ---------------------------------------------------------------------------
// Program execution

struct ExecutionTrace {
    std::vector<Value> registers;
    std::optional<Value> answer;
    bool ok = false;
    std::string error;
    int failing_step = -1;
};

inline Value eval_step(const Step& step, const std::vector<Value>& registers, const KnowledgeGraph& kg) {
    std::vector<Value> args;
    args.reserve(step.args.size());
    for (const auto& a : step.args) {
        if (const auto* r = std::get_if<Register>(&a))
            args.push_back(registers.at(static_cast<std::size_t>(r->index)));
        else if (const auto* rel = std::get_if<Relation>(&a))
            args.emplace_back(*rel);
        else
            args.emplace_back(std::get<Literal>(a));
    }
    if (is_traversal(step.op)) return eval_traversal(step.op, args, kg);
    if (is_filter(step.op))
        return eval_filter(step.op, std::get<Relation>(args.at(0)), std::get<Literal>(args.at(1)), kg);
    return eval_aggregate(step.op, args);
}

inline ExecutionTrace exec_program(const Program& p, const KnowledgeGraph& kg) {
    ExecutionTrace trace;
    trace.registers.reserve(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        try {
            trace.registers.push_back(eval_step(p.steps()[i], trace.registers, kg));
        } catch (const RuntimeError& e) {
            trace.error = e.what();
            trace.failing_step = static_cast<int>(i);
            return trace;
        }
    }
    trace.ok = true;
    trace.answer = trace.registers.back();
    return trace;
}

// Execution failed, or the answer holds nothing.
inline bool is_null_answer(const ExecutionTrace& t) {
    if (!t.ok || !t.answer) return true;
    if (const auto* e = std::get_if<EntSet>(&*t.answer)) return e->items.empty();
    if (const auto* l = std::get_if<LitSet>(&*t.answer)) return l->items.empty();
    if (const auto* ls = std::get_if<LitSets>(&*t.answer))
        return ls->first.items.empty() && ls->second.items.empty();
    return false;
}

// ---------------------------------------------------------------------------
// Answer serialization and comparison

enum class FloatFormat { Display, Exact };

namespace detail {

inline std::string sorted_block(std::vector<std::string> lines) {
    std::sort(lines.begin(), lines.end());
    return text::join(lines, "\n");
}

inline std::string litset_block(const LitSet& s) {
    std::vector<std::string> lines;
    for (const auto& l : s.items) lines.push_back(l.text());
    return sorted_block(std::move(lines));
}

}  // namespace detail

// Sets and bags as sorted newline-separated strings, LitSets as two blocks
// separated by a blank line, Int as decimal, Float with 6 significant digits
// (Display) or round-trip precision (Exact).
inline std::string serialize_answer(const Value& v, FloatFormat ff = FloatFormat::Display) {
    return std::visit(
        [&](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, EntSet>) {
                std::vector<std::string> lines;
                for (const auto& n : x.items) lines.push_back(n.str());
                return detail::sorted_block(std::move(lines));
            } else if constexpr (std::is_same_v<T, LitSet>) {
                return detail::litset_block(x);
            } else if constexpr (std::is_same_v<T, LitSets>) {
                return detail::litset_block(x.first) + "\n\n" + detail::litset_block(x.second);
            } else if constexpr (std::is_same_v<T, std::int64_t>) {
                return std::to_string(x);
            } else if constexpr (std::is_same_v<T, double>) {
                return ff == FloatFormat::Display ? text::format_display(x) : text::format_exact(x);
            } else if constexpr (std::is_same_v<T, Relation>) {
                return x.str();
            } else {
                return x.text();
            }
        },
        v);
}

inline bool floats_match(double a, double b, double rel_tol = 1e-6) {
    if (a == b) return true;
    return std::abs(a - b) <= rel_tol * std::max(std::abs(a), std::abs(b));
}

// Canonical comparison: sets as sets, bags as sorted multisets, floats within
// a relative tolerance.
inline bool answers_match(const Value& a, const Value& b) {
    if (a.index() != b.index()) return false;
    if (const auto* x = std::get_if<double>(&a)) return floats_match(*x, std::get<double>(b));
    if (const auto* x = std::get_if<LitSet>(&a))
        return detail::litset_block(*x) == detail::litset_block(std::get<LitSet>(b));
    if (const auto* x = std::get_if<LitSets>(&a)) {
        const auto& y = std::get<LitSets>(b);
        return detail::litset_block(x->first) == detail::litset_block(y.first) &&
               detail::litset_block(x->second) == detail::litset_block(y.second);
    }
    return a == b;
}

}  // namespace ehrqa
