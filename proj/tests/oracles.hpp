#pragma once
// Reference implementations used only by tests. Each one is written
// independently of the library code it checks: full scans instead of
// indexes, enumeration instead of dynamic programming, all pairs instead of
// ranks.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ehrqa/ehrqa.hpp"

namespace oracle {

using namespace ehrqa;

inline std::string fold(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n\f\v");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n\f\v");
    std::string out = s.substr(b, e - b + 1);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// Plain decimal: [+-]digits[.digits][e[+-]digits], at least one digit.
inline std::optional<double> number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    for (char c : s)
        if (!(std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+' || c == 'e' || c == 'E'))
            return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

struct Failure {
    std::string reason;
};

// Full-scan interpreter over the raw triple list.
class NaiveInterpreter {
public:
    explicit NaiveInterpreter(const KnowledgeGraph& kg) : triples_(kg.triples().begin(), kg.triples().end()) {}

    ExecutionTrace run(const Program& p) const {
        ExecutionTrace t;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const auto& s = p.steps()[i];
            auto v = step(s, t.registers);
            if (!v) {
                t.failing_step = static_cast<int>(i);
                t.error = "failed";
                return t;
            }
            t.registers.push_back(*v);
        }
        t.ok = true;
        t.answer = t.registers.back();
        return t;
    }

private:
    static EntSet to_set(const std::set<NodeId>& s) { return EntSet{{s.begin(), s.end()}}; }

    std::optional<Value> step(const Step& s, const std::vector<Value>& regs) const {
        auto reg = [&](std::size_t k) -> const Value& { return regs.at(static_cast<std::size_t>(std::get<Register>(s.args[k]).index)); };
        auto rel = [&](std::size_t k) { return std::get<Relation>(s.args[k]); };
        auto lit = [&](std::size_t k) { return std::get<Literal>(s.args[k]).text(); };
        switch (s.op) {
        case OpKind::GenEntsetDown: {
            const auto& in = std::get<EntSet>(reg(0)).items;
            const auto r = rel(1);
            std::set<NodeId> out;
            for (const auto& t : triples_)
                if (t.relation == r && is_entity(t.object) && std::find(in.begin(), in.end(), t.subject) != in.end())
                    out.insert(std::get<NodeId>(t.object));
            return Value{to_set(out)};
        }
        case OpKind::GenEntsetUp: {
            const auto r = rel(0);
            const auto& in = std::get<EntSet>(reg(1)).items;
            std::set<NodeId> out;
            for (const auto& t : triples_)
                if (t.relation == r && is_entity(t.object) &&
                    std::find(in.begin(), in.end(), std::get<NodeId>(t.object)) != in.end())
                    out.insert(t.subject);
            return Value{to_set(out)};
        }
        case OpKind::GenLitset: {
            const auto& in = std::get<EntSet>(reg(0)).items;
            const auto r = rel(1);
            LitSet out;
            for (const auto& n : in)
                for (const auto& t : triples_)
                    if (t.subject == n && t.relation == r && !is_entity(t.object))
                        out.items.push_back(std::get<Literal>(t.object));
            return Value{out};
        }
        case OpKind::GenEntsetEqual: {
            const auto r = rel(0);
            const auto want = fold(lit(1));
            std::set<NodeId> out;
            for (const auto& t : triples_)
                if (t.relation == r && !is_entity(t.object) && fold(std::get<Literal>(t.object).text()) == want)
                    out.insert(t.subject);
            return Value{to_set(out)};
        }
        case OpKind::GenEntsetAtleast:
        case OpKind::GenEntsetAtmost:
        case OpKind::GenEntsetLess:
        case OpKind::GenEntsetMore: {
            const auto r = rel(0);
            const auto th = number(lit(1));
            if (!th) return std::nullopt;
            std::set<NodeId> out;
            for (const auto& t : triples_) {
                if (t.relation != r || is_entity(t.object)) continue;
                const auto v = number(std::get<Literal>(t.object).text());
                if (!v) continue;
                bool keep = false;
                if (s.op == OpKind::GenEntsetAtleast) keep = *v >= *th;
                if (s.op == OpKind::GenEntsetAtmost) keep = *v <= *th;
                if (s.op == OpKind::GenEntsetLess) keep = *v < *th;
                if (s.op == OpKind::GenEntsetMore) keep = *v > *th;
                if (keep) out.insert(t.subject);
            }
            return Value{to_set(out)};
        }
        case OpKind::CountEntset:
            return Value{static_cast<std::int64_t>(std::get<EntSet>(reg(0)).items.size())};
        case OpKind::IntersectEntsets: {
            const auto& a = std::get<EntSet>(reg(0)).items;
            const auto& b = std::get<EntSet>(reg(1)).items;
            std::set<NodeId> out;
            for (const auto& x : a)
                if (std::find(b.begin(), b.end(), x) != b.end()) out.insert(x);
            return Value{to_set(out)};
        }
        case OpKind::MaximumLitset:
        case OpKind::MinimumLitset:
        case OpKind::AverageLitset: {
            std::vector<double> nums;
            for (const auto& l : std::get<LitSet>(reg(0)).items)
                if (auto v = number(l.text())) nums.push_back(*v);
            if (nums.empty()) return std::nullopt;
            double acc = nums[0];
            if (s.op == OpKind::AverageLitset) {
                acc = 0;
                for (double v : nums) acc += v;
                return Value{acc / static_cast<double>(nums.size())};
            }
            for (double v : nums) acc = s.op == OpKind::MaximumLitset ? std::max(acc, v) : std::min(acc, v);
            return Value{acc};
        }
        case OpKind::ConcatLitsets:
            return Value{LitSets{std::get<LitSet>(reg(0)), std::get<LitSet>(reg(1))}};
        }
        return std::nullopt;
    }

    std::vector<Triple> triples_;
};

// Small random graph: three classes linked a -> b -> c, numeric and
// categorical literals, some multi-valued.
inline KnowledgeGraph random_kg(std::mt19937_64& rng, std::size_t max_triples = 200) {
    auto u = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    std::vector<Triple> ts;
    const char* cats[] = {"red", "Green", "blue ", "red car", "x"};
    const int na = u(2, 6), nb = u(2, 8), nc = u(2, 8);
    auto node = [](const char* c, int i) { return NodeId(std::string("/") + c + "/" + std::to_string(i)); };
    for (int i = 0; i < na && ts.size() < max_triples; ++i) {
        ts.push_back({node("a", i), Relation("/num"), Literal(std::to_string(u(0, 9)))});
        ts.push_back({node("a", i), Relation("/cat"), Literal(cats[u(0, 4)])});
        for (int k = u(0, 3); k > 0; --k) ts.push_back({node("a", i), Relation("/to_b"), node("b", u(0, nb - 1))});
    }
    for (int i = 0; i < nb && ts.size() < max_triples; ++i) {
        for (int k = u(0, 2); k > 0; --k)
            ts.push_back({node("b", i), Relation("/num"), Literal(std::to_string(u(0, 9)) + (u(0, 1) ? ".5" : ""))});
        if (u(0, 1)) ts.push_back({node("b", i), Relation("/cat"), Literal(cats[u(0, 4)])});
        if (u(0, 2) == 0) ts.push_back({node("b", i), Relation("/num"), Literal("n/a")});
        for (int k = u(0, 2); k > 0; --k) ts.push_back({node("b", i), Relation("/to_c"), node("c", u(0, nc - 1))});
    }
    for (int i = 0; i < nc && ts.size() < max_triples; ++i)
        ts.push_back({node("c", i), Relation("/val"), Literal(std::to_string(u(-5, 5)))});
    if (ts.size() > max_triples) ts.erase(ts.begin() + static_cast<std::ptrdiff_t>(max_triples), ts.end());
    return KnowledgeGraph(std::move(ts));
}

// Random well-typed program of 1..max_steps steps.
inline Program random_program(std::mt19937_64& rng, const KnowledgeGraph& kg, int max_steps = 6) {
    auto u = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    std::vector<std::string> rels{"/num", "/cat", "/to_b", "/to_c", "/val", "/absent"};
    std::vector<std::string> lits{"3", "0", "9", "2.5", "red", "GREEN", "blue", "n/a", "-1", "x"};
    for (const auto& t : kg.triples())
        if (!is_entity(t.object) && u(0, 9) == 0) lits.push_back(std::get<Literal>(t.object).text());
    auto pick = [&](const std::vector<std::string>& v) { return v[static_cast<std::size_t>(u(0, static_cast<int>(v.size()) - 1))]; };

    ProgramBuilder b;
    std::vector<std::pair<Register, ValueType>> regs;
    auto of_type = [&](ValueType t) {
        std::vector<Register> out;
        for (const auto& [r, ty] : regs)
            if (ty == t) out.push_back(r);
        return out;
    };
    const int n = u(1, max_steps);
    for (int i = 0; i < n; ++i) {
        const auto ents = of_type(ValueType::EntSet);
        const auto lsets = of_type(ValueType::LitSet);
        std::vector<OpKind> options{OpKind::GenEntsetEqual, OpKind::GenEntsetAtleast, OpKind::GenEntsetAtmost,
                                    OpKind::GenEntsetLess, OpKind::GenEntsetMore};
        if (!ents.empty()) {
            for (int k = 0; k < 3; ++k)
                options.insert(options.end(), {OpKind::GenEntsetDown, OpKind::GenEntsetUp, OpKind::GenLitset,
                                               OpKind::CountEntset, OpKind::IntersectEntsets});
        }
        if (!lsets.empty())
            for (int k = 0; k < 3; ++k)
                options.insert(options.end(), {OpKind::MaximumLitset, OpKind::MinimumLitset, OpKind::AverageLitset,
                                               OpKind::ConcatLitsets});
        const auto op = options[static_cast<std::size_t>(u(0, static_cast<int>(options.size()) - 1))];
        auto any = [&](const std::vector<Register>& v) { return v[static_cast<std::size_t>(u(0, static_cast<int>(v.size()) - 1))]; };
        std::vector<Arg> args;
        switch (op) {
        case OpKind::GenEntsetDown:
        case OpKind::GenLitset: args = {any(ents), Relation(pick(rels))}; break;
        case OpKind::GenEntsetUp: args = {Relation(pick(rels)), any(ents)}; break;
        case OpKind::CountEntset: args = {any(ents)}; break;
        case OpKind::IntersectEntsets: args = {any(ents), any(ents)}; break;
        case OpKind::MaximumLitset:
        case OpKind::MinimumLitset:
        case OpKind::AverageLitset: args = {any(lsets)}; break;
        case OpKind::ConcatLitsets: args = {any(lsets), any(lsets)}; break;
        default: args = {Relation(pick(rels)), Literal(pick(lits))}; break;
        }
        auto r = b.add(op, std::move(args));
        regs.emplace_back(r, signature(op).result);
    }
    return std::move(b).build();
}

// Longest common subsequence by enumerating subsequences of the shorter list.
inline std::size_t brute_lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    const auto& s = a.size() <= b.size() ? a : b;
    const auto& l = a.size() <= b.size() ? b : a;
    std::size_t best = 0;
    for (std::uint32_t mask = 0; mask < (1u << s.size()); ++mask) {
        std::vector<std::string> sub;
        for (std::size_t i = 0; i < s.size(); ++i)
            if (mask & (1u << i)) sub.push_back(s[i]);
        if (sub.size() <= best) continue;
        std::size_t j = 0;
        for (const auto& w : l)
            if (j < sub.size() && w == sub[j]) ++j;
        if (j == sub.size()) best = sub.size();
    }
    return best;
}

inline double brute_rouge(const std::string& c, const std::string& r) {
    auto words = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cur;
        for (char ch : s) {
            if (ch == ' ') {
                if (!cur.empty()) out.push_back(cur);
                cur.clear();
            } else {
                cur += ch;
            }
        }
        if (!cur.empty()) out.push_back(cur);
        return out;
    };
    const auto cw = words(c), rw = words(r);
    if (cw.empty() && rw.empty()) return 1.0;
    if (cw.empty() || rw.empty()) return 0.0;
    const double lcs = static_cast<double>(brute_lcs(cw, rw));
    if (lcs == 0) return 0.0;
    const double p = lcs / static_cast<double>(cw.size()), rc = lcs / static_cast<double>(rw.size());
    return 2 * p * rc / (p + rc);
}

inline double all_pairs_auroc(const std::vector<double>& s, const std::vector<int>& y) {
    double num = 0, pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[i] != 1 || y[j] != 0) continue;
            pairs += 1;
            if (s[i] > s[j]) num += 1;
            if (s[i] == s[j]) num += 0.5;
        }
    return num / pairs;
}

// Precision at each distinct threshold, weighted by the recall it adds.
inline double threshold_scan_aupr(const std::vector<double>& s, const std::vector<int>& y) {
    std::vector<double> th(s.begin(), s.end());
    std::sort(th.begin(), th.end(), std::greater<>());
    th.erase(std::unique(th.begin(), th.end()), th.end());
    double positives = 0;
    for (int v : y) positives += v;
    double ap = 0, prev_recall = 0;
    for (double t : th) {
        double tp = 0, flagged = 0;
        for (std::size_t i = 0; i < s.size(); ++i)
            if (s[i] >= t) {
                flagged += 1;
                tp += y[i];
            }
        const double recall = tp / positives;
        ap += (recall - prev_recall) * (tp / flagged);
        prev_recall = recall;
    }
    return ap;
}

// Program-level uncertainty straight from the definitions.
inline ProgramLevel program_level(const std::vector<std::vector<double>>& member_probs, const std::vector<int>& lengths) {
    const std::size_t B = member_probs.size(), M = member_probs[0].size();
    std::vector<double> w(B);
    double z = 0;
    for (std::size_t b = 0; b < B; ++b) {
        double g = 0;
        for (double p : member_probs[b]) g += std::log(p);
        w[b] = std::exp(g / static_cast<double>(M));
        z += w[b];
    }
    ProgramLevel out;
    for (std::size_t b = 0; b < B; ++b) {
        double mean = 0;
        for (double p : member_probs[b]) mean += p / static_cast<double>(M);
        const double wb = w[b] / z, L = lengths[b];
        out.total += -wb * std::log(mean) / L;
        for (double p : member_probs[b]) out.model += wb * (std::log(mean) - std::log(p)) / L / static_cast<double>(M);
    }
    out.data = out.total - out.model;
    return out;
}

}  // namespace oracle
