#pragma once
// Condition-value recovery: equality filters whose literal is not a value of
// the filtered relation get the most ROUGE-L-similar value that is.

#include <string>
#include <string_view>
#include <vector>

#include "ehrqa/dsl.hpp"
#include "ehrqa/interp.hpp"
#include "ehrqa/kg.hpp"
#include "ehrqa/text.hpp"

namespace ehrqa {

inline std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

// Word-level ROUGE-L F1 (beta = 1) over whitespace-split tokens.
inline double rouge_l(std::string_view candidate, std::string_view reference) {
    const auto c = text::split_words(candidate);
    const auto r = text::split_words(reference);
    if (c.empty() && r.empty()) return 1.0;
    if (c.empty() || r.empty()) return 0.0;
    const auto lcs = static_cast<double>(lcs_length(c, r));
    if (lcs == 0) return 0.0;
    const double recall = lcs / static_cast<double>(r.size());
    const double precision = lcs / static_cast<double>(c.size());
    return 2 * precision * recall / (precision + recall);
}

struct Replacement {
    int step;
    int arg;
    std::string original;
    std::string recovered;
    double score;
};

struct RecoveryReport {
    std::vector<Replacement> replacements;
    // Steps left unchanged because their relation has no literal values.
    std::vector<int> flagged_steps;
    Program program;
};

// Best inventory value for a literal: highest rouge_l, ties to the
// lexicographically smallest value (the inventory is sorted).
struct RecoveredValue {
    std::string value;
    double score;
};

inline std::optional<RecoveredValue> best_inventory_match(std::span<const std::string> inventory,
                                                         std::string_view literal) {
    std::optional<RecoveredValue> best;
    const auto needle = text::casefold(literal);
    for (const auto& v : inventory) {
        const double s = rouge_l(needle, text::casefold(v));
        if (!best || s > best->score) best = RecoveredValue{v, s};
    }
    return best;
}

inline RecoveryReport recover_program(const Program& p, const KnowledgeGraph& kg) {
    std::vector<Step> steps = p.steps();
    RecoveryReport report{{}, {}, p};
    for (std::size_t i = 0; i < steps.size(); ++i) {
        auto& s = steps[i];
        if (s.op != OpKind::GenEntsetEqual) continue;
        const auto& rel = std::get<Relation>(s.args[0]);
        const auto& lit = std::get<Literal>(s.args[1]);
        if (kg.in_inventory(rel, lit.text())) continue;
        auto best = best_inventory_match(kg.value_inventory(rel), lit.text());
        if (!best) {
            report.flagged_steps.push_back(static_cast<int>(i));
            continue;
        }
        report.replacements.push_back({static_cast<int>(i), 1, lit.text(), best->value, best->score});
        s.args[1] = Literal(best->value);
    }
    if (!report.replacements.empty()) report.program = Program::from_steps(std::move(steps));
    return report;
}

}  // namespace ehrqa
