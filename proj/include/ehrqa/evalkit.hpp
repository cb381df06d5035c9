#pragma once
// Evaluation: execution accuracy, the ambiguity benchmark, and the oracle
// top-k recommendation curve.
//
// Benchmark questions use templates 3, 5 and 7 with one condition, phrased so
// that the condition is
//   none   named by a relation word of a single (class, relation) and an
//          exact value
//   mild   named by a class word, a relation word shared across classes or an
//          alias, with the value present under exactly one of the denoted
//          relations; or a one-letter typo in a multi-word value
//   high   named as above with the value present under two or more of them,
//          so more than one program is a correct reading
// Labels are checked against the linkings of the question: a none question
// has one candidate program, a mild one exactly one exact linking (or none,
// for typos that recovery repairs), a high one at least two.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ehrqa/dsl.hpp"
#include "ehrqa/error.hpp"
#include "ehrqa/interp.hpp"
#include "ehrqa/kg.hpp"
#include "ehrqa/questions.hpp"
#include "ehrqa/records.hpp"
#include "ehrqa/recovery.hpp"
#include "ehrqa/schema.hpp"
#include "ehrqa/surrogate.hpp"
#include "ehrqa/text.hpp"
#include "ehrqa/uncertainty.hpp"

namespace ehrqa {

struct EvalCase {
    std::string question_id;
    std::string question;
    Program gold;
    Value answer;
    AmbiguityLabel label = AmbiguityLabel::None;
    std::string mechanism;
};

// A prediction is correct iff it executes to a non-NULL answer matching the
// gold answer.
inline bool prediction_correct(const std::optional<Program>& prediction, const EvalCase& c,
                               const KnowledgeGraph& kg) {
    if (!prediction) return false;
    const auto trace = exec_program(*prediction, kg);
    if (is_null_answer(trace)) return false;
    return answers_match(*trace.answer, c.answer);
}

inline double execution_accuracy(const std::vector<std::optional<Program>>& predictions,
                                 const std::vector<EvalCase>& cases, const KnowledgeGraph& kg) {
    if (predictions.size() != cases.size()) throw InputError("predictions and cases differ in length");
    if (cases.empty()) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < cases.size(); ++i) correct += prediction_correct(predictions[i], cases[i], kg);
    return static_cast<double>(correct) / static_cast<double>(cases.size());
}

// accuracy[k-1] = fraction of cases with a correct program among the first k.
inline std::vector<double> oracle_topk_curve(const std::vector<std::vector<Program>>& beams,
                                             const std::vector<EvalCase>& cases, const KnowledgeGraph& kg,
                                             int B) {
    if (beams.size() != cases.size()) throw InputError("beam lists and cases differ in length");
    if (B < 1) throw InputError("beam width must be at least 1");
    std::vector<double> curve(static_cast<std::size_t>(B), 0.0);
    if (cases.empty()) return curve;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        if (beams[i].empty()) throw InputError("case " + cases[i].question_id + " has no beams");
        std::size_t first = static_cast<std::size_t>(B);
        for (std::size_t k = 0; k < beams[i].size() && k < first; ++k)
            if (prediction_correct(beams[i][k], cases[i], kg)) first = k;
        for (std::size_t k = first; k < curve.size(); ++k) curve[k] += 1;
    }
    for (auto& v : curve) v /= static_cast<double>(cases.size());
    return curve;
}

// ---------------------------------------------------------------------------
// Benchmark construction

struct StrataCounts {
    int none = 0;
    int mild = 0;
    int high = 0;
    int total() const { return none + mild + high; }
};

// Two thirds unambiguous; the ambiguous third split mild:high = 174:49.
inline StrataCounts default_strata(int n) {
    StrataCounts s;
    const int ambiguous = n / 3;
    s.high = static_cast<int>(std::lround(ambiguous * 49.0 / 223.0));
    s.mild = ambiguous - s.high;
    s.none = n - ambiguous;
    return s;
}

struct BenchmarkOptions {
    StrataCounts strata{400, 150, 50};
    std::uint64_t seed = 1;
    Vocabulary vocab = Vocabulary::defaults();
    int attempts_per_case = 50;
};

namespace detail {

// A way of stating a condition: the relation-slot word, the value, and the
// relation the gold program filters on.
struct Phrasing {
    std::string word;
    std::string value;
    ClassRelation gold;
    AmbiguityLabel label;
    std::string mechanism;
};

struct PhrasingPools {
    std::map<AmbiguityLabel, std::map<std::string, std::vector<Phrasing>>> by_label;  // label -> mechanism -> list
};

inline PhrasingPools enumerate_phrasings(const SlotResolver& resolver) {
    const auto& schema = resolver.schema();
    const auto& vocab = resolver.vocabulary();
    PhrasingPools pools;
    for (const auto& cr : schema.all_literal_relations()) {
        if (schema.is_numeric(cr.rel)) continue;
        std::vector<std::pair<std::string, std::string>> words;  // word, mechanism
        const auto rel_word = Vocabulary::relation_word(cr.rel);
        words.emplace_back(rel_word, schema.classes_with(cr.rel).size() > 1 ? "shared_relation" : "relation");
        for (const auto& [alias, rels] : vocab.aliases)
            if (std::find(rels.begin(), rels.end(), cr.rel) != rels.end()) words.emplace_back(alias, "alias");
        if (schema.literal_relations(cr.cls).size() >= 2) words.emplace_back(vocab.class_word(cr.cls), "class_word");
        for (const auto& value : schema.inventory(cr)) {
            for (const auto& [word, mech] : words) {
                const auto pairs = resolver.resolve_relation(word);
                if (std::find(pairs.begin(), pairs.end(), cr) == pairs.end()) continue;
                std::size_t exact = 0;
                for (const auto& p : pairs) exact += schema.in_inventory(p, value);
                AmbiguityLabel label;
                if (pairs.size() == 1)
                    label = AmbiguityLabel::None;
                else if (exact == 1)
                    label = AmbiguityLabel::Mild;
                else
                    label = AmbiguityLabel::High;
                pools.by_label[label][label == AmbiguityLabel::None ? "unique" : mech].push_back(
                    {word, value, cr, label, mech});
            }
        }
    }
    return pools;
}

// One letter of one word (of length >= 4) replaced by a different letter.
inline std::optional<std::string> typo(const std::string& value, std::mt19937_64& rng) {
    auto words = text::split_words(value);
    if (words.size() < 2) return std::nullopt;
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < words.size(); ++i) {
        std::size_t letters = 0;
        for (char c : words[i]) letters += (c >= 'a' && c <= 'z');
        if (letters >= 4 && letters == words[i].size()) eligible.push_back(i);
    }
    if (eligible.empty()) return std::nullopt;
    auto& w = words[eligible[std::uniform_int_distribution<std::size_t>(0, eligible.size() - 1)(rng)]];
    const auto at = std::uniform_int_distribution<std::size_t>(1, w.size() - 1)(rng);
    char c = w[at];
    while (c == w[at]) c = static_cast<char>('a' + std::uniform_int_distribution<int>(0, 25)(rng));
    w[at] = c;
    return text::join(words, " ");
}

class BenchmarkBuilder {
public:
    BenchmarkBuilder(const KnowledgeGraph& kg, const BenchmarkOptions& opt)
        : kg_(kg), schema_(kg), resolver_(schema_, opt.vocab), opt_(opt), rng_(opt.seed),
          pools_(enumerate_phrasings(resolver_)) {
        // Neutral single member: uniform preferences, no noise.
        neutral_.push_back(DecoderMember{});
        for (const auto& cr : schema_.all_literal_relations()) {
            if (cr.rel == schema_.id_relation()) continue;
            if (resolver_.resolve_relation(Vocabulary::relation_word(cr.rel)).size() != 1) continue;
            unique_asked_.push_back(cr);
            if (schema_.is_numeric(cr.rel)) unique_numeric_.push_back(cr);
        }
    }

    std::vector<EvalCase> build() {
        std::vector<EvalCase> out;
        std::set<std::string> seen;
        const std::pair<AmbiguityLabel, int> plan[] = {{AmbiguityLabel::None, opt_.strata.none},
                                                       {AmbiguityLabel::Mild, opt_.strata.mild},
                                                       {AmbiguityLabel::High, opt_.strata.high}};
        for (const auto& [label, count] : plan) {
            int made = 0, attempts = 0;
            const int budget = std::max(count, 1) * opt_.attempts_per_case;
            while (made < count) {
                if (++attempts > budget)
                    throw BuildError("stratum " + std::string(label_name(label)) + " infeasible: built " +
                                     std::to_string(made) + " of " + std::to_string(count));
                auto c = draw(label);
                if (!c || !seen.insert(c->question).second) continue;
                ++made;
                out.push_back(std::move(*c));
            }
        }
        // Interleave strata deterministically, then number the cases.
        std::shuffle(out.begin(), out.end(), rng_);
        for (std::size_t i = 0; i < out.size(); ++i) out[i].question_id = "q" + std::to_string(i + 1);
        return out;
    }

private:
    template <class T>
    const T& pick(const std::vector<T>& v) {
        return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng_)];
    }

    std::optional<EvalCase> draw(AmbiguityLabel label) {
        auto lit = pools_.by_label.find(label);
        std::vector<std::string> mechanisms;
        if (lit != pools_.by_label.end())
            for (const auto& [m, _] : lit->second) mechanisms.push_back(m);
        const auto& unique = pools_.by_label[AmbiguityLabel::None]["unique"];
        if (label == AmbiguityLabel::Mild && !unique.empty()) mechanisms.push_back("typo");
        if (mechanisms.empty()) return std::nullopt;
        const auto mech = pick(mechanisms);

        Phrasing ph = mech == "typo" ? pick(unique) : pick(lit->second.at(mech));
        std::string surface_value = ph.value;
        if (mech == "typo") {
            auto t = typo(ph.value, rng_);
            if (!t) return std::nullopt;
            surface_value = *t;
            ph.mechanism = "typo";
        }

        static constexpr int templates[] = {3, 5, 7};
        Bindings b;
        b.template_id = templates[std::uniform_int_distribution<int>(0, 2)(rng_)];
        b.conditions.push_back({ph.gold, Comparator::Equal, ph.value});
        std::string anchor = ph.gold.cls;
        if (b.template_id != 3) {
            std::vector<std::string> entities;
            for (const auto& cls : schema_.entity_classes())
                if (schema_.path(ph.gold.cls, cls)) entities.push_back(cls);
            if (entities.empty()) return std::nullopt;
            b.entity_class = pick(entities);
            anchor = b.entity_class;
        }
        if (b.template_id == 3) {
            if (unique_asked_.empty()) return std::nullopt;
            b.asked.push_back(pick(unique_asked_));
            if (b.asked[0].rel == ph.gold.rel) return std::nullopt;
        } else if (b.template_id == 7) {
            if (unique_numeric_.empty()) return std::nullopt;
            b.asked.push_back(pick(unique_numeric_));
            b.aggr = pick(std::vector<Aggregate>(all_aggregates.begin(), all_aggregates.end()));
        }
        if (!b.asked.empty() && !schema_.path(anchor, b.asked[0].cls)) return std::nullopt;

        auto gold = build_program(schema_, b);
        if (!gold) return std::nullopt;
        const auto trace = exec_program(*gold, kg_);
        if (is_null_answer(trace)) return std::nullopt;

        auto slots = default_surface(opt_.vocab, b);
        const auto& t = question_template(b.template_id);
        slots[t.conditions[0].relation] = ph.word;
        slots[t.conditions[0].value] = surface_value;
        const auto question = render_question(t, slots);

        if (!label_holds(question, surface_value, label, ph.mechanism, *gold)) return std::nullopt;
        return EvalCase{"", question, *gold, *trace.answer, label, ph.mechanism};
    }

    bool label_holds(const std::string& question, const std::string& surface_value, AmbiguityLabel label,
                     const std::string& mechanism, const Program& gold) const {
        CandidateSet set{0, {}};
        try {
            set = enumerate_candidates(question, resolver_, neutral_, DecoderConfig{});
        } catch (const DecodeError&) {
            return false;
        }
        const auto gold_text = render_inline(gold);
        std::size_t exact = 0;
        bool gold_exact = false;
        for (const auto& c : set.candidates) {
            if (!c.exact) continue;
            ++exact;
            gold_exact = gold_exact || c.text == gold_text;
        }
        if (mechanism == "typo") {
            // The program that copies the typo'd value must be repaired to gold.
            if (exact != 0) return false;
            for (const auto& c : set.candidates)
                if (c.bindings.conditions[0].value == surface_value)
                    return recover_program(c.program, kg_).program == gold;
            return false;
        }
        if (!gold_exact) return false;
        switch (label) {
        case AmbiguityLabel::None: return set.candidates.size() == 1;
        case AmbiguityLabel::Mild: return exact == 1 && set.candidates.size() >= 2;
        case AmbiguityLabel::High: return exact >= 2;
        }
        return false;
    }

    const KnowledgeGraph& kg_;
    GraphSchema schema_;
    SlotResolver resolver_;
    const BenchmarkOptions& opt_;
    std::mt19937_64 rng_;
    PhrasingPools pools_;
    std::vector<DecoderMember> neutral_;
    std::vector<ClassRelation> unique_asked_;
    std::vector<ClassRelation> unique_numeric_;
};

}  // namespace detail

inline std::vector<EvalCase> build_ambiguity_benchmark(const KnowledgeGraph& kg, const BenchmarkOptions& opt = {}) {
    return detail::BenchmarkBuilder(kg, opt).build();
}

// question_id \t label \t question \t program \t answer (escaped, exact floats)
inline std::string serialize_benchmark(const std::vector<EvalCase>& cases) {
    std::string out;
    for (const auto& c : cases)
        out += c.question_id + "\t" + std::string(label_name(c.label)) + "\t" + c.question + "\t" +
               render_inline(c.gold) + "\t" + text::escape_field(serialize_answer(c.answer, FloatFormat::Exact)) +
               "\n";
    return out;
}

// Gold programs are re-executed; a stored answer that disagrees is an error.
inline std::vector<EvalCase> load_benchmark(std::string_view src, const KnowledgeGraph& kg) {
    std::vector<EvalCase> out;
    int line_no = 0;
    for (const auto& line : text::lines(src)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const auto cols = text::split(line, '\t');
        if (cols.size() != 5) throw ParseError(line_no, 1, "benchmark: expected 5 tab-separated columns");
        const auto label = label_from_name(cols[1]);
        if (!label) throw ParseError(line_no, 1, "benchmark: unknown label '" + cols[1] + "'");
        auto program = parse_program(cols[3]);
        const auto trace = exec_program(program, kg);
        if (is_null_answer(trace)) throw InputError("benchmark line " + std::to_string(line_no) + ": gold answer is NULL");
        if (serialize_answer(*trace.answer, FloatFormat::Exact) != text::unescape_field(cols[4]))
            throw InputError("benchmark line " + std::to_string(line_no) + ": stored answer differs from execution");
        out.push_back({cols[0], cols[2], std::move(program), *trace.answer, *label, ""});
    }
    return out;
}

// ---------------------------------------------------------------------------
// End-to-end run

struct BenchConfig {
    int members = 5;
    int beam = 5;
    std::uint64_t seed = 1;
    EnsembleConfig ensemble;
    DecoderConfig decoder;
};

struct CaseResult {
    std::string question_id;
    AmbiguityLabel label;
    bool top1_correct = false;
    int first_correct_rank = 0;  // 0: no beam correct
    ProgramUncertainty uncertainty;
    std::vector<BeamHypothesis> beams;
    std::vector<TokenRecord> tokens;
    std::vector<Program> recovered_beams;
};

struct MetricRow {
    ScoreKind kind;
    LabelMode mode;
    DetectionMetrics metrics;
};

struct BenchReport {
    std::vector<CaseResult> cases;
    std::vector<MetricRow> metrics;
    std::vector<double> curve;
    double accuracy = 0;
};

inline std::vector<double> scores_of(const BenchReport& r, ScoreKind k) {
    std::vector<double> out;
    for (const auto& c : r.cases) out.push_back(c.uncertainty.score(k));
    return out;
}

inline std::vector<int> labels_of(const BenchReport& r, LabelMode mode) {
    std::vector<int> out;
    for (const auto& c : r.cases) out.push_back(binary_label(c.label, mode));
    return out;
}

inline const DetectionMetrics& metric_for(const BenchReport& r, ScoreKind k, LabelMode mode) {
    for (const auto& row : r.metrics)
        if (row.kind == k && row.mode == mode) return row.metrics;
    throw InputError("no metric row for " + std::string(score_name(k)));
}

inline BenchReport run_benchmark(const KnowledgeGraph& kg, const std::vector<EvalCase>& cases, const BenchConfig& cfg,
                                 const Vocabulary& vocab = Vocabulary::defaults()) {
    const GraphSchema schema(kg);
    const SlotResolver resolver(schema, vocab);
    auto ens_cfg = cfg.ensemble;
    ens_cfg.members = cfg.members;
    ens_cfg.seed = cfg.seed;
    const auto ensemble = make_ensemble(schema, ens_cfg);
    auto dec_cfg = cfg.decoder;
    dec_cfg.beam = cfg.beam;

    BenchReport report;
    std::vector<std::vector<Program>> beam_lists;
    std::vector<std::optional<Program>> top1;
    for (const auto& c : cases) {
        auto d = decode(c.question, resolver, ensemble, dec_cfg);
        CaseResult r{c.question_id, c.label, false, 0, program_uncertainty(d.tokens, &d.beams), d.beams, d.tokens, {}};
        for (const auto& b : d.beams) r.recovered_beams.push_back(recover_program(b.program, kg).program);
        for (std::size_t k = 0; k < r.recovered_beams.size(); ++k)
            if (prediction_correct(r.recovered_beams[k], c, kg)) {
                r.first_correct_rank = static_cast<int>(k) + 1;
                break;
            }
        r.top1_correct = r.first_correct_rank == 1;
        beam_lists.push_back(r.recovered_beams);
        top1.emplace_back(r.recovered_beams.front());
        report.cases.push_back(std::move(r));
    }
    report.accuracy = execution_accuracy(top1, cases, kg);
    report.curve = oracle_topk_curve(beam_lists, cases, kg, cfg.beam);
    for (auto mode : {LabelMode::MildAndHigh, LabelMode::HighOnly}) {
        const auto labels = labels_of(report, mode);
        for (auto k : all_score_kinds) report.metrics.push_back({k, mode, detection_metrics(scores_of(report, k), labels)});
    }
    return report;
}

}  // namespace ehrqa
