#pragma once
// Synthetic question-program pairs. Bindings come from random walks over the
// graph, so every condition value is an actual object and every program is
// satisfiable; each sample is still executed and resampled on a NULL answer.

#include <cstdint>
#include <future>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ehrqa/dsl.hpp"
#include "ehrqa/error.hpp"
#include "ehrqa/interp.hpp"
#include "ehrqa/kg.hpp"
#include "ehrqa/questions.hpp"
#include "ehrqa/schema.hpp"
#include "ehrqa/text.hpp"

namespace ehrqa {

struct SynthPair {
    int template_id;
    std::string question;
    Program program;
    Bindings bindings;
};

struct SynthOptions {
    int retry_budget = 200;
    int max_hops = 2;
    Vocabulary vocab = Vocabulary::defaults();
};

namespace detail {

class Sampler {
public:
    Sampler(const GraphSchema& schema, std::mt19937_64& rng, const SynthOptions& opt)
        : schema_(schema), kg_(schema.kg()), rng_(rng), opt_(opt) {
        for (const auto& cls : schema.entity_classes())
            for (const auto& n : schema.nodes_of(cls)) entity_nodes_.push_back(n);
        for (const auto& cls : schema.classes())
            if (schema.has_id(cls))
                for (const auto& n : schema.nodes_of(cls)) id_nodes_.push_back(n);
        const auto triples = kg_.triples();
        for (std::size_t i = 0; i < triples.size(); ++i)
            if (!is_entity(triples[i].object) && triples[i].relation != schema.id_relation())
                literal_triples_.push_back(i);
    }

    std::optional<Bindings> draw(int template_id) {
        const auto& t = question_template(template_id);
        Bindings b;
        b.template_id = template_id;
        switch (t.entity) {
        case EntitySlot::Node: {
            if (id_nodes_.empty()) return std::nullopt;
            const auto& s = pick(id_nodes_);
            b.entity_class = class_of(s);
            b.entity_id = *schema_.id_of(s);
            for (std::size_t i = 0; i < t.asked.size(); ++i) {
                auto a = literal_at(walk(s, false));
                if (!a) return std::nullopt;
                b.asked.push_back(a->first);
            }
            break;
        }
        case EntitySlot::None: {
            if (literal_triples_.empty()) return std::nullopt;
            const auto& tr = kg_.triples()[pick(literal_triples_)];
            b.conditions.push_back({{class_of(tr.subject), tr.relation}, Comparator::Equal,
                                    std::get<Literal>(tr.object).text()});
            for (std::size_t i = 0; i < t.asked.size(); ++i) {
                auto a = literal_at(walk(tr.subject, true));
                if (!a) return std::nullopt;
                b.asked.push_back(a->first);
            }
            break;
        }
        case EntitySlot::Class: {
            if (entity_nodes_.empty()) return std::nullopt;
            const auto& s = pick(entity_nodes_);
            b.entity_class = class_of(s);
            for (std::size_t i = 0; i < t.conditions.size(); ++i) {
                auto c = literal_at(walk(s, false));
                if (!c) return std::nullopt;
                auto cond = condition_for(c->first, c->second);
                if (!cond) return std::nullopt;
                b.conditions.push_back(*cond);
            }
            for (std::size_t i = 0; i < t.asked.size(); ++i) {
                auto a = literal_at(walk(s, false), true);
                if (!a) return std::nullopt;
                b.asked.push_back(a->first);
            }
            if (t.finale == Finale::Aggregate) b.aggr = all_aggregates[uniform(all_aggregates.size())];
            break;
        }
        }
        if (b.asked.size() == 2 && b.asked[0] == b.asked[1]) return std::nullopt;
        if (b.conditions.size() == 2 && b.conditions[0].target == b.conditions[1].target &&
            b.conditions[0].cmp == b.conditions[1].cmp && b.conditions[0].value == b.conditions[1].value)
            return std::nullopt;
        return b;
    }

private:
    std::size_t uniform(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

    template <class T>
    const T& pick(const std::vector<T>& v) {
        return v[uniform(v.size())];
    }

    // Up to max_hops random hops; downward only unless undirected.
    NodeId walk(const NodeId& start, bool undirected) {
        NodeId cur = start;
        const int hops = static_cast<int>(uniform(static_cast<std::size_t>(opt_.max_hops) + 1));
        for (int h = 0; h < hops; ++h) {
            std::vector<NodeId> next;
            const auto triples = kg_.triples();
            for (std::size_t i : kg_.triples_of(cur))
                if (is_entity(triples[i].object)) next.push_back(std::get<NodeId>(triples[i].object));
            if (undirected)
                for (const auto& r : schema_.links_from(class_of(cur)))
                    if (!r.downward)
                        for (const auto& s : kg_.subjects(r.relation, Object{cur})) next.push_back(s);
            if (next.empty()) break;
            cur = pick(next);
        }
        return cur;
    }

    // A random literal (relation, value) of the node, optionally numeric only.
    std::optional<std::pair<ClassRelation, std::string>> literal_at(const NodeId& n, bool numeric = false) {
        std::vector<std::size_t> options;
        const auto triples = kg_.triples();
        for (std::size_t i : kg_.triples_of(n)) {
            const auto& t = triples[i];
            if (is_entity(t.object) || t.relation == schema_.id_relation()) continue;
            if (numeric && !schema_.is_numeric(t.relation)) continue;
            options.push_back(i);
        }
        if (options.empty()) return std::nullopt;
        const auto& t = triples[pick(options)];
        return std::pair{ClassRelation{class_of(n), t.relation}, std::get<Literal>(t.object).text()};
    }

    // Categorical relations compare by equality; numeric ones draw a
    // comparator and a threshold from the inventory that the walked value
    // satisfies.
    std::optional<ConditionBinding> condition_for(const ClassRelation& cr, const std::string& value) {
        if (!schema_.is_numeric(cr.rel)) return ConditionBinding{cr, Comparator::Equal, value};
        const auto cmp = all_comparators[uniform(all_comparators.size())];
        if (cmp == Comparator::Equal) return ConditionBinding{cr, cmp, value};
        const double v = *parse_decimal(value);
        std::vector<std::string> thresholds;
        for (const auto& w : schema_.inventory(cr)) {
            const double x = *parse_decimal(w);
            if (numeric_predicate(filter_op(cmp), v, x)) thresholds.push_back(w);
        }
        if (thresholds.empty()) return std::nullopt;
        return ConditionBinding{cr, cmp, pick(thresholds)};
    }

    const GraphSchema& schema_;
    const KnowledgeGraph& kg_;
    std::mt19937_64& rng_;
    const SynthOptions& opt_;
    std::vector<NodeId> entity_nodes_;
    std::vector<NodeId> id_nodes_;
    std::vector<std::size_t> literal_triples_;
};

inline SynthPair sample_with(Sampler& sampler, const GraphSchema& schema, int template_id,
                             const SynthOptions& opt) {
    const auto& t = question_template(template_id);
    for (int attempt = 0; attempt < opt.retry_budget; ++attempt) {
        auto b = sampler.draw(template_id);
        if (!b) continue;
        auto p = build_program(schema, *b);
        if (!p) continue;
        if (is_null_answer(exec_program(*p, schema.kg()))) continue;
        return SynthPair{template_id, render_question(t, default_surface(opt.vocab, *b)), std::move(*p),
                         std::move(*b)};
    }
    throw GenerationError("template " + std::to_string(template_id) + ": retry budget of " +
                          std::to_string(opt.retry_budget) + " exhausted");
}

// Independent stream per (seed, template) so that templates can be generated
// in any order or concurrently.
inline std::mt19937_64 template_stream(std::uint64_t seed, int template_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(template_id)};
    return std::mt19937_64(seq);
}

}  // namespace detail

inline SynthPair sample_pair(int template_id, const GraphSchema& schema, std::uint64_t seed,
                             const SynthOptions& opt = {}) {
    if (schema.kg().empty()) throw GenerationError("template " + std::to_string(template_id) + ": empty graph");
    question_template(template_id);
    auto rng = detail::template_stream(seed, template_id);
    detail::Sampler sampler(schema, rng, opt);
    return detail::sample_with(sampler, schema, template_id, opt);
}

struct Corpus {
    std::vector<SynthPair> pairs;
    std::map<int, int> retained;  // template id -> pairs kept after filtering
};

struct CorpusOptions {
    int per_type = 1;
    std::uint64_t seed = 1;
    std::vector<int> templates{1, 2, 3, 4, 5, 6, 7, 8};
    std::set<std::string> exclude;
    bool parallel = false;
    SynthOptions synth;
};

// per_type samples per template, then duplicate questions (first kept, in
// template order) and excluded questions are dropped.
inline Corpus generate_corpus(const KnowledgeGraph& kg, const CorpusOptions& opt) {
    if (opt.per_type < 1) throw GenerationError("per_type must be at least 1");
    if (kg.empty()) throw GenerationError("empty graph");
    const GraphSchema schema(kg);

    auto run = [&](int template_id) {
        question_template(template_id);
        auto rng = detail::template_stream(opt.seed, template_id);
        detail::Sampler sampler(schema, rng, opt.synth);
        std::vector<SynthPair> out;
        out.reserve(static_cast<std::size_t>(opt.per_type));
        for (int i = 0; i < opt.per_type; ++i) out.push_back(detail::sample_with(sampler, schema, template_id, opt.synth));
        return out;
    };

    std::vector<std::vector<SynthPair>> batches;
    if (opt.parallel) {
        std::vector<std::future<std::vector<SynthPair>>> futures;
        for (int id : opt.templates) futures.push_back(std::async(std::launch::async, run, id));
        for (auto& f : futures) batches.push_back(f.get());
    } else {
        for (int id : opt.templates) batches.push_back(run(id));
    }

    Corpus corpus;
    std::set<std::string> seen;
    for (std::size_t k = 0; k < batches.size(); ++k) {
        corpus.retained[opt.templates[k]] = 0;
        for (auto& p : batches[k]) {
            if (opt.exclude.count(p.question) || !seen.insert(p.question).second) continue;
            ++corpus.retained[p.template_id];
            corpus.pairs.push_back(std::move(p));
        }
    }
    return corpus;
}

// template_id \t question \t program with steps joined by " ; "
inline std::string serialize_corpus(const Corpus& c) {
    std::string out;
    for (const auto& p : c.pairs)
        out += std::to_string(p.template_id) + "\t" + p.question + "\t" + render_inline(p.program) + "\n";
    return out;
}

struct CorpusRecord {
    int template_id;
    std::string question;
    Program program;
};

inline std::vector<CorpusRecord> load_corpus(std::string_view src) {
    std::vector<CorpusRecord> out;
    int line_no = 0;
    for (const auto& line : text::lines(src)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        auto cols = text::split(line, '\t');
        if (cols.size() != 3) throw ParseError(line_no, 1, "expected 3 tab-separated columns");
        int id = 0;
        try {
            id = std::stoi(cols[0]);
        } catch (const std::exception&) {
            throw ParseError(line_no, 1, "bad template id '" + cols[0] + "'");
        }
        out.push_back({id, cols[1], parse_program(cols[2])});
    }
    return out;
}

}  // namespace ehrqa
