#pragma once
// Deterministic template-matching decoder ensemble.
//
// A question is matched against the templates, every slot word is resolved to
// the (class, relation) pairs it may denote, and each condition value is
// linked against those pairs' value inventories. Every combination yields a
// candidate program. A member weighs a candidate by its relation preferences,
// the link weights and a small per-program noise term; its next-token
// distribution is the weight-normalized mixture over the candidates that
// agree with the emitted prefix, so a sequence's chained probability equals
// its normalized weight.
//
// Link weights for an equality condition with value v over pairs R:
//   v is a value of some pairs     those pairs: 1 (canonical text), the rest
//                                  share a leak mass (raw text)
//   v is a value of no pair        inventory values with rouge_l >= gate get
//                                  charsim^sharpness, a raw copy gets copy
//                                  weight, pairs without a fuzzy match leak
// Numeric comparisons take the threshold as written.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ehrqa/dsl.hpp"
#include "ehrqa/error.hpp"
#include "ehrqa/kg.hpp"
#include "ehrqa/questions.hpp"
#include "ehrqa/records.hpp"
#include "ehrqa/recovery.hpp"
#include "ehrqa/schema.hpp"
#include "ehrqa/text.hpp"

namespace ehrqa {

struct DecoderMember {
    int member_id = 0;
    std::map<std::string, double> relation_preference;  // ClassRelation::key() -> weight, default 1
    std::uint64_t noise_seed = 0;
    double noise_scale = 0;

    double preference(const ClassRelation& cr) const {
        auto it = relation_preference.find(cr.key());
        return it == relation_preference.end() ? 1.0 : it->second;
    }
};

struct EnsembleConfig {
    int members = 5;
    std::uint64_t seed = 1;
    double concentration = 8;  // gamma shape of the preference draws
    double noise_scale = 0.05;
};

// Preferences are Gamma(concentration) draws with unit mean, one per
// (member, class, relation), each from its own hashed stream.
inline std::vector<DecoderMember> make_ensemble(const GraphSchema& schema, const EnsembleConfig& cfg) {
    if (cfg.members < 1) throw InputError("ensemble needs at least one member");
    std::vector<DecoderMember> out;
    for (int m = 0; m < cfg.members; ++m) {
        DecoderMember d;
        d.member_id = m;
        const auto member_key = text::fnv1a(std::to_string(cfg.seed) + "/" + std::to_string(m));
        d.noise_seed = text::fnv1a("noise", member_key);
        d.noise_scale = cfg.noise_scale;
        for (const auto& cr : schema.all_literal_relations()) {
            std::mt19937_64 rng(text::fnv1a(cr.key(), member_key));
            std::gamma_distribution<double> g(cfg.concentration, 1.0 / cfg.concentration);
            d.relation_preference[cr.key()] = g(rng);
        }
        out.push_back(std::move(d));
    }
    return out;
}

struct DecoderConfig {
    double leak = 0.05;       // total weight spread over non-matching pairs
    double copy = 0.05;       // raw copy of an unmatched value
    double sharpness = 8;     // exponent on character similarity for fuzzy links
    double rouge_gate = 0.5;  // minimum rouge_l for a fuzzy link
    int top_k = 32;           // entries kept per logged distribution
    int beam = 5;
};

// Normalized Levenshtein similarity in [0, 1].
inline double char_similarity(std::string_view a, std::string_view b) {
    if (a.empty() && b.empty()) return 1.0;
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return 1.0 - static_cast<double>(prev[b.size()]) / static_cast<double>(std::max(a.size(), b.size()));
}

struct LinkOption {
    ClassRelation target;
    std::string value;
    double weight;
    bool exact;
};

inline std::vector<LinkOption> link_condition(const GraphSchema& schema, const std::vector<ClassRelation>& pairs,
                                              Comparator cmp, const std::string& raw, const DecoderConfig& cfg) {
    std::vector<LinkOption> out;
    if (cmp != Comparator::Equal) {
        if (!parse_decimal(raw)) return out;
        for (const auto& cr : pairs)
            if (schema.is_numeric(cr.rel)) out.push_back({cr, raw, 1.0, true});
        return out;
    }
    std::vector<ClassRelation> unmatched;
    for (const auto& cr : pairs) {
        if (auto canon = schema.canonical_value(cr, raw))
            out.push_back({cr, *canon, 1.0, true});
        else
            unmatched.push_back(cr);
    }
    if (out.empty()) {
        unmatched.clear();
        const auto needle = text::casefold(raw);
        for (const auto& cr : pairs) {
            bool any = false;
            for (const auto& v : schema.inventory(cr)) {
                const auto folded = text::casefold(v);
                if (rouge_l(needle, folded) < cfg.rouge_gate) continue;
                out.push_back({cr, v, std::pow(char_similarity(needle, folded), cfg.sharpness), false});
                any = true;
            }
            if (any)
                out.push_back({cr, raw, cfg.copy, false});
            else
                unmatched.push_back(cr);
        }
        if (out.empty()) return out;
    }
    if (pairs.size() > 1)
        for (const auto& cr : unmatched)
            out.push_back({cr, raw, cfg.leak / static_cast<double>(unmatched.size()), false});
    return out;
}

struct Candidate {
    Program program;
    std::string text;
    std::vector<std::string> tokens;  // program tokens plus end-of-sequence
    std::vector<double> weights;      // per member, unnormalized
    bool exact;                       // every condition linked to an inventory value
    Bindings bindings;
};

struct CandidateSet {
    int template_id;
    std::vector<Candidate> candidates;  // sorted by program text
};

namespace detail {

inline double noise_factor(const DecoderMember& m, const std::string& program_text) {
    if (m.noise_scale == 0) return 1.0;
    std::mt19937_64 rng(text::fnv1a(program_text, m.noise_seed));
    std::normal_distribution<double> z(0.0, 1.0);
    return std::exp(m.noise_scale * z(rng));
}

// Among pairs, those at the minimal class distance from `from`.
inline std::vector<ClassRelation> nearest(const GraphSchema& schema, const std::string& from,
                                         const std::vector<ClassRelation>& pairs) {
    std::vector<ClassRelation> out;
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (const auto& cr : pairs) {
        auto p = schema.path(from, cr.cls);
        if (!p) continue;
        if (p->size() < best) {
            best = p->size();
            out.clear();
        }
        if (p->size() == best) out.push_back(cr);
    }
    return out;
}

inline std::vector<ClassRelation> numeric_only(const GraphSchema& schema, std::vector<ClassRelation> pairs) {
    std::erase_if(pairs, [&](const ClassRelation& cr) { return !schema.is_numeric(cr.rel); });
    return pairs;
}

}  // namespace detail

inline CandidateSet enumerate_candidates(std::string_view question, const SlotResolver& resolver,
                                         const std::vector<DecoderMember>& ensemble, const DecoderConfig& cfg) {
    if (ensemble.empty()) throw InputError("ensemble needs at least one member");
    const auto& schema = resolver.schema();
    const auto parsed = match_question(text::casefold(text::trim(question)), resolver);
    if (!parsed) throw DecodeError("unparseable question");
    const auto& t = question_template(parsed->template_id);
    const auto& slots = parsed->slots;

    Bindings base;
    base.template_id = t.id;
    if (t.entity == EntitySlot::Node) {
        auto node = *resolver.resolve_entity_node(slots.at("ENTITY"));
        base.entity_class = node.first;
        base.entity_id = node.second;
    } else if (t.entity == EntitySlot::Class) {
        base.entity_class = *resolver.class_from_plural(slots.at("ENTITY"));
    }
    if (t.finale == Finale::Aggregate) base.aggr = *aggregate_from_word(slots.at("AGGR"));

    // Condition links, per condition slot.
    std::vector<std::vector<LinkOption>> links;
    for (const auto& cs : t.conditions) {
        const auto cmp = cs.condition.empty() ? Comparator::Equal : *comparator_from_word(slots.at(cs.condition));
        auto pairs = resolver.resolve_relation(slots.at(cs.relation));
        if (t.entity == EntitySlot::Class)
            std::erase_if(pairs, [&](const ClassRelation& cr) { return !schema.path(cr.cls, base.entity_class); });
        auto opts = link_condition(schema, pairs, cmp, slots.at(cs.value), cfg);
        if (opts.empty()) throw DecodeError("unlinkable value");
        links.push_back(std::move(opts));
    }

    // Asked relations resolve to the pairs nearest the anchor class.
    auto asked_for = [&](const std::string& anchor) {
        std::vector<std::vector<ClassRelation>> asked;
        for (const auto& slot : t.asked) {
            auto pairs = resolver.resolve_relation(slots.at(slot));
            if (t.finale == Finale::Aggregate) pairs = detail::numeric_only(schema, std::move(pairs));
            asked.push_back(detail::nearest(schema, anchor, pairs));
        }
        return asked;
    };

    std::map<std::string, Candidate> merged;
    const std::size_t M = ensemble.size();
    auto emit = [&](const Bindings& b, const std::vector<double>& w, bool exact) {
        auto p = build_program(schema, b);
        if (!p) return;
        auto text = render_inline(*p);
        auto it = merged.find(text);
        if (it == merged.end()) {
            auto tokens = tokenize_program(*p);
            tokens.emplace_back(eos_token);
            it = merged.emplace(text, Candidate{*p, text, std::move(tokens), std::vector<double>(M, 0.0), exact, b})
                     .first;
        }
        for (std::size_t m = 0; m < M; ++m) it->second.weights[m] += w[m];
        it->second.exact = it->second.exact || exact;
    };

    // Cartesian product over condition links, then over asked pairs.
    std::vector<std::size_t> ci(links.size(), 0);
    while (true) {
        Bindings b = base;
        std::vector<double> w(M, 1.0);
        bool exact = true;
        for (std::size_t k = 0; k < links.size(); ++k) {
            const auto& o = links[k][ci[k]];
            const auto& cs = t.conditions[k];
            const auto cmp = cs.condition.empty() ? Comparator::Equal : *comparator_from_word(slots.at(cs.condition));
            b.conditions.push_back({o.target, cmp, o.value});
            exact = exact && o.exact;
            for (std::size_t m = 0; m < M; ++m) w[m] *= ensemble[m].preference(o.target) * o.weight;
        }
        const std::string anchor = t.entity == EntitySlot::None ? b.conditions.at(0).target.cls : b.entity_class;
        const auto asked = asked_for(anchor);
        std::vector<std::size_t> ai(asked.size(), 0);
        const bool feasible = std::all_of(asked.begin(), asked.end(), [](const auto& a) { return !a.empty(); });
        while (feasible) {
            Bindings bb = b;
            std::vector<double> ww = w;
            for (std::size_t k = 0; k < asked.size(); ++k) {
                bb.asked.push_back(asked[k][ai[k]]);
                for (std::size_t m = 0; m < M; ++m) ww[m] *= ensemble[m].preference(asked[k][ai[k]]);
            }
            emit(bb, ww, exact);
            std::size_t k = 0;
            while (k < ai.size() && ++ai[k] == asked[k].size()) ai[k++] = 0;
            if (k == ai.size()) break;
        }
        std::size_t k = 0;
        while (k < ci.size() && ++ci[k] == links[k].size()) ci[k++] = 0;
        if (k == ci.size()) break;
    }
    if (merged.empty()) throw DecodeError("unlinkable value");

    CandidateSet out{t.id, {}};
    for (auto& [text, c] : merged) {
        for (std::size_t m = 0; m < M; ++m) c.weights[m] *= detail::noise_factor(ensemble[m], text);
        out.candidates.push_back(std::move(c));
    }
    return out;
}

struct DecodeResult {
    int template_id;
    Program greedy;
    std::vector<BeamHypothesis> beams;
    std::vector<TokenRecord> tokens;  // along the greedy path, end-of-sequence included
    std::size_t candidate_count;
};

namespace detail {

inline Distribution truncate_distribution(std::vector<std::pair<std::string, double>> entries, int top_k) {
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    Distribution out;
    double rest = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (static_cast<int>(i) < top_k)
            out.push_back(entries[i]);
        else
            rest += entries[i].second;
    }
    out.emplace_back(std::string(rest_token), rest);
    return out;
}

}  // namespace detail

inline DecodeResult decode_candidates(const std::string& question, const CandidateSet& set, std::size_t members,
                                      const DecoderConfig& cfg) {
    const auto& cands = set.candidates;
    const std::size_t M = members;
    DecodeResult result{set.template_id, cands.front().program, {}, {}, cands.size()};

    // Greedy decoding.
    std::vector<std::size_t> alive(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) alive[i] = i;
    std::string context = question;
    for (std::size_t pos = 0;; ++pos) {
        std::vector<std::map<std::string, double>> per_member(M);
        std::map<std::string, double> mean;
        for (std::size_t m = 0; m < M; ++m) {
            double total = 0;
            for (auto i : alive) total += cands[i].weights[m];
            for (auto i : alive) {
                const double p = total > 0 ? cands[i].weights[m] / total : 1.0 / static_cast<double>(alive.size());
                per_member[m][cands[i].tokens[pos]] += p;
            }
            for (const auto& [tok, p] : per_member[m]) mean[tok] += p / static_cast<double>(M);
        }
        std::string best;
        double best_p = -1;
        for (const auto& [tok, p] : mean)
            if (p > best_p) {
                best = tok;
                best_p = p;
            }
        TokenRecord rec;
        rec.position = static_cast<int>(pos);
        rec.token = best;
        rec.context_hash = text::hex64(text::fnv1a(context));
        for (std::size_t m = 0; m < M; ++m)
            rec.dists.push_back(detail::truncate_distribution({per_member[m].begin(), per_member[m].end()}, cfg.top_k));
        result.tokens.push_back(std::move(rec));
        std::erase_if(alive, [&](std::size_t i) { return cands[i].tokens[pos] != best; });
        context += "\x1f" + best;
        if (best == eos_token) break;
    }
    result.greedy = cands[alive.front()].program;

    // Beams: whole-sequence probabilities, ranked by member-average log-probability.
    std::vector<double> totals(M, 0);
    for (const auto& c : cands)
        for (std::size_t m = 0; m < M; ++m) totals[m] += c.weights[m];
    std::vector<BeamHypothesis> all;
    for (const auto& c : cands) {
        BeamHypothesis b{0, c.program, 0, {}, static_cast<int>(c.tokens.size())};
        for (std::size_t m = 0; m < M; ++m) {
            const double lp = std::log(c.weights[m] / totals[m]);
            b.member_logprobs.push_back(lp);
            b.logprob += lp / static_cast<double>(M);
        }
        all.push_back(std::move(b));
    }
    std::stable_sort(all.begin(), all.end(),
                     [](const BeamHypothesis& a, const BeamHypothesis& b) { return a.logprob > b.logprob; });
    const auto keep = std::min<std::size_t>(all.size(), static_cast<std::size_t>(std::max(cfg.beam, 1)));
    for (std::size_t i = 0; i < keep; ++i) {
        all[i].rank = static_cast<int>(i) + 1;
        result.beams.push_back(std::move(all[i]));
    }
    return result;
}

inline DecodeResult decode(const std::string& question, const SlotResolver& resolver,
                           const std::vector<DecoderMember>& ensemble, const DecoderConfig& cfg = {}) {
    return decode_candidates(question, enumerate_candidates(question, resolver, ensemble, cfg), ensemble.size(),
                             cfg);
}

}  // namespace ehrqa
