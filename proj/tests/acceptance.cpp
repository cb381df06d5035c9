// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>

#include "ehrqa/ehrqa.hpp"
#include "oracles.hpp"

using namespace ehrqa;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            if (pass) detail = what;
            pass = false;
        }
    }
};

std::string fixed(double v, int places = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", places, v);
    return buf;
}

// 1: interpreter against the full-scan oracle
Outcome interpreter_equivalence() {
    Outcome o;
    std::mt19937_64 rng(1);
    const auto t0 = Clock::now();
    int ok_cases = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto kg = oracle::random_kg(rng, 200);
        const auto p = oracle::random_program(rng, kg, 6);
        const auto a = exec_program(p, kg);
        const auto b = oracle::NaiveInterpreter(kg).run(p);
        const bool same = a.ok == b.ok && (a.ok ? a.registers == b.registers : a.failing_step == b.failing_step);
        o.require(same, "case " + std::to_string(i) + " differs: " + render_inline(p));
        ok_cases += a.ok;
    }
    const double secs = seconds_since(t0);
    o.require(secs < 10, "took " + fixed(secs) + " s");
    if (o.pass) o.detail = "1000 cases (" + std::to_string(ok_cases) + " executed), " + fixed(secs, 2) + " s";
    return o;
}

// 2: fixture semantics and the atleast = more + equal boundary identity
Outcome fixture_semantics() {
    Outcome o;
    const auto kg = load_kg_file(std::string(EHRQA_TEST_DATA) + "/fixture.tsv");
    auto answer = [&](const std::string& src) {
        const auto t = exec_program(parse_program(src), kg);
        return t.ok ? serialize_answer(*t.answer) : "ERROR";
    };
    const std::pair<std::string, std::string> cases[] = {
        {R"(r0 = gen_entset_equal("/gender", "f"))", "/patient/1"},
        {R"(r0 = gen_entset_equal("/gender", "m") ; r1 = gen_entset_down(r0, "/hadm"))", "/adm/20"},
        {R"(r0 = gen_entset_equal("/short_title", "sepsis") ; r1 = gen_entset_up("/diagnosis", r0))", "/adm/20"},
        {R"(r0 = gen_entset_atleast("/age", "0") ; r1 = gen_litset(r0, "/age"))", "52\n70"},
        {R"(r0 = gen_entset_atleast("/age", "70"))", "/patient/2"},
        {R"(r0 = gen_entset_more("/age", "70") ; r1 = count_entset(r0))", "0"},
        {R"(r0 = gen_entset_less("/age", "70"))", "/patient/1"},
        {R"(r0 = gen_entset_atmost("/age", "52"))", "/patient/1"},
        {R"(r0 = gen_entset_atleast("/age", "0") ; r1 = gen_litset(r0, "/age") ; r2 = average_litset(r1))", "61.0"},
        {R"(r0 = gen_entset_atleast("/age", "0") ; r1 = gen_litset(r0, "/age") ; r2 = maximum_litset(r1))", "70.0"},
        {R"(r0 = gen_entset_equal("/gender", "f") ; r1 = gen_entset_down(r0, "/hadm") ;)"
         R"( r2 = gen_entset_down(r1, "/diagnosis") ; r3 = gen_litset(r2, "/short_title"))",
         "pneumonia"},
        {R"(r0 = gen_entset_atleast("/age", "0") ; r1 = gen_entset_equal("/gender", "m") ;)"
         R"( r2 = intersect_entsets(r0, r1))",
         "/patient/2"},
        {R"(r0 = gen_entset_more("/age", "old"))", "ERROR"},
    };
    for (const auto& [src, want] : cases) {
        const auto got = answer(src);
        o.require(got == want, src + " gave '" + got + "'");
    }

    std::mt19937_64 rng(2);
    for (int i = 0; i < 200; ++i) {
        const auto rkg = oracle::random_kg(rng);
        const std::string rel = i % 2 ? "/num" : "/val";
        const auto th = std::to_string(std::uniform_int_distribution<int>(-6, 10)(rng));
        auto ents = [&](OpKind op) {
            ProgramBuilder b;
            b.add(op, {Relation(rel), Literal(th)});
            return std::get<EntSet>(*exec_program(std::move(b).build(), rkg).answer).items;
        };
        auto uni = ents(OpKind::GenEntsetMore);
        for (const auto& t : rkg.triples())
            if (t.relation == Relation(rel) && !is_entity(t.object) &&
                std::get<Literal>(t.object).numeric_value() == std::stod(th))
                uni.push_back(t.subject);
        std::sort(uni.begin(), uni.end());
        uni.erase(std::unique(uni.begin(), uni.end()), uni.end());
        o.require(ents(OpKind::GenEntsetAtleast) == uni, "boundary case " + std::to_string(i));
    }
    if (o.pass) o.detail = std::to_string(std::size(cases)) + " fixture programs, 200 boundary cases";
    return o;
}

// 3: entropy decomposition properties
Outcome entropy_properties() {
    Outcome o;
    std::mt19937_64 rng(3);
    for (int i = 0; i < 10000; ++i) {
        const int V = std::uniform_int_distribution<int>(2, 64)(rng);
        const int M = std::uniform_int_distribution<int>(1, 8)(rng);
        TokenRecord r{0, "t", "", {}};
        for (int m = 0; m < M; ++m) {
            std::vector<double> w(static_cast<std::size_t>(V));
            double s = 0;
            const bool sparse = rng() % 3 == 0;
            for (auto& x : w) s += x = (sparse && rng() % 2) ? 0.0 : std::exponential_distribution<double>(1.0)(rng);
            if (s == 0) s = w[0] = 1;
            Distribution d;
            for (int v = 0; v < V; ++v) d.emplace_back("v" + std::to_string(v), w[static_cast<std::size_t>(v)] / s);
            r.dists.push_back(std::move(d));
        }
        const auto u = token_entropies(r);
        o.require(u.u_model >= -1e-9, "u_model below zero at case " + std::to_string(i));
        o.require(std::abs(u.u_data + u.u_model - u.total) <= 1e-9, "decomposition off at case " + std::to_string(i));
        for (double h : u.member_entropy)
            o.require(h >= 0 && h <= std::log(static_cast<double>(V)) + 1e-12, "H_m out of range at case " + std::to_string(i));
        if (M == 1) o.require(u.u_model == 0.0, "single member with u_model != 0");
    }
    const double ln2 = std::log(2.0);
    auto u = token_entropies(TokenRecord{0, "t", "", {{{"a", 0.3}, {"b", 0.7}}}});
    o.require(u.u_model == 0.0 && u.u_data == u.total, "single-member example");
    u = token_entropies(TokenRecord{0, "t", "", {{{"a", 1.0}}, {{"b", 1.0}}}});
    o.require(std::abs(u.u_data) <= 1e-12 && std::abs(u.total - ln2) <= 1e-12 && std::abs(u.u_model - ln2) <= 1e-12,
              "one-hot split example");
    u = token_entropies(TokenRecord{0, "t", "", {{{"a", 0.5}, {"b", 0.5}}, {{"a", 0.5}, {"b", 0.5}}}});
    o.require(std::abs(u.u_data - ln2) <= 1e-12 && std::abs(u.total - ln2) <= 1e-12 && std::abs(u.u_model) <= 1e-12,
              "uniform pair example");
    if (o.pass) o.detail = "10000 random records, 3 analytic examples";
    return o;
}

// 4: recovery example, idempotence, rouge_l against enumerated LCS
Outcome recovery_checks() {
    Outcome o;
    const auto kg = load_kg(
        "/diag/1\t/diagnoses_long_title\tphysical restraints status\tlit\n"
        "/diag/2\t/diagnoses_long_title\tstatus asthmaticus\tlit\n"
        "/diag/3\t/diagnoses_long_title\tpersonal history of physical therapy\tlit\n");
    const auto rep = recover_program(
        parse_program(R"(r0 = gen_entset_equal("/diagnoses_long_title", "physical restrain status"))"), kg);
    o.require(rep.replacements.size() == 1 && rep.replacements[0].recovered == "physical restraints status",
              "worked example not recovered");

    std::mt19937_64 rng(4);
    for (int i = 0; i < 500; ++i) {
        const auto rkg = oracle::random_kg(rng);
        const auto p = oracle::random_program(rng, rkg);
        const auto once = recover_program(p, rkg).program;
        const auto twice = recover_program(once, rkg);
        o.require(twice.program == once && twice.replacements.empty(), "not idempotent: " + render_inline(p));
    }

    const std::vector<std::string> words{"physical", "restraint", "status", "a", "b", "of", "history"};
    for (int i = 0; i < 1000; ++i) {
        auto sentence = [&] {
            std::string s;
            const int n = std::uniform_int_distribution<int>(0, 9)(rng);
            for (int k = 0; k < n; ++k) s += (k ? " " : "") + words[rng() % words.size()];
            return s;
        };
        const auto a = sentence(), b = sentence();
        o.require(rouge_l(a, b) == oracle::brute_rouge(a, b), "rouge_l mismatch on '" + a + "' / '" + b + "'");
    }
    if (o.pass) o.detail = "example recovered, 500 idempotent programs, 1000 rouge pairs";
    return o;
}

// 5: synthetic corpus
Outcome synthetic_generation() {
    Outcome o;
    const auto kg = generate_toy_ehr_kg(1);
    CorpusOptions opt;
    opt.per_type = 500;
    opt.seed = 1;
    const auto t0 = Clock::now();
    Corpus a;
    try {
        a = generate_corpus(kg, opt);
    } catch (const Error& e) {
        o.require(false, e.what());
        return o;
    }
    const double secs = seconds_since(t0);
    o.require(secs < 30, "took " + fixed(secs) + " s");
    std::set<std::string> questions;
    for (const auto& p : a.pairs) {
        bool typed = true;
        try {
            typed = parse_program(render(p.program)) == p.program;
        } catch (const Error&) {
            typed = false;
        }
        o.require(typed, "program does not type-check: " + render_inline(p.program));
        o.require(!is_null_answer(exec_program(p.program, kg)), "NULL answer: " + p.question);
        o.require(questions.insert(p.question).second, "duplicate question: " + p.question);
    }
    const auto b = generate_corpus(kg, opt);
    o.require(serialize_corpus(a) == serialize_corpus(b), "two runs differ");
    if (o.pass) o.detail = std::to_string(a.pairs.size()) + " pairs, " + fixed(secs, 2) + " s";
    return o;
}

// 8: metrics against all-pairs and threshold-scan oracles
Outcome metric_oracles() {
    Outcome o;
    std::mt19937_64 rng(8);
    for (int i = 0; i < 100; ++i) {
        const int n = std::uniform_int_distribution<int>(2, 50)(rng);
        std::vector<double> s;
        std::vector<int> y;
        for (int k = 0; k < n; ++k) {
            s.push_back(i % 2 ? static_cast<double>(rng() % 5) : std::uniform_real_distribution<double>(0, 1)(rng));
            y.push_back(static_cast<int>(rng() % 2));
        }
        y[0] = 0;
        y[1] = 1;
        const auto m = detection_metrics(s, y);
        o.require(std::abs(m.auroc - oracle::all_pairs_auroc(s, y)) <= 1e-9, "auroc set " + std::to_string(i));
        o.require(std::abs(m.aupr - oracle::threshold_scan_aupr(s, y)) <= 1e-9, "aupr set " + std::to_string(i));
    }
    if (o.pass) o.detail = "100 random sets";
    return o;
}

void report(int n, const std::string& what, const Outcome& o, bool& all) {
    std::printf("%s criterion %d: %s (%s)\n", o.pass ? "PASS" : "FAIL", n, what.c_str(), o.detail.c_str());
    std::fflush(stdout);
    all = all && o.pass;
}

}  // namespace

int main() {
    bool all = true;
    report(1, "interpreter matches full-scan oracle", interpreter_equivalence(), all);
    report(2, "fixture semantics and boundary algebra", fixture_semantics(), all);
    report(3, "entropy decomposition properties", entropy_properties(), all);
    report(4, "condition-value recovery", recovery_checks(), all);
    report(5, "synthetic question-program generation", synthetic_generation(), all);

    // 6 and 7 share one benchmark run.
    Outcome six, seven;
    try {
        const auto t0 = Clock::now();
        const auto kg = generate_toy_ehr_kg(1);
        BenchmarkOptions bopt;
        bopt.strata = {400, 150, 50};
        const auto cases = build_ambiguity_benchmark(kg, bopt);
        BenchConfig cfg;
        cfg.members = 5;
        cfg.beam = 5;
        const auto r = run_benchmark(kg, cases, cfg);
        const double secs = seconds_since(t0);

        const double high = metric_for(r, ScoreKind::MaxUData, LabelMode::HighOnly).auroc;
        const double both = metric_for(r, ScoreKind::MaxUData, LabelMode::MildAndHigh).auroc;
        const double program_high = metric_for(r, ScoreKind::ProgramUData, LabelMode::HighOnly).auroc;
        six.require(cases.size() == 600, "benchmark has " + std::to_string(cases.size()) + " cases");
        six.require(high >= 0.95, "High AUROC " + fixed(high));
        six.require(both >= 0.80, "Mild&High AUROC " + fixed(both));
        six.require(high >= program_high, "token-level " + fixed(high) + " below program-level " + fixed(program_high));
        six.require(secs < 120, "took " + fixed(secs) + " s");

        const auto scores = scores_of(r, ScoreKind::MaxUData);
        const double top = *std::max_element(scores.begin(), scores.end());
        std::vector<int> prev;
        for (int k = 0; k < 20; ++k) {
            const double tau = top * k / 19.0;
            std::vector<int> flagged;
            for (const auto& c : r.cases) flagged.push_back(detect_ambiguous(c.uncertainty, {tau, ScoreKind::MaxUData}));
            for (std::size_t i = 0; i < prev.size(); ++i)
                six.require(flagged[i] <= prev[i], "detector not monotone at tau " + fixed(tau));
            prev = std::move(flagged);
        }
        if (six.pass)
            six.detail = "High " + fixed(high) + ", Mild&High " + fixed(both) + ", program-level High " +
                         fixed(program_high) + ", " + fixed(secs, 2) + " s";

        for (std::size_t k = 1; k < r.curve.size(); ++k)
            seven.require(r.curve[k] >= r.curve[k - 1], "curve decreases at k=" + std::to_string(k + 1));
        seven.require(r.curve.size() == 5 && r.curve[4] - r.curve[0] > 0,
                      "acc(5) - acc(1) = " + fixed(r.curve.back() - r.curve.front()));
        if (seven.pass) {
            seven.detail = "curve";
            for (double v : r.curve) seven.detail += " " + fixed(v);
        }
    } catch (const Error& e) {
        six.require(false, e.what());
        seven.require(false, e.what());
    }
    report(6, "ambiguity detection on the benchmark", six, all);
    report(7, "oracle top-k recommendation curve", seven, all);
    report(8, "AUROC/AUPR against brute-force oracles", metric_oracles(), all);
    return all ? 0 : 1;
}
