#include <gtest/gtest.h>

#include <cmath>

#include "ehrqa/ehrqa.hpp"

using namespace ehrqa;

namespace {

KnowledgeGraph fixture() { return load_kg_file(std::string(EHRQA_TEST_DATA) + "/fixture.tsv"); }

EvalCase make_case(const std::string& id, const std::string& src, const KnowledgeGraph& kg) {
    auto p = parse_program(src);
    return EvalCase{id, "", p, *exec_program(p, kg).answer, AmbiguityLabel::None, ""};
}

const KnowledgeGraph& toy() {
    static const auto kg = generate_toy_ehr_kg(1);
    return kg;
}

const std::vector<EvalCase>& small_bench() {
    static const auto cases = [] {
        BenchmarkOptions opt;
        opt.strata = {40, 20, 10};
        return build_ambiguity_benchmark(toy(), opt);
    }();
    return cases;
}

}  // namespace

TEST(Accuracy, IdentityAndFailures) {
    const auto kg = fixture();
    const std::vector<EvalCase> cases{make_case("a", R"(r0 = gen_entset_equal("/gender", "f"))", kg),
                                      make_case("b", R"(r0 = gen_entset_atleast("/age", "0") ; r1 = gen_litset(r0, "/age"))", kg)};
    EXPECT_EQ(execution_accuracy({cases[0].gold, cases[1].gold}, cases, kg), 1.0);
    const auto broken = parse_program(R"(r0 = gen_entset_more("/age", "x"))");
    EXPECT_EQ(execution_accuracy({broken, std::nullopt}, cases, kg), 0.0);
    EXPECT_THROW(execution_accuracy({broken}, cases, kg), InputError);
}

TEST(Accuracy, BagOrderDoesNotMatter) {
    const auto kg = fixture();
    auto c = make_case("a", R"(r0 = gen_entset_atleast("/age", "0") ; r1 = gen_litset(r0, "/age"))", kg);
    c.answer = LitSet{{Literal("70"), Literal("52")}};
    EXPECT_TRUE(prediction_correct(c.gold, c, kg));
    c.answer = LitSet{{Literal("70"), Literal("70")}};
    EXPECT_FALSE(prediction_correct(c.gold, c, kg));
}

TEST(Curve, HalfThenAll) {
    const auto kg = fixture();
    const auto f = parse_program(R"(r0 = gen_entset_equal("/gender", "f"))");
    const auto m = parse_program(R"(r0 = gen_entset_equal("/gender", "m"))");
    const std::vector<EvalCase> cases{make_case("a", R"(r0 = gen_entset_equal("/gender", "f"))", kg),
                                      make_case("b", R"(r0 = gen_entset_equal("/gender", "f"))", kg)};
    const auto curve = oracle_topk_curve({{f, m}, {m, f}}, cases, kg, 2);
    EXPECT_EQ(curve, (std::vector<double>{0.5, 1.0}));
    EXPECT_EQ(oracle_topk_curve({{f}, {m}}, cases, kg, 3), (std::vector<double>{0.5, 0.5, 0.5}));
    EXPECT_THROW(oracle_topk_curve({{f}, {}}, cases, kg, 2), InputError);
}

TEST(Benchmark, DefaultStrata) {
    const auto s = default_strata(600);
    EXPECT_EQ(s.total(), 600);
    EXPECT_EQ(s.none, 400);
    EXPECT_EQ(s.high, 44);
    EXPECT_EQ(s.mild, 156);
}

TEST(Benchmark, StrataCountsAndDeterminism) {
    const auto& cases = small_bench();
    std::map<AmbiguityLabel, int> counts;
    std::set<std::string> questions;
    for (const auto& c : cases) {
        ++counts[c.label];
        EXPECT_TRUE(questions.insert(c.question).second);
        EXPECT_FALSE(is_null_answer(exec_program(c.gold, toy())));
    }
    EXPECT_EQ(counts[AmbiguityLabel::None], 40);
    EXPECT_EQ(counts[AmbiguityLabel::Mild], 20);
    EXPECT_EQ(counts[AmbiguityLabel::High], 10);
    BenchmarkOptions opt;
    opt.strata = {40, 20, 10};
    EXPECT_EQ(serialize_benchmark(build_ambiguity_benchmark(toy(), opt)), serialize_benchmark(cases));
}

TEST(Benchmark, SerializedBenchmarkLoadsBack) {
    const auto& cases = small_bench();
    const auto loaded = load_benchmark(serialize_benchmark(cases), toy());
    ASSERT_EQ(loaded.size(), cases.size());
    for (std::size_t i = 0; i < cases.size(); ++i) {
        EXPECT_EQ(loaded[i].gold, cases[i].gold);
        EXPECT_EQ(loaded[i].label, cases[i].label);
        EXPECT_TRUE(answers_match(loaded[i].answer, cases[i].answer));
    }
    auto text = serialize_benchmark({cases[0]});
    text.replace(text.rfind('\t') + 1, std::string::npos, "not the answer\n");
    EXPECT_THROW(load_benchmark(text, toy()), InputError);
}

TEST(Benchmark, InfeasibleStratumIsNamed) {
    BenchmarkOptions opt;
    opt.strata = {1, 0, 1};
    opt.attempts_per_case = 5;
    try {
        build_ambiguity_benchmark(fixture(), opt);
        FAIL();
    } catch (const BuildError& e) {
        EXPECT_NE(std::string(e.what()).find("stratum"), std::string::npos);
    }
}

TEST(Benchmark, StrataShowTheExpectedUncertainty) {
    const GraphSchema schema(toy());
    const SlotResolver resolver(schema, Vocabulary::defaults());
    std::vector<DecoderMember> even{DecoderMember{0, {}, 0, 0}, DecoderMember{1, {}, 0, 0}};
    DecoderConfig cfg;
    cfg.leak = 0;
    for (const auto& c : small_bench()) {
        const auto d = decode(c.question, resolver, even, cfg);
        const auto pu = program_uncertainty(d.tokens);
        if (c.label == AmbiguityLabel::None) EXPECT_NEAR(pu.max_u_data, 0.0, 1e-12) << c.question;
        if (c.label == AmbiguityLabel::High) EXPECT_GE(pu.max_u_data, std::log(2.0) - 0.05) << c.question;
        if (c.mechanism == "typo") {
            bool fixed = false;
            for (const auto& b : d.beams) {
                const auto rep = recover_program(b.program, toy());
                if (!rep.replacements.empty() && prediction_correct(rep.program, c, toy())) fixed = true;
            }
            EXPECT_TRUE(fixed) << c.question;
        }
    }
}

TEST(Benchmark, RunReportsConsistentNumbers) {
    const auto& cases = small_bench();
    const auto r = run_benchmark(toy(), cases, BenchConfig{});
    ASSERT_EQ(r.cases.size(), cases.size());
    ASSERT_EQ(r.curve.size(), 5u);
    EXPECT_DOUBLE_EQ(r.curve[0], r.accuracy);
    for (std::size_t k = 1; k < r.curve.size(); ++k) EXPECT_GE(r.curve[k], r.curve[k - 1]);
    EXPECT_EQ(r.metrics.size(), 14u);
    const auto again = run_benchmark(toy(), cases, BenchConfig{});
    EXPECT_EQ(scores_of(again, ScoreKind::MaxUData), scores_of(r, ScoreKind::MaxUData));
    EXPECT_GE(metric_for(r, ScoreKind::MaxUData, LabelMode::HighOnly).auroc, 0.9);
}
