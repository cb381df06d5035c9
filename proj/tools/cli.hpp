#pragma once
// ehrqa command-line front end. Exit status: 0 success, 1 usage error,
// 2 data error; failures print one diagnostic line.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ehrqa/ehrqa.hpp"

namespace ehrqa::cli {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

// Questions file: "id<TAB>question" or a bare question (id q<line>).
inline std::vector<std::pair<std::string, std::string>> load_questions(const std::string& src) {
    std::vector<std::pair<std::string, std::string>> out;
    int n = 0;
    for (const auto& line : text::lines(src)) {
        ++n;
        if (text::trim(line).empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            out.emplace_back("q" + std::to_string(n), std::string(text::trim(line)));
        else
            out.emplace_back(line.substr(0, tab), std::string(text::trim(line.substr(tab + 1))));
    }
    return out;
}

inline void emit(const std::string& path, const std::string& content, std::ostream& out) {
    if (path.empty() || path == "-")
        out << content;
    else
        text::write_file(path, content);
}

// Plain-text heat rendering: each token followed by its u_data.
inline std::string annotate_tokens(const std::vector<TokenRecord>& tokens, const ProgramUncertainty& pu) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        char buf[32];
        std::snprintf(buf, sizeof buf, "[%.2f]", pu.tokens[i].u_data);
        out += tokens[i].token + buf;
    }
    return out;
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

// One row of boxes, shaded by u_data relative to ln 2.
inline std::string heat_svg(const std::vector<TokenRecord>& tokens, const ProgramUncertainty& pu) {
    const double cell_h = 28, char_w = 8, pad = 6;
    std::ostringstream body;
    double x = pad;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const double w = char_w * static_cast<double>(std::max<std::size_t>(tokens[i].token.size(), 1)) + 2 * pad;
        const double heat = std::min(1.0, pu.tokens[i].u_data / std::log(2.0));
        const int g = static_cast<int>(255 * (1 - heat));
        body << "<rect x=\"" << x << "\" y=\"" << pad << "\" width=\"" << w << "\" height=\"" << cell_h
             << "\" fill=\"rgb(255," << g << "," << g << ")\" stroke=\"#999\"/>"
             << "<text x=\"" << x + pad << "\" y=\"" << pad + 19 << "\" font-family=\"monospace\" font-size=\"13\">"
             << xml_escape(tokens[i].token) << "<title>u_data=" << pu.tokens[i].u_data << "</title></text>\n";
        x += w;
    }
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << x + pad << "\" height=\"" << cell_h + 2 * pad
        << "\">\n"
        << body.str() << "</svg>\n";
    return svg.str();
}

inline std::string score_row(const std::string& qid, const ProgramUncertainty& pu) {
    std::string row = qid + "," + text::format_exact(pu.max_u_data) + "," + text::format_exact(pu.max_u_model) + "," +
                      text::format_exact(pu.max_h) + "," + text::format_exact(pu.max_h_single);
    if (pu.program_level)
        row += "," + text::format_exact(pu.program_level->total) + "," + text::format_exact(pu.program_level->model) +
               "," + text::format_exact(pu.program_level->data);
    else
        row += ",,,";
    return row + "\n";
}

inline int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"KG question answering: program execution, recovery, synthetic data, decoding and uncertainty"};
    app.require_subcommand(1);

    std::string kg_path, out_path, seed_str = "1";
    std::uint64_t seed = 1;

    // gen-kg
    auto* gen_kg = app.add_subcommand("gen-kg", "Write a seeded toy EHR graph");
    ToyScale scale;
    gen_kg->add_option("--seed", seed, "Random seed");
    gen_kg->add_option("--patients", scale.patients, "Number of patients")->check(CLI::PositiveNumber);
    gen_kg->add_option("--admissions", scale.admissions_per_patient, "Admissions per patient")
        ->check(CLI::PositiveNumber);
    gen_kg->add_option("--out", out_path, "Output file (default stdout)");

    // exec
    auto* exec = app.add_subcommand("exec", "Execute programs");
    std::string program_text, programs_path;
    exec->add_option("--kg", kg_path, "Graph file")->required()->check(CLI::ExistingFile);
    auto* exec_one = exec->add_option("--program", program_text, "Program text");
    auto* exec_many = exec->add_option("--programs", programs_path, "File with one inline program per line")
                          ->check(CLI::ExistingFile);
    exec_one->excludes(exec_many);

    // recover
    auto* recover = app.add_subcommand("recover", "Recover out-of-graph condition values");
    recover->add_option("--kg", kg_path, "Graph file")->required()->check(CLI::ExistingFile);
    recover->add_option("--program", program_text, "Program text")->required();

    // gen-synth
    auto* gen_synth = app.add_subcommand("gen-synth", "Generate synthetic question-program pairs");
    CorpusOptions corpus_opt;
    std::string exclude_path;
    gen_synth->add_option("--kg", kg_path, "Graph file")->required()->check(CLI::ExistingFile);
    gen_synth->add_option("--per-type", corpus_opt.per_type, "Samples per template")->check(CLI::PositiveNumber);
    gen_synth->add_option("--seed", seed, "Random seed");
    gen_synth->add_option("--exclude", exclude_path, "Questions to drop, one per line")->check(CLI::ExistingFile);
    gen_synth->add_option("--templates", corpus_opt.templates, "Template ids")->check(CLI::Range(1, 8));
    gen_synth->add_flag("--parallel", corpus_opt.parallel, "One worker per template");
    gen_synth->add_option("--out", out_path, "Corpus file (default stdout)");

    // decode
    auto* decode_cmd = app.add_subcommand("decode", "Decode questions with the surrogate ensemble");
    int members = 5, beam = 5;
    std::string questions_path, beams_out, tokens_out;
    decode_cmd->add_option("--kg", kg_path, "Graph file")->required()->check(CLI::ExistingFile);
    decode_cmd->add_option("--questions", questions_path, "Questions file")->required()->check(CLI::ExistingFile);
    decode_cmd->add_option("--members", members, "Ensemble size")->check(CLI::PositiveNumber);
    decode_cmd->add_option("--beam", beam, "Beam width")->check(CLI::PositiveNumber);
    decode_cmd->add_option("--seed", seed, "Ensemble seed");
    decode_cmd->add_option("--beams-out", beams_out, "Beam file")->required();
    decode_cmd->add_option("--tokens-out", tokens_out, "Token log")->required();

    // score
    auto* score = app.add_subcommand("score", "Score token logs and beams");
    std::string tokens_path, beams_path;
    score->add_option("--tokens", tokens_path, "Token log")->required()->check(CLI::ExistingFile);
    score->add_option("--beams", beams_path, "Beam file")->check(CLI::ExistingFile);
    score->add_option("--out", out_path, "Score rows (default stdout)");

    // bench
    auto* bench = app.add_subcommand("bench", "Build and evaluate the ambiguity benchmark");
    StrataCounts strata{400, 150, 50};
    std::optional<int> bench_n;
    std::string out_dir = ".";
    bench->add_option("--kg", kg_path, "Graph file")->required()->check(CLI::ExistingFile);
    bench->add_option("--n", bench_n, "Total cases, split with the default proportions")->check(CLI::PositiveNumber);
    bench->add_option("--none", strata.none, "Unambiguous cases")->check(CLI::NonNegativeNumber);
    bench->add_option("--mild", strata.mild, "Mildly ambiguous cases")->check(CLI::NonNegativeNumber);
    bench->add_option("--high", strata.high, "Highly ambiguous cases")->check(CLI::NonNegativeNumber);
    bench->add_option("--members", members, "Ensemble size")->check(CLI::PositiveNumber);
    bench->add_option("--beam", beam, "Beam width")->check(CLI::PositiveNumber);
    bench->add_option("--seed", seed, "Seed for the benchmark and the ensemble");
    bench->add_option("--out", out_dir, "Output directory");

    // select
    auto* select = app.add_subcommand("select", "Answer a question, asking for a choice when it looks ambiguous");
    std::string question, svg_path;
    double tau = 0.3;
    select->add_option("--kg", kg_path, "Graph file")->required()->check(CLI::ExistingFile);
    select->add_option("--question", question, "Question")->required();
    select->add_option("--tau", tau, "Detector threshold on max u_data");
    select->add_option("--members", members, "Ensemble size")->check(CLI::PositiveNumber);
    select->add_option("--beam", beam, "Beam width")->check(CLI::PositiveNumber);
    select->add_option("--seed", seed, "Ensemble seed");
    select->add_option("--svg", svg_path, "Write a token heat map");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (gen_kg->parsed()) {
            emit(out_path, serialize_kg(generate_toy_ehr_kg(seed, scale)), out);
            return 0;
        }
        if (score->parsed()) {
            const auto tokens = load_token_log(text::read_file(tokens_path));
            std::map<std::string, std::vector<BeamHypothesis>> beams;
            if (!beams_path.empty())
                for (auto& [qid, list] : load_beam_log(text::read_file(beams_path))) beams[qid] = std::move(list);
            std::string rows = "question_id,max_u_data,max_u_model,max_H,max_H_single,U_total,U_model,U_data\n";
            for (const auto& [qid, records] : tokens) {
                auto it = beams.find(qid);
                rows += score_row(qid, program_uncertainty(records, it == beams.end() ? nullptr : &it->second));
            }
            emit(out_path, rows, out);
            return 0;
        }

        const auto kg = load_kg_file(kg_path);

        if (exec->parsed()) {
            if (!programs_path.empty()) {
                int n = 0;
                for (const auto& line : text::lines(text::read_file(programs_path))) {
                    if (text::trim(line).empty()) continue;
                    ++n;
                    std::string result;
                    try {
                        const auto t = exec_program(parse_program(line), kg);
                        result = t.ok ? text::escape_field(serialize_answer(*t.answer)) : "ERROR: " + t.error;
                    } catch (const Error& e) {
                        result = std::string("ERROR: ") + e.what();
                    }
                    out << n << "\t" << result << "\n";
                }
                return 0;
            }
            if (program_text.empty()) {
                err << "usage error: exec needs --program or --programs\n";
                return 1;
            }
            const auto t = exec_program(parse_program(program_text), kg);
            if (!t.ok) {
                err << "runtime error at step " << t.failing_step << ": " << t.error << "\n";
                return 2;
            }
            out << serialize_answer(*t.answer) << "\n";
            return 0;
        }

        if (recover->parsed()) {
            const auto report = recover_program(parse_program(program_text), kg);
            out << "step,arg,original,recovered,score\n";
            for (const auto& r : report.replacements)
                out << r.step << "," << r.arg << "," << csv_field(r.original) << "," << csv_field(r.recovered) << ","
                    << fmt(r.score) << "\n";
            for (int s : report.flagged_steps) err << "step " << s << ": relation has no values, left unchanged\n";
            return 0;
        }

        if (gen_synth->parsed()) {
            corpus_opt.seed = seed;
            if (!exclude_path.empty())
                for (const auto& line : text::lines(text::read_file(exclude_path)))
                    if (!text::trim(line).empty()) corpus_opt.exclude.insert(std::string(text::trim(line)));
            const auto corpus = generate_corpus(kg, corpus_opt);
            emit(out_path, serialize_corpus(corpus), out);
            for (const auto& [id, n] : corpus.retained) err << "template " << id << ": " << n << " retained\n";
            return 0;
        }

        const GraphSchema schema(kg);
        const SlotResolver resolver(schema, Vocabulary::defaults());
        EnsembleConfig ens_cfg;
        ens_cfg.members = members;
        ens_cfg.seed = seed;
        DecoderConfig dec_cfg;
        dec_cfg.beam = beam;

        if (decode_cmd->parsed()) {
            const auto ensemble = make_ensemble(schema, ens_cfg);
            std::string beam_lines, token_lines;
            int failures = 0;
            for (const auto& [qid, q] : load_questions(text::read_file(questions_path))) {
                try {
                    const auto d = decode(q, resolver, ensemble, dec_cfg);
                    for (const auto& b : d.beams) beam_lines += beam_line(qid, b) + "\n";
                    for (const auto& t : d.tokens) token_lines += token_record_json(qid, t) + "\n";
                } catch (const DecodeError& e) {
                    err << qid << ": " << e.what() << "\n";
                    ++failures;
                }
            }
            text::write_file(beams_out, beam_lines);
            text::write_file(tokens_out, token_lines);
            return failures ? 2 : 0;
        }

        if (bench->parsed()) {
            BenchmarkOptions bopt;
            bopt.strata = bench_n ? default_strata(*bench_n) : strata;
            bopt.seed = seed;
            const auto cases = build_ambiguity_benchmark(kg, bopt);
            BenchConfig bcfg;
            bcfg.members = members;
            bcfg.beam = beam;
            bcfg.seed = seed;
            const auto report = run_benchmark(kg, cases, bcfg);

            namespace fs = std::filesystem;
            fs::create_directories(out_dir);
            const fs::path dir(out_dir);
            text::write_file((dir / "benchmark.tsv").string(), serialize_benchmark(cases));

            std::string metrics = "score,labels,auroc,aupr\n";
            for (const auto& row : report.metrics)
                metrics += std::string(score_name(row.kind)) + "," + std::string(label_mode_name(row.mode)) + "," +
                           fmt(row.metrics.auroc) + "," + fmt(row.metrics.aupr) + "\n";
            metrics += "execution_accuracy,all," + fmt(report.accuracy) + ",\n";
            text::write_file((dir / "metrics.csv").string(), metrics);

            std::string curve = "k,accuracy\n";
            for (std::size_t k = 0; k < report.curve.size(); ++k)
                curve += std::to_string(k + 1) + "," + fmt(report.curve[k]) + "\n";
            text::write_file((dir / "curve.csv").string(), curve);

            std::string rows = "question_id,label,top1_correct,first_correct_rank,max_u_data,max_u_model,max_H,"
                               "max_H_single,U_total,U_model,U_data\n";
            for (const auto& c : report.cases) {
                rows += c.question_id + "," + std::string(label_name(c.label)) + "," + (c.top1_correct ? "1" : "0") +
                        "," + std::to_string(c.first_correct_rank);
                for (auto k : all_score_kinds) rows += "," + text::format_exact(c.uncertainty.score(k));
                rows += "\n";
            }
            text::write_file((dir / "cases.csv").string(), rows);

            out << "cases " << cases.size() << "\n";
            out << "execution accuracy " << fmt(report.accuracy) << "\n";
            out << "auroc max_u_data high " << fmt(metric_for(report, ScoreKind::MaxUData, LabelMode::HighOnly).auroc)
                << "\n";
            out << "auroc max_u_data mild_and_high "
                << fmt(metric_for(report, ScoreKind::MaxUData, LabelMode::MildAndHigh).auroc) << "\n";
            out << "top-" << report.curve.size() << " accuracy " << fmt(report.curve.back()) << "\n";
            return 0;
        }

        if (select->parsed()) {
            const auto ensemble = make_ensemble(schema, ens_cfg);
            const auto d = decode(question, resolver, ensemble, dec_cfg);
            const auto pu = program_uncertainty(d.tokens, &d.beams);
            if (!svg_path.empty()) text::write_file(svg_path, heat_svg(d.tokens, pu));
            out << "max u_data " << fmt(pu.max_u_data) << "\n";
            out << annotate_tokens(d.tokens, pu) << "\n";
            const Program* chosen = &d.beams.front().program;
            if (detect_ambiguous(pu, {tau, ScoreKind::MaxUData})) {
                out << "ambiguous; candidate programs:\n";
                for (const auto& b : d.beams)
                    out << b.rank << ") " << render_inline(b.program) << "  [p=" << fmt(std::exp(b.logprob)) << "]\n";
                out << "choose 1-" << d.beams.size() << ": " << std::flush;
                std::string line;
                if (!std::getline(in, line)) {
                    err << "no choice given\n";
                    return 1;
                }
                int k = 0;
                try {
                    k = std::stoi(std::string(text::trim(line)));
                } catch (const std::exception&) {
                    k = 0;
                }
                if (k < 1 || k > static_cast<int>(d.beams.size())) {
                    err << "usage error: choice must be between 1 and " << d.beams.size() << "\n";
                    return 1;
                }
                chosen = &d.beams[static_cast<std::size_t>(k - 1)].program;
                out << "\n";
            }
            const auto repaired = recover_program(*chosen, kg).program;
            out << "program " << render_inline(repaired) << "\n";
            const auto t = exec_program(repaired, kg);
            if (!t.ok) {
                err << "runtime error at step " << t.failing_step << ": " << t.error << "\n";
                return 2;
            }
            out << "answer\n" << serialize_answer(*t.answer) << "\n";
            return 0;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace ehrqa::cli
