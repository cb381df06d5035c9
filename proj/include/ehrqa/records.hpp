#pragma once
// Decoder output records and their on-disk formats. Any decoder (the
// surrogate here, or an external model) that writes these formats can be
// scored by the uncertainty module.
//
// Token log, one JSON object per line:
//   {"question_id": "...", "position": 3, "token": "...", "context_hash": "...",
//    "dists": [[["tok", p], ..., ["<rest>", p]], ...one list per member]}
// Beam file, tab-separated:
//   question_id  rank  logprob  length  member_logprobs(space-separated)  program(inline)

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ehrqa/dsl.hpp"
#include "ehrqa/error.hpp"
#include "ehrqa/text.hpp"

namespace ehrqa {

inline constexpr std::string_view rest_token = "<rest>";
inline constexpr std::string_view eos_token = "</s>";

using Distribution = std::vector<std::pair<std::string, double>>;

struct TokenRecord {
    int position = 0;
    std::string token;
    std::string context_hash;
    std::vector<Distribution> dists;  // one per member
};

struct BeamHypothesis {
    int rank = 0;
    Program program;
    double logprob = 0;                   // member-average sequence log-probability
    std::vector<double> member_logprobs;  // log P_m(y)
    int length = 1;                       // tokens including end-of-sequence
};

// ---------------------------------------------------------------------------
// Token log

inline std::string token_record_json(const std::string& question_id, const TokenRecord& r) {
    nlohmann::json dists = nlohmann::json::array();
    for (const auto& d : r.dists) {
        nlohmann::json entries = nlohmann::json::array();
        for (const auto& [tok, p] : d) entries.push_back(nlohmann::json::array({tok, p}));
        dists.push_back(std::move(entries));
    }
    nlohmann::json j{{"question_id", question_id},
                     {"position", r.position},
                     {"token", r.token},
                     {"context_hash", r.context_hash},
                     {"dists", std::move(dists)}};
    return j.dump();
}

// Records grouped by question id, in order of first appearance.
using TokenLog = std::vector<std::pair<std::string, std::vector<TokenRecord>>>;

inline TokenLog load_token_log(std::string_view src) {
    TokenLog out;
    std::map<std::string, std::size_t> index;
    int line_no = 0;
    for (const auto& line : text::lines(src)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            TokenRecord r;
            const auto qid = j.at("question_id").get<std::string>();
            r.position = j.at("position").get<int>();
            r.token = j.at("token").get<std::string>();
            r.context_hash = j.value("context_hash", "");
            for (const auto& d : j.at("dists")) {
                Distribution dist;
                for (const auto& e : d) dist.emplace_back(e.at(0).get<std::string>(), e.at(1).get<double>());
                r.dists.push_back(std::move(dist));
            }
            auto [it, fresh] = index.emplace(qid, out.size());
            if (fresh) out.emplace_back(qid, std::vector<TokenRecord>{});
            out[it->second].second.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line_no, 1, std::string("token log: ") + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Beam file

inline std::string beam_line(const std::string& question_id, const BeamHypothesis& b) {
    std::vector<std::string> members;
    for (double lp : b.member_logprobs) members.push_back(text::format_exact(lp));
    return question_id + "\t" + std::to_string(b.rank) + "\t" + text::format_exact(b.logprob) + "\t" +
           std::to_string(b.length) + "\t" + text::join(members, " ") + "\t" + render_inline(b.program);
}

using BeamLog = std::vector<std::pair<std::string, std::vector<BeamHypothesis>>>;

inline BeamLog load_beam_log(std::string_view src) {
    BeamLog out;
    std::map<std::string, std::size_t> index;
    int line_no = 0;
    for (const auto& line : text::lines(src)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const auto cols = text::split(line, '\t');
        if (cols.size() != 6) throw ParseError(line_no, 1, "beam file: expected 6 tab-separated columns");
        BeamHypothesis b{0, parse_program(cols[5]), 0, {}, 1};
        try {
            b.rank = std::stoi(cols[1]);
            b.logprob = std::stod(cols[2]);
            b.length = std::stoi(cols[3]);
            for (const auto& w : text::split_words(cols[4])) b.member_logprobs.push_back(std::stod(w));
        } catch (const std::exception&) {
            throw ParseError(line_no, 1, "beam file: bad number");
        }
        if (b.member_logprobs.empty()) throw ParseError(line_no, 1, "beam file: no member log-probabilities");
        auto [it, fresh] = index.emplace(cols[0], out.size());
        if (fresh) out.emplace_back(cols[0], std::vector<BeamHypothesis>{});
        out[it->second].second.push_back(std::move(b));
    }
    return out;
}

}  // namespace ehrqa
