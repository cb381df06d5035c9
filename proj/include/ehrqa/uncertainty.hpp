#pragma once
// Ensemble uncertainty.
//
// Per token, with member distributions p_m over a shared vocabulary:
//   H_m     = -sum_v p_m(v) ln p_m(v)
//   H       = entropy of the member mean
//   u_data  = mean_m H_m
//   u_model = H - u_data
// A program's score is the maximum over its tokens. The "<rest>" bucket of a
// truncated distribution counts as one symbol.
//
// Program level, over beams b with member sequence probabilities P_m(b),
// length L_b and P(b) = mean_m P_m(b):
//   w_b      proportional to exp(mean_m ln P_m(b)), normalized over beams
//   U_total  = -sum_b w_b ln P(b) / L_b
//   U_model  = (1/M) sum_m sum_b w_b (ln P(b) - ln P_m(b)) / L_b
//   U_data   = U_total - U_model

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ehrqa/error.hpp"
#include "ehrqa/records.hpp"

namespace ehrqa {

struct TokenUncertainty {
    int position = 0;
    std::vector<double> member_entropy;
    double total = 0;  // H
    double u_data = 0;
    double u_model = 0;
};

inline double entropy(const std::vector<double>& p) {
    double h = 0;
    for (double x : p)
        if (x > 0) h -= x * std::log(x);
    return h;
}

// Member distributions aligned to the sorted union of their tokens.
inline std::vector<std::vector<double>> align_distributions(const std::vector<Distribution>& dists) {
    std::map<std::string, std::size_t> vocab;
    for (const auto& d : dists)
        for (const auto& [tok, p] : d) vocab.emplace(tok, 0);
    std::size_t k = 0;
    for (auto& [tok, i] : vocab) i = k++;
    std::vector<std::vector<double>> out;
    for (const auto& d : dists) {
        std::vector<double> row(vocab.size(), 0.0);
        for (const auto& [tok, p] : d) row[vocab.at(tok)] += p;
        out.push_back(std::move(row));
    }
    return out;
}

inline TokenUncertainty token_entropies(const TokenRecord& record) {
    if (record.dists.empty()) throw InputError("token " + std::to_string(record.position) + ": no member distributions");
    const auto rows = align_distributions(record.dists);
    TokenUncertainty u;
    u.position = record.position;
    const double M = static_cast<double>(rows.size());
    std::vector<double> mean(rows.front().size(), 0.0);
    for (std::size_t m = 0; m < rows.size(); ++m) {
        double sum = 0;
        for (double p : rows[m]) {
            if (!(p >= 0) || !std::isfinite(p))
                throw InputError("token " + std::to_string(record.position) + ": negative or non-finite probability");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-6)
            throw InputError("token " + std::to_string(record.position) + ": member " + std::to_string(m) +
                             " sums to " + std::to_string(sum));
        for (std::size_t v = 0; v < mean.size(); ++v) mean[v] += rows[m][v] / M;
        u.member_entropy.push_back(entropy(rows[m]));
    }
    if (rows.size() == 1) {
        u.total = u.member_entropy[0];
        u.u_data = u.total;
        u.u_model = 0;
        return u;
    }
    u.total = entropy(mean);
    for (double h : u.member_entropy) u.u_data += h / M;
    u.u_model = u.total - u.u_data;
    return u;
}

struct ProgramLevel {
    double total = 0;
    double model = 0;
    double data = 0;
};

namespace detail {

inline double log_mean_exp(const std::vector<double>& xs) {
    const double hi = *std::max_element(xs.begin(), xs.end());
    if (!std::isfinite(hi)) return hi;
    double s = 0;
    for (double x : xs) s += std::exp(x - hi);
    return hi + std::log(s / static_cast<double>(xs.size()));
}

}  // namespace detail

inline ProgramLevel program_level_uncertainty(const std::vector<BeamHypothesis>& beams) {
    if (beams.empty()) throw InputError("program-level uncertainty needs at least one beam");
    const std::size_t M = beams.front().member_logprobs.size();
    if (M == 0) throw InputError("beam without member log-probabilities");
    for (const auto& b : beams)
        if (b.member_logprobs.size() != M || b.length < 1) throw InputError("inconsistent beam records");

    std::vector<double> log_w;
    for (const auto& b : beams) {
        double s = 0;
        for (double lp : b.member_logprobs) s += lp;
        log_w.push_back(s / static_cast<double>(M));
    }
    const double log_norm = detail::log_mean_exp(log_w) + std::log(static_cast<double>(log_w.size()));

    ProgramLevel out;
    for (std::size_t i = 0; i < beams.size(); ++i) {
        const auto& b = beams[i];
        const double w = std::exp(log_w[i] - log_norm);
        const double inv_len = 1.0 / static_cast<double>(b.length);
        const double log_mean = detail::log_mean_exp(b.member_logprobs);
        out.total -= w * inv_len * log_mean;
        double gap = 0;
        for (double lp : b.member_logprobs) gap += log_mean - lp;
        out.model += w * inv_len * gap / static_cast<double>(M);
    }
    out.data = out.total - out.model;
    return out;
}

// ---------------------------------------------------------------------------
// Per-program scores and the detector

enum class ScoreKind { MaxUData, MaxUModel, MaxH, MaxHSingle, ProgramUTotal, ProgramUModel, ProgramUData };

inline constexpr std::array<ScoreKind, 7> all_score_kinds{ScoreKind::MaxUData,      ScoreKind::MaxUModel,
                                                          ScoreKind::MaxH,          ScoreKind::MaxHSingle,
                                                          ScoreKind::ProgramUTotal, ScoreKind::ProgramUModel,
                                                          ScoreKind::ProgramUData};

inline std::string_view score_name(ScoreKind k) {
    switch (k) {
    case ScoreKind::MaxUData: return "max_u_data";
    case ScoreKind::MaxUModel: return "max_u_model";
    case ScoreKind::MaxH: return "max_H";
    case ScoreKind::MaxHSingle: return "max_H_single";
    case ScoreKind::ProgramUTotal: return "U_total";
    case ScoreKind::ProgramUModel: return "U_model";
    case ScoreKind::ProgramUData: return "U_data";
    }
    return "";
}

inline std::optional<ScoreKind> score_from_name(std::string_view name) {
    for (auto k : all_score_kinds)
        if (score_name(k) == name) return k;
    return std::nullopt;
}

struct ProgramUncertainty {
    std::vector<TokenUncertainty> tokens;
    std::vector<double> u_set;  // u_data per token
    double max_u_data = 0;
    double max_u_model = 0;
    double max_h = 0;
    double max_h_single = 0;  // entropy of member 0 alone
    std::optional<ProgramLevel> program_level;

    double score(ScoreKind k) const {
        auto level = [&]() -> const ProgramLevel& {
            if (!program_level) throw InputError("no beams for a program-level score");
            return *program_level;
        };
        switch (k) {
        case ScoreKind::MaxUData: return max_u_data;
        case ScoreKind::MaxUModel: return max_u_model;
        case ScoreKind::MaxH: return max_h;
        case ScoreKind::MaxHSingle: return max_h_single;
        case ScoreKind::ProgramUTotal: return level().total;
        case ScoreKind::ProgramUModel: return level().model;
        case ScoreKind::ProgramUData: return level().data;
        }
        return 0;
    }
};

inline ProgramUncertainty program_uncertainty(const std::vector<TokenRecord>& records,
                                              const std::vector<BeamHypothesis>* beams = nullptr) {
    if (records.empty()) throw InputError("no token records");
    ProgramUncertainty pu;
    pu.max_u_data = pu.max_u_model = pu.max_h = pu.max_h_single = -std::numeric_limits<double>::infinity();
    for (const auto& r : records) {
        auto t = token_entropies(r);
        pu.u_set.push_back(t.u_data);
        pu.max_u_data = std::max(pu.max_u_data, t.u_data);
        pu.max_u_model = std::max(pu.max_u_model, t.u_model);
        pu.max_h = std::max(pu.max_h, t.total);
        pu.max_h_single = std::max(pu.max_h_single, t.member_entropy.front());
        pu.tokens.push_back(std::move(t));
    }
    if (beams && !beams->empty()) pu.program_level = program_level_uncertainty(*beams);
    return pu;
}

struct DetectorConfig {
    double tau = 0;
    ScoreKind kind = ScoreKind::MaxUData;
};

// 1 iff the score exceeds tau.
inline int detect_ambiguous(const ProgramUncertainty& pu, const DetectorConfig& cfg) {
    if (!std::isfinite(cfg.tau)) throw InputError("threshold must be finite");
    return pu.score(cfg.kind) > cfg.tau ? 1 : 0;
}

// ---------------------------------------------------------------------------
// Labels and detection metrics

enum class AmbiguityLabel { None, Mild, High };

inline std::string_view label_name(AmbiguityLabel l) {
    switch (l) {
    case AmbiguityLabel::None: return "none";
    case AmbiguityLabel::Mild: return "mild";
    case AmbiguityLabel::High: return "high";
    }
    return "";
}

inline std::optional<AmbiguityLabel> label_from_name(std::string_view s) {
    if (s == "none") return AmbiguityLabel::None;
    if (s == "mild") return AmbiguityLabel::Mild;
    if (s == "high") return AmbiguityLabel::High;
    return std::nullopt;
}

enum class LabelMode { MildAndHigh, HighOnly };

inline std::string_view label_mode_name(LabelMode m) { return m == LabelMode::MildAndHigh ? "mild_and_high" : "high"; }

inline int binary_label(AmbiguityLabel l, LabelMode mode) {
    if (mode == LabelMode::HighOnly) return l == AmbiguityLabel::High ? 1 : 0;
    return l == AmbiguityLabel::None ? 0 : 1;
}

struct DetectionMetrics {
    double auroc = 0;
    double aupr = 0;
};

// AUROC from average ranks (ties count one half); AUPR as average precision
// over distinct score thresholds, highest first.
inline DetectionMetrics detection_metrics(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw MetricError("scores and labels differ in length");
    if (scores.size() < 2) throw MetricError("need at least two samples");
    std::size_t pos = 0;
    for (int l : labels) {
        if (l != 0 && l != 1) throw MetricError("labels must be 0 or 1");
        pos += static_cast<std::size_t>(l);
    }
    const std::size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0) throw MetricError("labels contain a single class");

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    DetectionMetrics out;
    double rank_sum = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]]) rank_sum += avg_rank;
        i = j;
    }
    const double P = static_cast<double>(pos), N = static_cast<double>(neg);
    out.auroc = (rank_sum - P * (P + 1) / 2.0) / (P * N);

    double tp = 0, fp = 0, prev_recall = 0;
    for (std::size_t i = order.size(); i > 0;) {
        std::size_t j = i;
        while (j > 0 && scores[order[j - 1]] == scores[order[i - 1]]) --j;
        for (std::size_t k = j; k < i; ++k) (labels[order[k]] ? tp : fp) += 1;
        const double recall = tp / P;
        out.aupr += (recall - prev_recall) * tp / (tp + fp);
        prev_recall = recall;
        i = j;
    }
    return out;
}

}  // namespace ehrqa
