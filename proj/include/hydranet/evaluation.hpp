#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hydranet/checkpoint.hpp"
#include "hydranet/multigran.hpp"

namespace hydranet {

// ---------------------------------------------------------------------------
// Classification metrics
// ---------------------------------------------------------------------------

struct GranularityMetrics {
    std::optional<double> auc;    // unset on single-class input
    std::optional<double> auprc;  // unset on single-class input
    double acc = 0.0;
    double f1 = 0.0;
    double recall = 0.0;
    double precision = 0.0;

    double get(std::size_t i) const {
        switch (i) {
            case 0: return auc.value_or(std::numeric_limits<double>::quiet_NaN());
            case 1: return auprc.value_or(std::numeric_limits<double>::quiet_NaN());
            case 2: return acc;
            case 3: return f1;
            case 4: return recall;
            case 5: return precision;
        }
        throw contract_error("metric index out of range");
    }
};

inline const std::array<std::string, 6>& metric_names() {
    static const std::array<std::string, 6> names = {"auc", "auprc", "acc",
                                                     "f1",  "recall", "precision"};
    return names;
}

/// Rank-statistic AUC with half credit for ties.
inline double auc_rank(const std::vector<double>& scores, const std::vector<int>& labels) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0.0;
    std::size_t n_pos = 0, n_neg = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));  // 1-based
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
        }
        i = j;
    }
    for (int l : labels) (l == 1 ? n_pos : n_neg)++;
    double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// Average precision via step integration of the precision-recall curve,
/// processing tied scores as one group.
inline double auprc_step(const std::vector<double>& scores, const std::vector<int>& labels) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::size_t total_pos = 0;
    for (int l : labels) total_pos += l == 1 ? 1 : 0;
    double ap = 0.0;
    double recall_prev = 0.0;
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        for (std::size_t k = i; k < j; ++k) (labels[order[k]] == 1 ? tp : fp)++;
        double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
        double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        ap += (recall - recall_prev) * precision;
        recall_prev = recall;
        i = j;
    }
    return ap;
}

/// AUC, AUPRC, accuracy, F1, recall, and precision; threshold metrics treat
/// player 1 winning as the positive class. Single-class inputs leave AUC and
/// AUPRC unset.
inline GranularityMetrics compute_metrics(const std::vector<double>& scores,
                                          const std::vector<int>& labels, double threshold = 0.5) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw contract_error("metrics need matching non-empty scores and labels");
    }
    GranularityMetrics m;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        bool pred = scores[i] >= threshold;
        bool pos = labels[i] == 1;
        if (pred && pos) ++tp;
        else if (pred && !pos) ++fp;
        else if (!pred && !pos) ++tn;
        else ++fn;
    }
    const std::size_t n_pos = tp + fn, n_neg = fp + tn;
    m.acc = static_cast<double>(tp + tn) / static_cast<double>(scores.size());
    m.recall = n_pos == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(n_pos);
    m.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    m.f1 = (m.precision + m.recall) == 0.0 ? 0.0
                                           : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    if (n_pos > 0 && n_neg > 0) {
        m.auc = auc_rank(scores, labels);
        m.auprc = auprc_step(scores, labels);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Statistical combination
// ---------------------------------------------------------------------------

/// Survival function of the chi-square distribution with even dof 2k:
/// P(X > x) = exp(-x/2) * sum_{j<k} (x/2)^j / j!.
inline double chi_square_sf_even(double x, std::size_t dof) {
    if (dof == 0 || dof % 2 != 0) throw contract_error("chi-square helper needs even dof");
    const std::size_t k = dof / 2;
    const double half = x / 2.0;
    // terms in log space against overflow for large k or x
    double log_term = -half;  // j = 0
    double sum = std::exp(log_term);
    for (std::size_t j = 1; j < k; ++j) {
        log_term += std::log(half) - std::log(static_cast<double>(j));
        sum += std::exp(log_term);
    }
    return std::min(1.0, sum);
}

struct FisherResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// Fisher combination: statistic -2 sum ln p_i, referred to chi-square with
/// 2k degrees of freedom. Zeros are floored at 1e-300; values outside [0, 1]
/// are rejected.
inline FisherResult fisher_combined(const std::vector<double>& ps) {
    if (ps.empty()) throw value_error("fisher combination needs at least one p-value");
    FisherResult r;
    for (double p : ps) {
        if (p < 0.0 || p > 1.0) {
            throw value_error("p-value " + format_double(p) + " outside [0, 1]");
        }
        r.statistic += -2.0 * std::log(std::max(p, 1e-300));
    }
    r.p_value = chi_square_sf_even(r.statistic, 2 * ps.size());
    return r;
}

/// Regularized incomplete beta via the continued fraction (Lentz).
inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    const double front = std::exp(a * std::log(x) + b * std::log(1.0 - x) - ln_beta);
    // continued fraction for I_x(a, b) * Beta(a, b) / front
    const double tiny = 1e-300;
    double c = 1.0, d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        double m2 = 2.0 * m;
        double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 + num * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 + num * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-14) break;
    }
    return front * h / a;  // symmetric branch handled by the caller
}

inline double regularized_incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    if (x < (a + 1.0) / (a + b + 2.0)) return incomplete_beta(a, b, x);
    return 1.0 - incomplete_beta(b, a, 1.0 - x);
}

/// Two-sided survival probability of Student's t.
inline double student_t_two_sided_p(double t, double dof) {
    if (dof <= 0.0) throw contract_error("t-test needs positive degrees of freedom");
    double x = dof / (dof + t * t);
    return regularized_incomplete_beta(dof / 2.0, 0.5, x);
}

/// Welch two-sample test. Degenerate inputs (both samples constant) resolve
/// to p = 1 when the means agree and p = 0 otherwise.
inline double welch_two_sample_p(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() < 2 || ys.size() < 2) throw value_error("welch test needs two samples of size >= 2");
    auto moments = [](const std::vector<double>& v) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        var /= static_cast<double>(v.size() - 1);
        return std::make_pair(mean, var);
    };
    auto [mx, vx] = moments(xs);
    auto [my, vy] = moments(ys);
    double nx = static_cast<double>(xs.size()), ny = static_cast<double>(ys.size());
    double se2 = vx / nx + vy / ny;
    if (se2 == 0.0) return mx == my ? 1.0 : 0.0;
    double t = (mx - my) / std::sqrt(se2);
    double dof = se2 * se2 / ((vx / nx) * (vx / nx) / (nx - 1.0) + (vy / ny) * (vy / ny) / (ny - 1.0));
    return student_t_two_sided_p(t, dof);
}

// ---------------------------------------------------------------------------
// Evaluation over matches
// ---------------------------------------------------------------------------

struct GranularityScores {
    std::vector<double> scores;
    std::vector<int> labels;
};

/// Evaluates a model on matches, pooling predictions per granularity.
inline std::map<Granularity, GranularityScores> collect_predictions(
    const HydraNetModel& model, const std::vector<MatchSequence>& matches) {
    std::map<Granularity, GranularityScores> pools;
    for (const MatchSequence& match : matches) {
        HydraNetModel::MatchForward fwd = model.forward_match(match, /*training=*/false);
        std::vector<GranularitySample> samples = assemble_granularity_targets(match);
        for (const GranularitySample& s : samples) {
            pools[s.granularity].scores.push_back(fwd.scores.at(s.t, 0));
            pools[s.granularity].labels.push_back(s.label);
        }
    }
    return pools;
}

inline std::map<Granularity, GranularityMetrics> evaluate_model(
    const HydraNetModel& model, const std::vector<MatchSequence>& matches) {
    std::map<Granularity, GranularityMetrics> out;
    for (auto& [g, pool] : collect_predictions(model, matches)) {
        out[g] = compute_metrics(pool.scores, pool.labels);
    }
    return out;
}

struct MetricStat {
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t count = 0;
};

/// Per granularity, mean and standard deviation of each metric over folds.
/// Folds where a metric is undefined are skipped for that metric.
struct MetricReport {
    std::map<Granularity, std::array<MetricStat, 6>> stats;

    static MetricReport from_folds(const std::vector<std::map<Granularity, GranularityMetrics>>& folds) {
        MetricReport r;
        for (Granularity g : {Granularity::point, Granularity::game, Granularity::set,
                              Granularity::match}) {
            for (std::size_t mi = 0; mi < 6; ++mi) {
                std::vector<double> vals;
                for (const auto& fold : folds) {
                    auto it = fold.find(g);
                    if (it == fold.end()) continue;
                    double v = it->second.get(mi);
                    if (!std::isnan(v)) vals.push_back(v);
                }
                MetricStat s;
                s.count = vals.size();
                if (!vals.empty()) {
                    for (double v : vals) s.mean += v;
                    s.mean /= static_cast<double>(vals.size());
                    double ss = 0.0;
                    for (double v : vals) ss += (v - s.mean) * (v - s.mean);
                    s.stddev = std::sqrt(ss / static_cast<double>(vals.size()));
                }
                r.stats[g][mi] = s;
            }
        }
        return r;
    }
};

inline std::vector<MatchSequence> select_matches(const std::vector<MatchSequence>& all,
                                                 const std::vector<std::string>& ids) {
    std::vector<MatchSequence> out;
    out.reserve(ids.size());
    for (const std::string& id : ids) {
        bool found = false;
        for (const MatchSequence& m : all) {
            if (m.match_id == id) {
                out.push_back(m);
                found = true;
                break;
            }
        }
        if (!found) throw data_error("match id '" + id + "' not present in the dataset");
    }
    return out;
}

/// Five-fold style cross-validation: per fold, train on the other folds and
/// evaluate on the held-out one.
inline std::vector<std::map<Granularity, GranularityMetrics>> run_cross_validation(
    const std::vector<MatchSequence>& all, const DatasetSplit& split, const TrainConfig& cfg,
    std::optional<Modality> ablated = std::nullopt) {
    std::vector<std::map<Granularity, GranularityMetrics>> fold_metrics;
    for (std::size_t f = 0; f < split.folds.size(); ++f) {
        std::vector<std::string> train_ids;
        for (std::size_t g = 0; g < split.folds.size(); ++g) {
            if (g == f) continue;
            train_ids.insert(train_ids.end(), split.folds[g].begin(), split.folds[g].end());
        }
        TrainResult tr = train(select_matches(all, train_ids), cfg, ablated);
        fold_metrics.push_back(evaluate_model(tr.model, select_matches(all, split.folds[f])));
    }
    return fold_metrics;
}

// ---------------------------------------------------------------------------
// Missing-modality ablation
// ---------------------------------------------------------------------------

struct MlmmGranularityResult {
    std::array<double, 6> p_values{};  // per metric, Welch over folds
    std::size_t used_metrics = 0;
    FisherResult combined;
};

struct MlmmResult {
    Modality modality;
    MetricReport baseline;
    MetricReport ablated;
    std::map<Granularity, MlmmGranularityResult> per_granularity;
};

/// Trains baseline and ablated models per fold (the modality's feature slice
/// is zeroed at the model input and in the attention groups for both
/// players), then combines per-metric Welch p-values across folds with the
/// Fisher statistic.
inline MlmmResult run_mlmm_ablation(const std::vector<MatchSequence>& all, const DatasetSplit& split,
                                    const TrainConfig& cfg, Modality modality) {
    MlmmResult result;
    result.modality = modality;
    auto base_folds = run_cross_validation(all, split, cfg);
    auto ablated_folds = run_cross_validation(all, split, cfg, modality);
    result.baseline = MetricReport::from_folds(base_folds);
    result.ablated = MetricReport::from_folds(ablated_folds);

    for (Granularity g : {Granularity::point, Granularity::game, Granularity::set,
                          Granularity::match}) {
        MlmmGranularityResult gr;
        std::vector<double> ps;
        for (std::size_t mi = 0; mi < 6; ++mi) {
            std::vector<double> base_vals, abl_vals;
            for (const auto& fold : base_folds) {
                auto it = fold.find(g);
                if (it != fold.end() && !std::isnan(it->second.get(mi)))
                    base_vals.push_back(it->second.get(mi));
            }
            for (const auto& fold : ablated_folds) {
                auto it = fold.find(g);
                if (it != fold.end() && !std::isnan(it->second.get(mi)))
                    abl_vals.push_back(it->second.get(mi));
            }
            if (base_vals.size() < 2 || abl_vals.size() < 2) {
                gr.p_values[mi] = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            gr.p_values[mi] = welch_two_sample_p(base_vals, abl_vals);
            ps.push_back(gr.p_values[mi]);
            ++gr.used_metrics;
        }
        if (!ps.empty()) gr.combined = fisher_combined(ps);
        result.per_granularity[g] = gr;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Momentum trace
// ---------------------------------------------------------------------------

struct TracePoint {
    int set_no = 0;
    int game_no = 0;
    int point_no = 0;
    double ms_p1 = 0.0;
    double ms_p2 = 0.0;
    bool cross_game = false;
    bool cross_set = false;
    bool half_time = false;
};

struct Streak {
    std::size_t begin = 0;  // point indices, end exclusive
    std::size_t end = 0;
    int winner = 0;
    double mean_ms_p1 = 0.0;
};

struct MomentumTrace {
    std::string match_id;
    std::vector<TracePoint> points;
    std::vector<Streak> streaks;
};

/// Per-point momentum scores with boundary and half-time annotations, plus
/// streaks of consecutive points won by the same player with the mean score.
inline MomentumTrace export_ms_trace(const MatchSequence& match, const HydraNetModel& model) {
    MomentumTrace trace;
    trace.match_id = match.match_id;
    HydraNetModel::MatchForward fwd = model.forward_match(match, /*training=*/false);
    const std::size_t n = match.point_count();
    const std::size_t hm = half_time_index(n) - 1;
    for (std::size_t t = 0; t < n; ++t) {
        TracePoint tp;
        tp.set_no = match.meta[t].set_no;
        tp.game_no = match.meta[t].game_no;
        tp.point_no = match.meta[t].point_no;
        tp.ms_p1 = fwd.scores.at(t, 0);
        tp.ms_p2 = 1.0 - tp.ms_p1;
        for (const SpanBoundary& g : match.games) tp.cross_game = tp.cross_game || (t == g.begin && t > 0);
        for (const SpanBoundary& s : match.sets) tp.cross_set = tp.cross_set || (t == s.begin && t > 0);
        tp.half_time = t == hm;
        trace.points.push_back(tp);
    }
    std::size_t begin = 0;
    for (std::size_t t = 1; t <= n; ++t) {
        if (t == n || match.y_point[t] != match.y_point[begin]) {
            Streak s;
            s.begin = begin;
            s.end = t;
            s.winner = match.y_point[begin] == 1 ? 1 : 2;
            for (std::size_t k = begin; k < t; ++k) s.mean_ms_p1 += trace.points[k].ms_p1;
            s.mean_ms_p1 /= static_cast<double>(t - begin);
            trace.streaks.push_back(s);
            begin = t;
        }
    }
    return trace;
}

inline void write_trace_csv(std::ostream& os, const MomentumTrace& trace) {
    os << "match_id,set_no,game_no,point_no,ms_p1,ms_p2,cross_game,cross_set,half_time,"
       << "streak_start,streak_end,streak_winner,streak_mean_ms_p1\n";
    std::size_t si = 0;
    for (std::size_t t = 0; t < trace.points.size(); ++t) {
        while (si < trace.streaks.size() && t >= trace.streaks[si].end) ++si;
        const TracePoint& p = trace.points[t];
        const Streak& s = trace.streaks[si];
        os << trace.match_id << ',' << p.set_no << ',' << p.game_no << ',' << p.point_no << ','
           << format_double(p.ms_p1) << ',' << format_double(p.ms_p2) << ',' << (p.cross_game ? 1 : 0)
           << ',' << (p.cross_set ? 1 : 0) << ',' << (p.half_time ? 1 : 0) << ',' << (s.begin + 1)
           << ',' << s.end << ',' << s.winner << ',' << format_double(s.mean_ms_p1) << "\n";
    }
}

}  // namespace hydranet
