#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hydranet/evaluation.hpp"
#include "hydranet/synth.hpp"

using namespace hydranet;

namespace {

// Brute-force pairwise AUC: fraction of positive/negative pairs ranked
// correctly, ties counted half.
double auc_bruteforce(const std::vector<double>& scores, const std::vector<int>& labels) {
    double hits = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) hits += 1.0;
            else if (scores[i] == scores[j]) hits += 0.5;
        }
    }
    return hits / static_cast<double>(pairs);
}

// Step-integration oracle for average precision: walk the distinct score
// thresholds from high to low and recount the confusion table each time.
double auprc_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
    std::vector<double> thresholds = scores;
    std::sort(thresholds.begin(), thresholds.end(), std::greater<double>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    std::size_t total_pos = 0;
    for (int l : labels) total_pos += l == 1 ? 1 : 0;
    double ap = 0.0, prev_recall = 0.0;
    for (double th : thresholds) {
        std::size_t tp = 0, fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= th) (labels[i] == 1 ? tp : fp)++;
        }
        double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
        double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return ap;
}

}  // namespace

TEST_CASE("metric closed-form examples") {
    GranularityMetrics m = compute_metrics({0.9, 0.8, 0.3, 0.2}, {1, 1, 0, 0});
    CHECK(m.auc.value() == 1.0);
    CHECK(m.auprc.value() == 1.0);
    CHECK(m.acc == 1.0);
    CHECK(m.f1 == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.precision == 1.0);

    GranularityMetrics tie = compute_metrics({0.4, 0.4}, {1, 0});
    CHECK(tie.auc.value() == 0.5);

    GranularityMetrics single = compute_metrics({0.7, 0.2}, {1, 1});
    CHECK_FALSE(single.auc.has_value());
    CHECK_FALSE(single.auprc.has_value());
    CHECK(single.acc == 0.5);  // threshold metrics still computed
    CHECK(single.recall == 0.5);
}

TEST_CASE("AUC equals brute-force pairwise counting on 200 random cases") {
    auto rng = make_rng(801);
    for (int rep = 0; rep < 200; ++rep) {
        std::size_t n = 5 + static_cast<std::size_t>(rand_uniform({1}, rng, 0.0, 40.0).item());
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        bool has_pos = false, has_neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            // quantized scores so ties actually occur
            scores[i] = std::round(rand_uniform({1}, rng, 0.0, 1.0).item() * 8.0) / 8.0;
            labels[i] = rand_uniform({1}, rng, 0.0, 1.0).item() < 0.5 ? 1 : 0;
            (labels[i] ? has_pos : has_neg) = true;
        }
        if (!has_pos || !has_neg) continue;
        CHECK(auc_rank(scores, labels) == auc_bruteforce(scores, labels));
    }
}

TEST_CASE("AUPRC matches the step-integration oracle") {
    auto rng = make_rng(802);
    for (int rep = 0; rep < 100; ++rep) {
        std::size_t n = 4 + static_cast<std::size_t>(rand_uniform({1}, rng, 0.0, 30.0).item());
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        bool has_pos = false, has_neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            bool with_ties = rep % 2 == 0;
            double raw = rand_uniform({1}, rng, 0.0, 1.0).item();
            scores[i] = with_ties ? std::round(raw * 6.0) / 6.0 : raw;
            labels[i] = rand_uniform({1}, rng, 0.0, 1.0).item() < 0.4 ? 1 : 0;
            (labels[i] ? has_pos : has_neg) = true;
        }
        if (!has_pos || !has_neg) continue;
        CHECK(auprc_step(scores, labels) == Catch::Approx(auprc_oracle(scores, labels)).margin(1e-12));
    }
}

TEST_CASE("AUC is invariant under strictly monotone transforms") {
    auto rng = make_rng(803);
    std::vector<double> scores(40);
    std::vector<int> labels(40);
    for (std::size_t i = 0; i < 40; ++i) {
        scores[i] = rand_uniform({1}, rng, 0.0, 1.0).item();
        labels[i] = i % 3 == 0 ? 1 : 0;
    }
    double base = auc_rank(scores, labels);
    std::vector<double> warped(40);
    for (std::size_t i = 0; i < 40; ++i) warped[i] = std::exp(3.0 * scores[i]) + 7.0;
    CHECK(auc_rank(warped, labels) == base);
    for (std::size_t i = 0; i < 40; ++i) warped[i] = std::atan(scores[i] - 0.5);
    CHECK(auc_rank(warped, labels) == base);
}

TEST_CASE("fisher combination values") {
    FisherResult all_ones = fisher_combined({1.0, 1.0, 1.0, 1.0, 1.0, 1.0});
    CHECK(all_ones.statistic == 0.0);
    CHECK(all_ones.p_value == 1.0);

    FisherResult six = fisher_combined(std::vector<double>(6, 0.05));
    CHECK(six.statistic == Catch::Approx(35.9488).margin(1e-3));

    // one p-value: the combination is the identity
    for (double p : {0.9, 0.5, 0.05, 1e-4}) {
        FisherResult one = fisher_combined({p});
        CHECK(one.p_value == Catch::Approx(p).margin(1e-9));
    }

    // permutation invariance
    FisherResult a = fisher_combined({0.2, 0.7, 0.01});
    FisherResult b = fisher_combined({0.7, 0.01, 0.2});
    CHECK(a.statistic == Catch::Approx(b.statistic).margin(1e-12));
    CHECK(a.p_value == Catch::Approx(b.p_value).margin(1e-12));

    // zeros are floored, out-of-range values rejected
    CHECK(std::isfinite(fisher_combined({0.0, 0.5}).statistic));
    CHECK_THROWS_AS(fisher_combined({1.5}), value_error);
    CHECK_THROWS_AS(fisher_combined({-0.1}), value_error);
}

TEST_CASE("welch two-sample p-values") {
    // identical samples: no evidence of a difference
    CHECK(welch_two_sample_p({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == Catch::Approx(1.0).margin(1e-9));
    // strongly separated samples: tiny p
    CHECK(welch_two_sample_p({0.0, 0.01, 0.02, 0.01, 0.0}, {5.0, 5.01, 5.02, 4.99, 5.0}) < 1e-6);
    // degenerate zero-variance cases
    CHECK(welch_two_sample_p({2.0, 2.0, 2.0}, {2.0, 2.0, 2.0}) == 1.0);
    CHECK(welch_two_sample_p({2.0, 2.0, 2.0}, {3.0, 3.0, 3.0}) == 0.0);
    CHECK_THROWS_AS(welch_two_sample_p({1.0}, {1.0, 2.0}), value_error);

    // symmetric t survival sanity: p(t = 0) = 1
    CHECK(student_t_two_sided_p(0.0, 7.0) == Catch::Approx(1.0).margin(1e-12));
    // classic value: two-sided p for t = 2.776 at 4 dof is ~0.05
    CHECK(student_t_two_sided_p(2.776, 4.0) == Catch::Approx(0.05).margin(1e-3));
}

TEST_CASE("momentum trace structure") {
    std::vector<MatchSequence> matches = generate_synthetic_matches(1, 55);
    const MatchSequence& m = matches[0];
    ModelConfig mc;
    mc.heads = 2;
    mc.head_dim = 4;
    mc.embed_dim = 16;
    mc.caam_heads = 4;
    mc.head_hidden = 8;
    HydraNetModel model = HydraNetModel::init(mc, 2);
    MomentumTrace trace = export_ms_trace(m, model);
    const std::size_t n = m.point_count();
    REQUIRE(trace.points.size() == n);

    // complement and half-time flags
    std::size_t hm_count = 0;
    for (std::size_t t = 0; t < n; ++t) {
        CHECK(trace.points[t].ms_p1 + trace.points[t].ms_p2 == 1.0);
        if (trace.points[t].half_time) {
            ++hm_count;
            CHECK(t + 1 == half_time_index(n));
        }
    }
    CHECK(hm_count == 1);

    // streaks partition 1..N with constant winners
    std::size_t cursor = 0;
    for (const Streak& s : trace.streaks) {
        CHECK(s.begin == cursor);
        CHECK(s.end > s.begin);
        for (std::size_t t = s.begin; t < s.end; ++t) {
            CHECK((m.y_point[t] == 1 ? 1 : 2) == s.winner);
        }
        double mean = 0.0;
        for (std::size_t t = s.begin; t < s.end; ++t) mean += trace.points[t].ms_p1;
        mean /= static_cast<double>(s.end - s.begin);
        CHECK(s.mean_ms_p1 == Catch::Approx(mean).margin(1e-12));
        cursor = s.end;
    }
    CHECK(cursor == n);

    // boundary flags match game/set starts
    for (const SpanBoundary& g : m.games) {
        if (g.begin > 0) CHECK(trace.points[g.begin].cross_game);
    }
    for (std::size_t t = 0; t < n; ++t) {
        bool is_start = false;
        for (const SpanBoundary& g : m.games) is_start = is_start || (g.begin == t && t > 0);
        CHECK(trace.points[t].cross_game == is_start);
    }

    // CSV export: deterministic, one row per point
    std::ostringstream csv1, csv2;
    write_trace_csv(csv1, trace);
    write_trace_csv(csv2, export_ms_trace(m, model));
    const std::string text = csv1.str();
    CHECK(text == csv2.str());
    std::size_t lines = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
    CHECK(lines == n + 1);
}

TEST_CASE("streak mean example") {
    // three consecutive wins by player 1 with scores 0.6 / 0.7 / 0.8
    MatchSequence m;
    m.match_id = "streaks";
    for (int t = 0; t < 4; ++t) {
        m.p1_features.push_back({});
        m.p2_features.push_back({});
        m.y_point.push_back(t < 3 ? 1 : 0);
        m.meta.push_back({1, 1, t + 1});
    }
    m.games = {{0, 4, 1}};
    m.sets = {{0, 4, 1}};
    m.y_match = 1;

    MomentumTrace trace;
    trace.match_id = m.match_id;
    for (int t = 0; t < 4; ++t) {
        TracePoint tp;
        tp.ms_p1 = t < 3 ? 0.6 + 0.1 * t : 0.2;
        tp.ms_p2 = 1.0 - tp.ms_p1;
        trace.points.push_back(tp);
    }
    // reproduce the streak derivation on the hand data
    std::size_t begin = 0;
    for (std::size_t t = 1; t <= 4; ++t) {
        if (t == 4 || m.y_point[t] != m.y_point[begin]) {
            Streak s;
            s.begin = begin;
            s.end = t;
            s.winner = m.y_point[begin] == 1 ? 1 : 2;
            for (std::size_t k = begin; k < t; ++k) s.mean_ms_p1 += trace.points[k].ms_p1;
            s.mean_ms_p1 /= static_cast<double>(t - begin);
            trace.streaks.push_back(s);
            begin = t;
        }
    }
    REQUIRE(trace.streaks.size() == 2);
    CHECK(trace.streaks[0].mean_ms_p1 == Catch::Approx(0.7).margin(1e-12));
    CHECK(trace.streaks[0].winner == 1);
}

TEST_CASE("metric report aggregates folds") {
    std::vector<std::map<Granularity, GranularityMetrics>> folds(2);
    GranularityMetrics a;
    a.auc = 0.8;
    a.acc = 0.7;
    GranularityMetrics b;
    b.auc = 0.6;
    b.acc = 0.9;
    folds[0][Granularity::point] = a;
    folds[1][Granularity::point] = b;
    MetricReport r = MetricReport::from_folds(folds);
    CHECK(r.stats[Granularity::point][0].mean == Catch::Approx(0.7));
    CHECK(r.stats[Granularity::point][0].stddev == Catch::Approx(0.1));
    CHECK(r.stats[Granularity::point][2].mean == Catch::Approx(0.8));
    CHECK(r.stats[Granularity::point][0].count == 2);
}

TEST_CASE("planted-null ablation: zeroing a dead modality changes nothing") {
    // constant running distance makes the fatigue feature identically zero
    PlantConfig pc;
    pc.constant_distance = true;
    std::vector<MatchSequence> matches = generate_synthetic_matches(12, 66, pc);
    for (const MatchSequence& m : matches) {
        for (std::size_t t = 0; t < m.point_count(); ++t) {
            CHECK(m.p1_features[t][15] == 0.0);
            CHECK(m.p2_features[t][15] == 0.0);
        }
    }
    std::vector<std::string> ids;
    for (const MatchSequence& m : matches) ids.push_back(m.match_id);
    DatasetSplit split = split_dataset(ids, 0.2, 3, 9);

    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.seed = 11;
    cfg.heads = 2;
    cfg.head_dim = 2;
    cfg.embed_dim = 8;
    cfg.caam_heads = 2;
    cfg.head_hidden = 4;
    cfg.folds = 3;
    MlmmResult res = run_mlmm_ablation(matches, split, cfg, Modality::fatigue);
    // The dead modality carries no information, so the ablation must not be
    // statistically significant and the fold-mean deltas stay small. (It is
    // not bit-exact: the ablated model also loses the modality's slice of
    // the tower output inside the attention groups and retrains around it.)
    for (Granularity g : {Granularity::point, Granularity::game, Granularity::match}) {
        const MlmmGranularityResult& gr = res.per_granularity.at(g);
        if (gr.used_metrics == 0) continue;
        CHECK(gr.combined.p_value > 0.05);
        for (std::size_t mi = 0; mi < 6; ++mi) {
            double base = res.baseline.stats[g][mi].mean;
            double abl = res.ablated.stats[g][mi].mean;
            if (std::isnan(base) || std::isnan(abl)) continue;
            CHECK(std::abs(base - abl) < 0.2);
        }
    }
}

TEST_CASE("ablation masking zeroes the requested group") {
    std::vector<MatchSequence> matches = generate_synthetic_matches(1, 77);
    ModelConfig mc;
    mc.heads = 2;
    mc.head_dim = 2;
    mc.embed_dim = 8;
    mc.caam_heads = 2;
    mc.head_hidden = 4;
    mc.ablated = Modality::psychology;
    HydraNetModel model = HydraNetModel::init(mc, 3);
    // the masked input slice drops 7 of 16 features per player
    Tensor pts = model.game_points(matches[0], matches[0].p1_features, matches[0].games[0]);
    for (std::size_t i = 0; i < pts.extent(0); ++i) {
        for (std::size_t j = kModalitySlices[2].first; j < kModalitySlices[2].second; ++j) {
            CHECK(pts.at(i, j) == 0.0);
        }
    }
    CHECK(kModalitySlices[2].second - kModalitySlices[2].first == 7);
    CHECK(kModalitySlices[3].second - kModalitySlices[3].first == 1);
    // the full forward still runs
    auto fwd = model.forward_match(matches[0], false);
    CHECK(fwd.scores.extent(0) == matches[0].point_count());
}
