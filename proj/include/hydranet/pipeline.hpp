#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "hydranet/common.hpp"
#include "hydranet/schema.hpp"

namespace hydranet {

// ---------------------------------------------------------------------------
// Cleaning
// ---------------------------------------------------------------------------

namespace detail {

inline double parse_depth_token(const std::string& tok, const char* yes, const char* no,
                                const std::string& col, std::size_t line) {
    if (tok.empty()) return 0.0;  // missing -> 0
    if (tok == yes) return 1.0;
    if (tok == no) return 0.0;
    // Already-numeric tokens appear when re-cleaning an exported file.
    if (tok == "1") return 1.0;
    if (tok == "0") return 0.0;
    throw value_error("unknown " + col + " token '" + tok + "' at line " + std::to_string(line));
}

inline bool missing_number(const std::string& tok) {
    return tok.empty() || tok == "NA" || tok == "NaN" || tok == "nan";
}

}  // namespace detail

/// Applies the row-drop and field-transformation rules to raw records:
/// drops rows whose game score reads 0X/0Y and rows without a server, maps
/// depth tokens to 0/1, recomputes the six difference fields from the
/// running sums, and sets the per-point won indicators. Serve speeds are kept
/// in mph with a missing flag for the imputation stage; only the serving
/// player's speed is meaningful, the other column is fixed at 0.
inline std::vector<PointRecord> clean_points(const std::vector<RawRecord>& raw) {
    std::vector<PointRecord> out;
    out.reserve(raw.size());
    auto col = [](const char* n) { return column_index(n); };
    for (const RawRecord& r : raw) {
        const std::size_t ln = r.line_number;
        const std::string& s1 = r.get(col("p1_score"));
        const std::string& s2 = r.get(col("p2_score"));
        if (s1 == "0X" || s1 == "0Y" || s2 == "0X" || s2 == "0Y") continue;

        PointRecord p;
        auto fi = [&](const char* n) {
            return static_cast<int>(parse_int(r.get(col(n)), std::string(n) + " at line " + std::to_string(ln)));
        };
        auto fl = [&](const char* n) {
            return parse_int(r.get(col(n)), std::string(n) + " at line " + std::to_string(ln));
        };
        auto fd = [&](const char* n) {
            return parse_double(r.get(col(n)), std::string(n) + " at line " + std::to_string(ln));
        };
        p.p1_serve = fi("p1_serve");
        p.p2_serve = fi("p2_serve");
        if (p.p1_serve == 0 && p.p2_serve == 0) continue;  // server listed as 0

        p.match_id = r.get(col("match_id"));
        p.player1 = r.get(col("player1"));
        p.player2 = r.get(col("player2"));
        p.elapsed_time = r.get(col("elapsed_time"));
        p.set_no = fi("set_no");
        p.game_no = fi("game_no");
        p.point_no = fi("point_no");
        p.p1_sets_won = fi("p1_sets_won");
        p.p2_sets_won = fi("p2_sets_won");
        p.p1_games_won = fi("p1_games_won");
        p.p2_games_won = fi("p2_games_won");
        p.p1_score = s1;
        p.p2_score = s2;
        p.points_victor = fi("points_victor");
        if (p.points_victor != 1 && p.points_victor != 2) {
            throw value_error("points_victor must be 1 or 2 at line " + std::to_string(ln));
        }
        p.p1_points_sum = fl("p1_points_sum");
        p.p2_points_sum = fl("p2_points_sum");
        p.game_victor = fi("game_victor");
        p.set_victor = fi("set_victor");
        p.p1_ace = fi("p1_ace");
        p.p2_ace = fi("p2_ace");
        p.p1_winner = fi("p1_winner");
        p.p2_winner = fi("p2_winner");
        p.p1_double_fault = fi("p1_double_fault");
        p.p2_double_fault = fi("p2_double_fault");
        p.p1_unf_err = fi("p1_unf_err");
        p.p2_unf_err = fi("p2_unf_err");
        p.p1_net_pt = fi("p1_net_pt");
        p.p2_net_pt = fi("p2_net_pt");
        p.p1_net_pt_won = fi("p1_net_pt_won");
        p.p2_net_pt_won = fi("p2_net_pt_won");
        p.p1_break_pt = fi("p1_break_pt");
        p.p2_break_pt = fi("p2_break_pt");
        p.p1_break_pt_won = fi("p1_break_pt_won");
        p.p2_break_pt_won = fi("p2_break_pt_won");
        p.p1_break_pt_missed = fi("p1_break_pt_missed");
        p.p2_break_pt_missed = fi("p2_break_pt_missed");
        p.p1_distance_run = fd("p1_distance_run");
        p.p2_distance_run = fd("p2_distance_run");

        // Per-point won indicators.
        p.p1_points_won = p.points_victor == 1 ? 1 : 0;
        p.p2_points_won = p.points_victor == 2 ? 1 : 0;

        // Differences are recomputed from the running counts.
        p.p1_points_diff = p.p1_points_sum - p.p2_points_sum;
        p.p2_points_diff = -p.p1_points_diff;
        p.p1_game_diff = p.p1_games_won - p.p2_games_won;
        p.p2_game_diff = -p.p1_game_diff;
        p.p1_set_diff = p.p1_sets_won - p.p2_sets_won;
        p.p2_set_diff = -p.p1_set_diff;

        // Depth tokens.
        p.p1_return_depth = detail::parse_depth_token(r.get(col("p1_return_depth")), "D", "ND",
                                                      "p1_return_depth", ln);
        p.p2_return_depth = detail::parse_depth_token(r.get(col("p2_return_depth")), "D", "ND",
                                                      "p2_return_depth", ln);
        p.p1_serve_depth = detail::parse_depth_token(r.get(col("p1_serve_depth")), "CTL", "NCTL",
                                                     "p1_serve_depth", ln);
        p.p2_serve_depth = detail::parse_depth_token(r.get(col("p2_serve_depth")), "CTL", "NCTL",
                                                     "p2_serve_depth", ln);

        // Serve speed: only the server's column carries a measurement.
        const std::string& v1 = r.get(col("p1_serve_speed"));
        const std::string& v2 = r.get(col("p2_serve_speed"));
        if (p.p1_serve == 1) {
            if (detail::missing_number(v1)) {
                p.p1_speed_missing = true;
            } else {
                p.p1_serve_speed = parse_double(v1, "p1_serve_speed at line " + std::to_string(ln));
                if (p.p1_serve_speed == 0.0) p.p1_speed_missing = true;
            }
        }
        if (p.p2_serve == 1) {
            if (detail::missing_number(v2)) {
                p.p2_speed_missing = true;
            } else {
                p.p2_serve_speed = parse_double(v2, "p2_serve_speed at line " + std::to_string(ln));
                if (p.p2_serve_speed == 0.0) p.p2_speed_missing = true;
            }
        }
        out.push_back(std::move(p));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serve-speed imputation
// ---------------------------------------------------------------------------

namespace detail {

// Weighted empirical distribution over speed values. The player and global
// samples each carry half of the total mass.
struct SpeedMixture {
    std::vector<std::pair<double, double>> entries;  // (value, weight), sorted by value
    double median = 0.0;

    void build(const std::vector<double>& player, const std::vector<double>& global) {
        entries.clear();
        if (!player.empty()) {
            double w = 0.5 / static_cast<double>(player.size());
            for (double v : player) entries.emplace_back(v, w);
        }
        double gw = (player.empty() ? 1.0 : 0.5) / static_cast<double>(global.size());
        for (double v : global) entries.emplace_back(v, gw);
        std::sort(entries.begin(), entries.end());
        // Median with the midpoint convention: when the cumulative mass hits
        // exactly one half at an entry boundary, average with the next value.
        double acc = 0.0;
        median = entries.back().first;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            acc += entries[i].second;
            if (acc > 0.5 + 1e-12) {
                median = entries[i].first;
                break;
            }
            if (std::abs(acc - 0.5) <= 1e-12) {
                median = i + 1 < entries.size() ? 0.5 * (entries[i].first + entries[i + 1].first)
                                                : entries[i].first;
                break;
            }
        }
    }

    double draw(std::mt19937_64& rng, std::optional<bool> upper_half) const {
        std::vector<std::pair<double, double>> pool;
        if (upper_half.has_value()) {
            for (const auto& [v, w] : entries) {
                if ((*upper_half && v >= median) || (!*upper_half && v < median)) pool.emplace_back(v, w);
            }
        }
        if (pool.empty()) pool = entries;
        double total = 0.0;
        for (const auto& [v, w] : pool) total += w;
        std::uniform_real_distribution<double> dist(0.0, total);
        double u = dist(rng);
        double acc = 0.0;
        for (const auto& [v, w] : pool) {
            acc += w;
            if (u <= acc) return v;
        }
        return pool.back().first;
    }
};

}  // namespace detail

/// Fills missing serve speeds. Per server, known speeds from the rest of the
/// dataset are merged 1:1 with the global speed distribution; points in
/// service games the server won draw from the above-median half of that
/// mixture, lost games from the below-median half. Deterministic given seed.
inline void impute_serve_speed(std::vector<PointRecord>& records, std::uint64_t seed) {
    std::vector<double> global;
    std::map<std::string, std::vector<double>> per_player;
    for (const PointRecord& p : records) {
        if (p.p1_serve == 1 && !p.p1_speed_missing) {
            global.push_back(p.p1_serve_speed);
            per_player[p.player1].push_back(p.p1_serve_speed);
        }
        if (p.p2_serve == 1 && !p.p2_speed_missing) {
            global.push_back(p.p2_serve_speed);
            per_player[p.player2].push_back(p.p2_serve_speed);
        }
    }
    bool any_missing = false;
    for (const PointRecord& p : records) {
        if (p.p1_speed_missing || p.p2_speed_missing) {
            any_missing = true;
            break;
        }
    }
    if (!any_missing) return;
    if (global.empty()) throw data_error("cannot impute serve speeds: no known speeds in dataset");

    // Game winners, keyed by (match, set, game): the victor recorded on a
    // boundary point, falling back to the winner of the game's last point.
    std::map<std::tuple<std::string, int, int>, int> game_winner;
    std::map<std::tuple<std::string, int, int>, int> last_victor;
    for (const PointRecord& p : records) {
        auto key = std::make_tuple(p.match_id, p.set_no, p.game_no);
        if (p.game_victor == 1 || p.game_victor == 2) game_winner[key] = p.game_victor;
        last_victor[key] = p.points_victor;
    }
    for (const auto& [key, victor] : last_victor) {
        if (!game_winner.count(key)) game_winner[key] = victor;
    }

    auto rng = make_rng(seed, /*stream=*/17);
    std::map<std::string, detail::SpeedMixture> mixtures;
    auto mixture_for = [&](const std::string& player) -> const detail::SpeedMixture& {
        auto it = mixtures.find(player);
        if (it == mixtures.end()) {
            detail::SpeedMixture m;
            auto pit = per_player.find(player);
            m.build(pit == per_player.end() ? std::vector<double>{} : pit->second, global);
            it = mixtures.emplace(player, std::move(m)).first;
        }
        return it->second;
    };

    for (PointRecord& p : records) {
        auto key = std::make_tuple(p.match_id, p.set_no, p.game_no);
        if (p.p1_speed_missing) {
            bool won = game_winner[key] == 1;
            p.p1_serve_speed = mixture_for(p.player1).draw(rng, won);
            p.p1_speed_missing = false;
        }
        if (p.p2_speed_missing) {
            bool won = game_winner[key] == 2;
            p.p2_serve_speed = mixture_for(p.player2).draw(rng, won);
            p.p2_speed_missing = false;
        }
    }
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

/// Min-max map onto [-1, 1]: Y = 2 (x - min) / (max - min) - 1, with x
/// clamped into [min, max] first.
inline double normalize_serve_speed(double x, double x_min, double x_max) {
    if (!(x_min < x_max)) {
        throw config_error("serve speed range invalid: min " + format_double(x_min) +
                           " must be below max " + format_double(x_max));
    }
    double c = std::min(std::max(x, x_min), x_max);
    return 2.0 * (c - x_min) / (x_max - x_min) - 1.0;
}

struct ZScoreResult {
    std::vector<double> values;
    double mu = 0.0;
    double sigma = 0.0;
    bool zero_spread = false;
};

/// Population z-score over the whole value set. Zero spread yields all zeros
/// with the zero_spread flag raised.
inline ZScoreResult zscore_distance_run(const std::vector<double>& values) {
    if (values.size() < 2) throw data_error("z-score requires at least two values");
    ZScoreResult r;
    double sum = 0.0;
    for (double v : values) sum += v;
    r.mu = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - r.mu) * (v - r.mu);
    r.sigma = std::sqrt(ss / static_cast<double>(values.size()));
    r.values.resize(values.size());
    if (r.sigma == 0.0) {
        r.zero_spread = true;
        std::fill(r.values.begin(), r.values.end(), 0.0);
        return r;
    }
    for (std::size_t i = 0; i < values.size(); ++i) r.values[i] = (values[i] - r.mu) / r.sigma;
    return r;
}

/// Dataset-level normalization constants, written alongside cleaned data so
/// inference can reuse them.
struct NormalizationStats {
    double speed_min = 0.0;
    double speed_max = 0.0;
    double dist_mu = 0.0;
    double dist_sigma = 0.0;

    std::string serialize() const {
        std::string s;
        s += "speed_min=" + format_double(speed_min) + "\n";
        s += "speed_max=" + format_double(speed_max) + "\n";
        s += "dist_mu=" + format_double(dist_mu) + "\n";
        s += "dist_sigma=" + format_double(dist_sigma) + "\n";
        return s;
    }

    static NormalizationStats parse(const std::string& text) {
        NormalizationStats s;
        bool seen[4] = {false, false, false, false};
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto eq = line.find('=');
            if (eq == std::string::npos) throw config_error("bad normalization line '" + line + "'");
            std::string key = line.substr(0, eq);
            double val = parse_double(line.substr(eq + 1), key);
            if (key == "speed_min") s.speed_min = val, seen[0] = true;
            else if (key == "speed_max") s.speed_max = val, seen[1] = true;
            else if (key == "dist_mu") s.dist_mu = val, seen[2] = true;
            else if (key == "dist_sigma") s.dist_sigma = val, seen[3] = true;
            else throw config_error("unknown normalization key '" + key + "'");
        }
        for (bool b : seen)
            if (!b) throw config_error("normalization metadata is missing a key");
        return s;
    }
};

/// Normalizes serve speeds (servers only) and running distances in place.
/// Stats are computed from the data unless provided.
inline NormalizationStats normalize_records(std::vector<PointRecord>& records,
                                            const NormalizationStats* reuse = nullptr) {
    NormalizationStats stats;
    if (reuse) {
        stats = *reuse;
    } else {
        bool any = false;
        stats.speed_min = std::numeric_limits<double>::infinity();
        stats.speed_max = -std::numeric_limits<double>::infinity();
        for (const PointRecord& p : records) {
            if (p.p1_serve == 1 && !p.p1_speed_missing) {
                stats.speed_min = std::min(stats.speed_min, p.p1_serve_speed);
                stats.speed_max = std::max(stats.speed_max, p.p1_serve_speed);
                any = true;
            }
            if (p.p2_serve == 1 && !p.p2_speed_missing) {
                stats.speed_min = std::min(stats.speed_min, p.p2_serve_speed);
                stats.speed_max = std::max(stats.speed_max, p.p2_serve_speed);
                any = true;
            }
        }
        if (!any) throw data_error("no serve speeds available for normalization");
    }
    for (PointRecord& p : records) {
        if (p.p1_serve == 1) p.p1_serve_speed = normalize_serve_speed(p.p1_serve_speed, stats.speed_min, stats.speed_max);
        else p.p1_serve_speed = 0.0;
        if (p.p2_serve == 1) p.p2_serve_speed = normalize_serve_speed(p.p2_serve_speed, stats.speed_min, stats.speed_max);
        else p.p2_serve_speed = 0.0;
    }

    if (reuse) {
        for (PointRecord& p : records) {
            if (stats.dist_sigma == 0.0) {
                p.p1_distance_run = 0.0;
                p.p2_distance_run = 0.0;
            } else {
                p.p1_distance_run = (p.p1_distance_run - stats.dist_mu) / stats.dist_sigma;
                p.p2_distance_run = (p.p2_distance_run - stats.dist_mu) / stats.dist_sigma;
            }
        }
    } else {
        std::vector<double> pooled;
        pooled.reserve(records.size() * 2);
        for (const PointRecord& p : records) {
            pooled.push_back(p.p1_distance_run);
            pooled.push_back(p.p2_distance_run);
        }
        ZScoreResult z = zscore_distance_run(pooled);
        stats.dist_mu = z.mu;
        stats.dist_sigma = z.sigma;
        for (std::size_t i = 0; i < records.size(); ++i) {
            records[i].p1_distance_run = z.values[2 * i];
            records[i].p2_distance_run = z.values[2 * i + 1];
        }
    }
    return stats;
}

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

inline constexpr std::size_t kFeatureDim = 16;
inline constexpr std::array<std::pair<std::size_t, std::size_t>, 4> kModalitySlices = {
    {{0, 6}, {6, 8}, {8, 15}, {15, 16}}};  // serve, return, psychology, fatigue

using PlayerFeatureVector = std::array<double, kFeatureDim>;

/// Per-player factors in fixed order: serve(6), return(2), psychology(7),
/// fatigue(1).
inline std::pair<PlayerFeatureVector, PlayerFeatureVector> extract_momentum_features(
    const PointRecord& p) {
    PlayerFeatureVector f1 = {
        static_cast<double>(p.p1_serve),
        static_cast<double>(p.p1_double_fault),
        static_cast<double>(p.p1_break_pt_missed),
        static_cast<double>(p.p1_ace),
        p.p1_serve_speed,
        p.p1_serve_depth,
        static_cast<double>(p.p1_break_pt_won),
        p.p1_return_depth,
        static_cast<double>(p.p1_unf_err),
        static_cast<double>(p.p1_net_pt),
        static_cast<double>(p.p1_net_pt_won),
        static_cast<double>(p.p1_winner),
        static_cast<double>(p.p1_points_diff),
        static_cast<double>(p.p1_game_diff),
        static_cast<double>(p.p1_set_diff),
        p.p1_distance_run,
    };
    PlayerFeatureVector f2 = {
        static_cast<double>(p.p2_serve),
        static_cast<double>(p.p2_double_fault),
        static_cast<double>(p.p2_break_pt_missed),
        static_cast<double>(p.p2_ace),
        p.p2_serve_speed,
        p.p2_serve_depth,
        static_cast<double>(p.p2_break_pt_won),
        p.p2_return_depth,
        static_cast<double>(p.p2_unf_err),
        static_cast<double>(p.p2_net_pt),
        static_cast<double>(p.p2_net_pt_won),
        static_cast<double>(p.p2_winner),
        static_cast<double>(p.p2_points_diff),
        static_cast<double>(p.p2_game_diff),
        static_cast<double>(p.p2_set_diff),
        p.p2_distance_run,
    };
    return {f1, f2};
}

// ---------------------------------------------------------------------------
// Match sequences
// ---------------------------------------------------------------------------

struct SpanBoundary {
    std::size_t begin = 0;  // first point index (inclusive)
    std::size_t end = 0;    // one past the last point
    int victor = 0;
};

struct PointMeta {
    int set_no = 0;
    int game_no = 0;
    int point_no = 0;
};

/// Chronological per-match sequence of paired feature vectors plus labels and
/// game/set structure.
struct MatchSequence {
    std::string match_id;
    std::vector<PlayerFeatureVector> p1_features;
    std::vector<PlayerFeatureVector> p2_features;
    std::vector<int> y_point;  // 1 when player1 won the point
    std::vector<PointMeta> meta;
    std::vector<SpanBoundary> games;
    std::vector<SpanBoundary> sets;
    int y_match = 0;  // 1 when player1 won the match

    std::size_t point_count() const { return y_point.size(); }

    void validate() const {
        if (p1_features.size() != y_point.size() || p2_features.size() != y_point.size() ||
            meta.size() != y_point.size()) {
            throw data_error("match " + match_id + ": inconsistent sequence lengths");
        }
        auto check_spans = [&](const std::vector<SpanBoundary>& spans, const char* what) {
            std::size_t cursor = 0;
            for (const SpanBoundary& s : spans) {
                if (s.begin != cursor || s.end <= s.begin || s.end > y_point.size()) {
                    throw data_error("match " + match_id + ": invalid " + what + " boundaries");
                }
                if (s.victor != 1 && s.victor != 2) {
                    throw data_error("match " + match_id + ": " + what + " has no victor");
                }
                cursor = s.end;
            }
            if (cursor != y_point.size()) {
                throw data_error("match " + match_id + ": " + what + " boundaries do not cover all points");
            }
        };
        check_spans(games, "game");
        check_spans(sets, "set");
        if (y_match != 1 && y_match != 2) {
            throw data_error("match " + match_id + ": missing match winner");
        }
    }
};

/// Groups cleaned records by match (row order preserved) and builds validated
/// sequences. Game and set victors come from the victor columns on boundary
/// points, falling back to the winner of the span's last point (for games) or
/// of its last game (for sets).
inline std::vector<MatchSequence> build_match_sequences(const std::vector<PointRecord>& records) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<const PointRecord*>> by_match;
    for (const PointRecord& p : records) {
        auto [it, inserted] = by_match.try_emplace(p.match_id);
        if (inserted) order.push_back(p.match_id);
        it->second.push_back(&p);
    }
    std::vector<MatchSequence> out;
    out.reserve(order.size());
    for (const std::string& id : order) {
        const auto& pts = by_match[id];
        MatchSequence m;
        m.match_id = id;
        m.p1_features.reserve(pts.size());
        m.p2_features.reserve(pts.size());
        for (const PointRecord* p : pts) {
            auto [f1, f2] = extract_momentum_features(*p);
            m.p1_features.push_back(f1);
            m.p2_features.push_back(f2);
            m.y_point.push_back(p->points_victor == 1 ? 1 : 0);
            m.meta.push_back({p->set_no, p->game_no, p->point_no});
        }
        // Game spans from (set_no, game_no) transitions.
        std::size_t begin = 0;
        for (std::size_t t = 1; t <= pts.size(); ++t) {
            bool boundary = t == pts.size() || pts[t]->set_no != pts[begin]->set_no ||
                            pts[t]->game_no != pts[begin]->game_no;
            if (!boundary) continue;
            SpanBoundary g;
            g.begin = begin;
            g.end = t;
            const PointRecord* last = pts[t - 1];
            g.victor = (last->game_victor == 1 || last->game_victor == 2) ? last->game_victor
                                                                          : last->points_victor;
            m.games.push_back(g);
            begin = t;
        }
        // Set spans from set_no transitions.
        begin = 0;
        for (std::size_t t = 1; t <= pts.size(); ++t) {
            bool boundary = t == pts.size() || pts[t]->set_no != pts[begin]->set_no;
            if (!boundary) continue;
            SpanBoundary s;
            s.begin = begin;
            s.end = t;
            const PointRecord* last = pts[t - 1];
            if (last->set_victor == 1 || last->set_victor == 2) {
                s.victor = last->set_victor;
            } else {
                for (const SpanBoundary& g : m.games) {
                    if (g.end == t) s.victor = g.victor;
                }
            }
            m.sets.push_back(s);
            begin = t;
        }
        int p1_sets = 0, p2_sets = 0;
        for (const SpanBoundary& s : m.sets) (s.victor == 1 ? p1_sets : p2_sets)++;
        m.y_match = p1_sets > p2_sets ? 1 : 2;
        m.validate();
        out.push_back(std::move(m));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dataset split
// ---------------------------------------------------------------------------

struct DatasetSplit {
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
    std::vector<std::vector<std::string>> folds;
};

/// Splits by match unit: seeded shuffle, last ceil(test_fraction * n) ids as
/// test, remaining ids partitioned into contiguous folds with remainder
/// matches assigned to the earliest folds.
inline DatasetSplit split_dataset(const std::vector<std::string>& match_ids,
                                  double test_fraction, std::size_t folds, std::uint64_t seed) {
    if (match_ids.empty()) throw config_error("cannot split an empty match list");
    if (folds == 0) throw config_error("fold count must be positive");
    std::vector<std::string> ids(match_ids);
    std::sort(ids.begin(), ids.end());  // stable base order before the seeded permutation
    auto rng = make_rng(seed, /*stream=*/3);
    std::shuffle(ids.begin(), ids.end(), rng);

    const std::size_t n = ids.size();
    const std::size_t n_test = static_cast<std::size_t>(
        std::ceil(test_fraction * static_cast<double>(n)));
    if (n_test >= n) throw config_error("test fraction leaves no training matches");
    const std::size_t n_train = n - n_test;
    if (n_train < folds) {
        throw config_error("need at least " + std::to_string(folds) + " training matches, have " +
                           std::to_string(n_train));
    }
    DatasetSplit split;
    split.train_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
    const std::size_t base = n_train / folds;
    const std::size_t rem = n_train % folds;
    std::size_t cursor = 0;
    for (std::size_t f = 0; f < folds; ++f) {
        std::size_t len = base + (f < rem ? 1 : 0);
        split.folds.emplace_back(split.train_ids.begin() + static_cast<std::ptrdiff_t>(cursor),
                                 split.train_ids.begin() + static_cast<std::ptrdiff_t>(cursor + len));
        cursor += len;
    }
    return split;
}

}  // namespace hydranet
