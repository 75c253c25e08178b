#pragma once

#include <algorithm>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "hydranet/pipeline.hpp"
#include "hydranet/schema.hpp"

namespace hydranet {

/// Signal configuration for the synthetic corpus. The point signal plants
/// winner-consistent indicator features on every point; the carryover signal
/// makes the winner of game g+1 equal the winner of the last point of game g
/// with the given probability.
struct PlantConfig {
    bool point_signal = true;
    double carryover_prob = 0.8;
    bool best_of_five = false;
    bool constant_distance = false;       // fatigue feature carries no information
    double missing_speed_fraction = 0.0;  // fraction of serve speeds left missing
};

namespace detail {

inline std::string score_token(int own, int other, bool tiebreak) {
    if (tiebreak) return std::to_string(own);
    static const char* names[4] = {"0", "15", "30", "40"};
    if (own >= 3 && other >= 3) {
        if (own == other) return "40";
        return own > other ? "AD" : "40";
    }
    return names[std::min(own, 3)];
}

inline std::string format_elapsed(long seconds) {
    long h = seconds / 3600;
    long m = (seconds / 60) % 60;
    long s = seconds % 60;
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%ld:%02ld:%02ld", h, m, s);
    return buf;
}

/// Point-victor sequence for one game with the designated winner. A biased
/// duel is simulated to a terminal score; if the wrong player comes out ahead
/// the victors are mirrored, which preserves scoring validity.
inline std::vector<int> simulate_game_points(int winner, bool tiebreak, std::mt19937_64& rng) {
    const int target = tiebreak ? 7 : 4;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<int> victors;
    int a = 0, b = 0;
    while (true) {
        int v;
        if (static_cast<int>(victors.size()) >= 48) {
            v = 1;  // force termination of long deuce battles
        } else {
            v = unit(rng) < 0.68 ? winner : 3 - winner;
        }
        victors.push_back(v);
        (v == 1 ? a : b)++;
        if ((a >= target || b >= target) && std::abs(a - b) >= 2) break;
    }
    int simulated_winner = a > b ? 1 : 2;
    if (simulated_winner != winner) {
        for (int& v : victors) v = 3 - v;
    }
    return victors;
}

}  // namespace detail

/// Generates a seeded corpus of complete matches as typed point records.
/// Matches obey Grand Slam scoring: games to >=4 points with margin >=2,
/// sets to 6 games with margin >=2 and a tiebreak game at 6-6, best-of-3 or
/// best-of-5 sets. Speeds are mph; run the pipeline (impute + normalize)
/// before model use.
inline std::vector<PointRecord> generate_synthetic_records(std::size_t count, std::uint64_t seed,
                                                           const PlantConfig& cfg = {}) {
    if (count < 1) throw config_error("synthetic corpus needs at least one match");
    std::vector<PointRecord> out;
    auto rng = make_rng(seed, /*stream=*/29);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> speed_dist(105.0, 10.0);
    std::uniform_real_distribution<double> dist_run(5.0, 45.0);

    const int sets_to_win = cfg.best_of_five ? 3 : 2;
    for (std::size_t mi = 0; mi < count; ++mi) {
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "synth-%04zu", mi);
        const std::string match_id = idbuf;
        char p1buf[32], p2buf[32];
        std::snprintf(p1buf, sizeof(p1buf), "Player_%02zu", mi % 16);
        std::snprintf(p2buf, sizeof(p2buf), "Player_%02zu", (mi + 7) % 16);

        int p1_sets = 0, p2_sets = 0;
        long long p1_sum = 0, p2_sum = 0;
        long elapsed = 0;
        int server = 1;
        int game_winner = unit(rng) < 0.5 ? 1 : 2;
        int set_no = 1;

        while (p1_sets < sets_to_win && p2_sets < sets_to_win) {
            int p1_games = 0, p2_games = 0;
            int game_no = 1;
            int set_winner = 0;
            while (set_winner == 0) {
                const bool tiebreak = p1_games == 6 && p2_games == 6;
                std::vector<int> victors = detail::simulate_game_points(game_winner, tiebreak, rng);

                int a = 0, b = 0;  // points inside this game, before the current point
                for (std::size_t pi = 0; pi < victors.size(); ++pi) {
                    const int v = victors[pi];
                    const bool last_of_game = pi + 1 == victors.size();
                    PointRecord p;
                    p.match_id = match_id;
                    p.player1 = p1buf;
                    p.player2 = p2buf;
                    elapsed += 25 + static_cast<long>(unit(rng) * 30.0);
                    p.elapsed_time = detail::format_elapsed(elapsed);
                    p.set_no = set_no;
                    p.game_no = game_no;
                    p.point_no = static_cast<int>(pi + 1);
                    p.p1_sets_won = p1_sets;
                    p.p2_sets_won = p2_sets;
                    p.p1_games_won = p1_games;
                    p.p2_games_won = p2_games;
                    p.p1_score = detail::score_token(a, b, tiebreak);
                    p.p2_score = detail::score_token(b, a, tiebreak);
                    p.p1_serve = server == 1 ? 1 : 0;
                    p.p2_serve = server == 2 ? 1 : 0;
                    p.points_victor = v;
                    p.p1_points_won = v == 1 ? 1 : 0;
                    p.p2_points_won = v == 2 ? 1 : 0;
                    (v == 1 ? p1_sum : p2_sum)++;
                    p.p1_points_sum = p1_sum;
                    p.p2_points_sum = p2_sum;
                    p.p1_points_diff = p1_sum - p2_sum;
                    p.p2_points_diff = -p.p1_points_diff;
                    p.p1_game_diff = p1_games - p2_games;
                    p.p2_game_diff = -p.p1_game_diff;
                    p.p1_set_diff = p1_sets - p2_sets;
                    p.p2_set_diff = -p.p1_set_diff;

                    // Break points (not tracked inside tiebreaks): the
                    // returner wins the game by taking the next point.
                    if (!tiebreak) {
                        const int rtn = 3 - server;
                        const int rp = rtn == 1 ? a : b;
                        const int sp = rtn == 1 ? b : a;
                        if (rp >= 3 && rp >= sp + 1) {
                            int won = v == rtn ? 1 : 0;
                            if (rtn == 1) {
                                p.p1_break_pt = 1;
                                p.p1_break_pt_won = won;
                                p.p1_break_pt_missed = 1 - won;
                            } else {
                                p.p2_break_pt = 1;
                                p.p2_break_pt_won = won;
                                p.p2_break_pt_missed = 1 - won;
                            }
                        }
                    }

                    if (cfg.point_signal) {
                        // Winner-consistent indicators: the point winner hit a
                        // winner, the loser committed an unforced error.
                        if (v == 1) {
                            p.p1_winner = 1;
                            p.p2_unf_err = 1;
                        } else {
                            p.p2_winner = 1;
                            p.p1_unf_err = 1;
                        }
                    } else {
                        if (unit(rng) < 0.3) (unit(rng) < 0.5 ? p.p1_winner : p.p2_winner) = 1;
                        if (unit(rng) < 0.3) (unit(rng) < 0.5 ? p.p1_unf_err : p.p2_unf_err) = 1;
                    }
                    if (server == v && unit(rng) < 0.15) (v == 1 ? p.p1_ace : p.p2_ace) = 1;
                    if (server != v && unit(rng) < 0.08)
                        (server == 1 ? p.p1_double_fault : p.p2_double_fault) = 1;
                    if (unit(rng) < 0.2) {
                        int netp = unit(rng) < 0.5 ? 1 : 2;
                        (netp == 1 ? p.p1_net_pt : p.p2_net_pt) = 1;
                        if (netp == v) (netp == 1 ? p.p1_net_pt_won : p.p2_net_pt_won) = 1;
                    }

                    double speed = std::min(std::max(speed_dist(rng), 70.0), 140.0);
                    bool missing = unit(rng) < cfg.missing_speed_fraction;
                    if (server == 1) {
                        p.p1_serve_speed = missing ? 0.0 : speed;
                        p.p1_speed_missing = missing;
                        p.p1_serve_depth = unit(rng) < 0.5 ? 1.0 : 0.0;
                        p.p2_return_depth = unit(rng) < 0.5 ? 1.0 : 0.0;
                    } else {
                        p.p2_serve_speed = missing ? 0.0 : speed;
                        p.p2_speed_missing = missing;
                        p.p2_serve_depth = unit(rng) < 0.5 ? 1.0 : 0.0;
                        p.p1_return_depth = unit(rng) < 0.5 ? 1.0 : 0.0;
                    }

                    if (cfg.constant_distance) {
                        p.p1_distance_run = 25.0;
                        p.p2_distance_run = 25.0;
                    } else {
                        p.p1_distance_run = dist_run(rng);
                        p.p2_distance_run = dist_run(rng);
                    }

                    (v == 1 ? a : b)++;
                    if (last_of_game) p.game_victor = game_winner;
                    out.push_back(std::move(p));
                }

                (game_winner == 1 ? p1_games : p2_games)++;
                if (tiebreak) {
                    set_winner = game_winner;
                } else if ((p1_games >= 6 || p2_games >= 6) && std::abs(p1_games - p2_games) >= 2) {
                    set_winner = p1_games > p2_games ? 1 : 2;
                }
                ++game_no;
                server = 3 - server;
                // Carryover chain: the next game's winner matches the winner
                // of this game's final point with the configured probability.
                int next = unit(rng) < cfg.carryover_prob ? game_winner : 3 - game_winner;
                game_winner = next;
            }
            out.back().set_victor = set_winner;
            (set_winner == 1 ? p1_sets : p2_sets)++;
            ++set_no;
        }
    }
    return out;
}

struct SyntheticCorpus {
    std::vector<PointRecord> records;  // imputed and normalized
    NormalizationStats stats;
};

inline SyntheticCorpus generate_synthetic_corpus(std::size_t count, std::uint64_t seed,
                                                 const PlantConfig& cfg = {}) {
    SyntheticCorpus c;
    c.records = generate_synthetic_records(count, seed, cfg);
    impute_serve_speed(c.records, seed);
    c.stats = normalize_records(c.records);
    return c;
}

inline std::vector<MatchSequence> generate_synthetic_matches(std::size_t count, std::uint64_t seed,
                                                             const PlantConfig& cfg = {}) {
    return build_match_sequences(generate_synthetic_corpus(count, seed, cfg).records);
}

}  // namespace hydranet
