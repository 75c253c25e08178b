#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "hydranet/common.hpp"
#include "hydranet/csv.hpp"

namespace hydranet {

/// The 54-column point schema, in canonical order.
inline const std::array<std::string, 54>& point_columns() {
    static const std::array<std::string, 54> cols = {
        "match_id",          "player1",           "player2",
        "elapsed_time",      "set_no",            "game_no",
        "point_no",          "p1_sets_won",       "p2_sets_won",
        "p1_games_won",      "p2_games_won",      "p1_score",
        "p2_score",          "p1_serve",          "p2_serve",
        "points_victor",     "p1_points_won",     "p2_points_won",
        "p1_points_sum",     "p2_points_sum",     "game_victor",
        "set_victor",        "p1_ace",            "p2_ace",
        "p1_winner",         "p2_winner",         "p1_double_fault",
        "p2_double_fault",   "p1_unf_err",        "p2_unf_err",
        "p1_net_pt",         "p2_net_pt",         "p1_net_pt_won",
        "p2_net_pt_won",     "p1_break_pt",       "p2_break_pt",
        "p1_break_pt_won",   "p2_break_pt_won",   "p1_break_pt_missed",
        "p2_break_pt_missed","p1_distance_run",   "p2_distance_run",
        "p1_points_diff",    "p1_game_diff",      "p1_set_diff",
        "p2_points_diff",    "p2_game_diff",      "p2_set_diff",
        "p1_serve_speed",    "p2_serve_speed",    "p1_serve_depth",
        "p2_serve_depth",    "p1_return_depth",   "p2_return_depth"};
    return cols;
}

/// One raw data row with fields bound by column name (order-insensitive).
struct RawRecord {
    std::array<std::string, 54> fields;
    std::size_t line_number = 0;

    const std::string& get(std::size_t col) const { return fields[col]; }
};

inline std::size_t column_index(const std::string& name) {
    const auto& cols = point_columns();
    for (std::size_t i = 0; i < cols.size(); ++i)
        if (cols[i] == name) return i;
    throw contract_error("unknown column '" + name + "'");
}

/// Parses a point CSV. The header must name all 54 columns (any order);
/// extra columns are rejected. Rows with the wrong field count raise a row
/// error carrying the source line number.
inline std::vector<RawRecord> parse_point_csv(const std::string& path) {
    csv::Table t = csv::read_file(path);
    const auto& cols = point_columns();
    std::vector<std::size_t> slot(t.header.size());
    std::vector<bool> seen(cols.size(), false);
    for (std::size_t h = 0; h < t.header.size(); ++h) {
        bool found = false;
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (t.header[h] == cols[c]) {
                if (seen[c]) throw schema_error("duplicate column '" + cols[c] + "' in " + path);
                seen[c] = true;
                slot[h] = c;
                found = true;
                break;
            }
        }
        if (!found) throw schema_error("unexpected column '" + t.header[h] + "' in " + path);
    }
    for (std::size_t c = 0; c < cols.size(); ++c) {
        if (!seen[c]) throw schema_error("missing required column '" + cols[c] + "' in " + path);
    }
    std::vector<RawRecord> out;
    out.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (t.rows[r].size() != t.header.size()) {
            throw data_error("row at line " + std::to_string(t.line_numbers[r]) + " has " +
                             std::to_string(t.rows[r].size()) + " fields, expected " +
                             std::to_string(t.header.size()));
        }
        RawRecord rec;
        rec.line_number = t.line_numbers[r];
        for (std::size_t h = 0; h < t.rows[r].size(); ++h) rec.fields[slot[h]] = t.rows[r][h];
        out.push_back(std::move(rec));
    }
    return out;
}

/// A cleaned, typed point. Serve speeds are mph until normalization maps them
/// into [-1, 1]; depth and return-depth fields are 0/1 after cleaning.
struct PointRecord {
    std::string match_id;
    std::string player1;
    std::string player2;
    std::string elapsed_time;
    int set_no = 0;
    int game_no = 0;
    int point_no = 0;
    int p1_sets_won = 0;
    int p2_sets_won = 0;
    int p1_games_won = 0;
    int p2_games_won = 0;
    std::string p1_score;
    std::string p2_score;
    int p1_serve = 0;
    int p2_serve = 0;
    int points_victor = 0;
    int p1_points_won = 0;
    int p2_points_won = 0;
    long long p1_points_sum = 0;
    long long p2_points_sum = 0;
    int game_victor = 0;  // 0 when the game is still running
    int set_victor = 0;
    int p1_ace = 0;
    int p2_ace = 0;
    int p1_winner = 0;
    int p2_winner = 0;
    int p1_double_fault = 0;
    int p2_double_fault = 0;
    int p1_unf_err = 0;
    int p2_unf_err = 0;
    int p1_net_pt = 0;
    int p2_net_pt = 0;
    int p1_net_pt_won = 0;
    int p2_net_pt_won = 0;
    int p1_break_pt = 0;
    int p2_break_pt = 0;
    int p1_break_pt_won = 0;
    int p2_break_pt_won = 0;
    int p1_break_pt_missed = 0;
    int p2_break_pt_missed = 0;
    double p1_distance_run = 0.0;
    double p2_distance_run = 0.0;
    long long p1_points_diff = 0;
    long long p1_game_diff = 0;
    long long p1_set_diff = 0;
    long long p2_points_diff = 0;
    long long p2_game_diff = 0;
    long long p2_set_diff = 0;
    double p1_serve_speed = 0.0;
    double p2_serve_speed = 0.0;
    double p1_serve_depth = 0.0;
    double p2_serve_depth = 0.0;
    double p1_return_depth = 0.0;
    double p2_return_depth = 0.0;

    // Internal bookkeeping for imputation; never serialized.
    bool p1_speed_missing = false;
    bool p2_speed_missing = false;

    bool operator==(const PointRecord& o) const {
        return serialize() == o.serialize();
    }

    std::vector<std::string> serialize() const {
        auto i = [](long long v) { return std::to_string(v); };
        auto d = [](double v) { return format_double(v); };
        return {match_id,
                player1,
                player2,
                elapsed_time,
                i(set_no),
                i(game_no),
                i(point_no),
                i(p1_sets_won),
                i(p2_sets_won),
                i(p1_games_won),
                i(p2_games_won),
                p1_score,
                p2_score,
                i(p1_serve),
                i(p2_serve),
                i(points_victor),
                i(p1_points_won),
                i(p2_points_won),
                i(p1_points_sum),
                i(p2_points_sum),
                i(game_victor),
                i(set_victor),
                i(p1_ace),
                i(p2_ace),
                i(p1_winner),
                i(p2_winner),
                i(p1_double_fault),
                i(p2_double_fault),
                i(p1_unf_err),
                i(p2_unf_err),
                i(p1_net_pt),
                i(p2_net_pt),
                i(p1_net_pt_won),
                i(p2_net_pt_won),
                i(p1_break_pt),
                i(p2_break_pt),
                i(p1_break_pt_won),
                i(p2_break_pt_won),
                i(p1_break_pt_missed),
                i(p2_break_pt_missed),
                d(p1_distance_run),
                d(p2_distance_run),
                i(p1_points_diff),
                i(p1_game_diff),
                i(p1_set_diff),
                i(p2_points_diff),
                i(p2_game_diff),
                i(p2_set_diff),
                d(p1_serve_speed),
                d(p2_serve_speed),
                d(p1_serve_depth),
                d(p2_serve_depth),
                d(p1_return_depth),
                d(p2_return_depth)};
    }
};

inline void write_point_csv(std::ostream& os, const std::vector<PointRecord>& records) {
    std::vector<std::string> header(point_columns().begin(), point_columns().end());
    csv::write_row(os, header);
    for (const PointRecord& r : records) csv::write_row(os, r.serialize());
}

namespace detail {

inline int to_indicator(const std::string& s, const std::string& col, std::size_t line) {
    long long v = parse_int(s, col + " at line " + std::to_string(line));
    if (v != 0 && v != 1) {
        throw value_error("field " + col + " at line " + std::to_string(line) +
                          " must be 0 or 1, got " + s);
    }
    return static_cast<int>(v);
}

}  // namespace detail

/// Loads an already-cleaned CSV (the format written by write_point_csv) into
/// typed records, validating the invariants a cleaned point must satisfy.
inline std::vector<PointRecord> load_cleaned_csv(const std::string& path) {
    std::vector<RawRecord> raw = parse_point_csv(path);
    std::vector<PointRecord> out;
    out.reserve(raw.size());
    auto col = [](const char* n) { return column_index(n); };
    for (const RawRecord& r : raw) {
        PointRecord p;
        const std::size_t ln = r.line_number;
        auto fi = [&](const char* n) {
            return static_cast<int>(parse_int(r.get(col(n)), std::string(n) + " at line " + std::to_string(ln)));
        };
        auto fl = [&](const char* n) {
            return parse_int(r.get(col(n)), std::string(n) + " at line " + std::to_string(ln));
        };
        auto fd = [&](const char* n) {
            return parse_double(r.get(col(n)), std::string(n) + " at line " + std::to_string(ln));
        };
        auto ind = [&](const char* n) { return detail::to_indicator(r.get(col(n)), n, ln); };
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
        p.p1_score = r.get(col("p1_score"));
        p.p2_score = r.get(col("p2_score"));
        p.p1_serve = ind("p1_serve");
        p.p2_serve = ind("p2_serve");
        p.points_victor = fi("points_victor");
        p.p1_points_won = ind("p1_points_won");
        p.p2_points_won = ind("p2_points_won");
        p.p1_points_sum = fl("p1_points_sum");
        p.p2_points_sum = fl("p2_points_sum");
        p.game_victor = fi("game_victor");
        p.set_victor = fi("set_victor");
        p.p1_ace = ind("p1_ace");
        p.p2_ace = ind("p2_ace");
        p.p1_winner = ind("p1_winner");
        p.p2_winner = ind("p2_winner");
        p.p1_double_fault = ind("p1_double_fault");
        p.p2_double_fault = ind("p2_double_fault");
        p.p1_unf_err = ind("p1_unf_err");
        p.p2_unf_err = ind("p2_unf_err");
        p.p1_net_pt = ind("p1_net_pt");
        p.p2_net_pt = ind("p2_net_pt");
        p.p1_net_pt_won = ind("p1_net_pt_won");
        p.p2_net_pt_won = ind("p2_net_pt_won");
        p.p1_break_pt = ind("p1_break_pt");
        p.p2_break_pt = ind("p2_break_pt");
        p.p1_break_pt_won = ind("p1_break_pt_won");
        p.p2_break_pt_won = ind("p2_break_pt_won");
        p.p1_break_pt_missed = ind("p1_break_pt_missed");
        p.p2_break_pt_missed = ind("p2_break_pt_missed");
        p.p1_distance_run = fd("p1_distance_run");
        p.p2_distance_run = fd("p2_distance_run");
        p.p1_points_diff = fl("p1_points_diff");
        p.p1_game_diff = fl("p1_game_diff");
        p.p1_set_diff = fl("p1_set_diff");
        p.p2_points_diff = fl("p2_points_diff");
        p.p2_game_diff = fl("p2_game_diff");
        p.p2_set_diff = fl("p2_set_diff");
        p.p1_serve_speed = fd("p1_serve_speed");
        p.p2_serve_speed = fd("p2_serve_speed");
        p.p1_serve_depth = fd("p1_serve_depth");
        p.p2_serve_depth = fd("p2_serve_depth");
        p.p1_return_depth = fd("p1_return_depth");
        p.p2_return_depth = fd("p2_return_depth");
        if (p.set_no <= 0 || p.game_no <= 0 || p.point_no <= 0) {
            throw data_error("non-positive set/game/point number at line " + std::to_string(ln));
        }
        if (p.points_victor != 1 && p.points_victor != 2) {
            throw data_error("points_victor must be 1 or 2 at line " + std::to_string(ln));
        }
        if (p.p1_points_diff != p.p1_points_sum - p.p2_points_sum ||
            p.p2_points_diff != -p.p1_points_diff) {
            throw data_error("inconsistent points diff at line " + std::to_string(ln));
        }
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace hydranet
