#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "hydranet/pipeline.hpp"
#include "hydranet/schema.hpp"
#include "hydranet/tensor.hpp"

using namespace hydranet;

namespace {

std::string fixture_path(const char* name) { return std::string("fixtures/") + name; }

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<RawRecord> make_raw_rows(const std::vector<std::map<std::string, std::string>>& rows) {
    std::vector<RawRecord> out;
    std::size_t line = 2;
    for (const auto& row : rows) {
        RawRecord r;
        r.line_number = line++;
        for (std::size_t c = 0; c < point_columns().size(); ++c) r.fields[c] = "0";
        r.fields[column_index("match_id")] = "m1";
        r.fields[column_index("player1")] = "A";
        r.fields[column_index("player2")] = "B";
        r.fields[column_index("elapsed_time")] = "0:00:10";
        r.fields[column_index("set_no")] = "1";
        r.fields[column_index("game_no")] = "1";
        r.fields[column_index("point_no")] = "1";
        r.fields[column_index("points_victor")] = "1";
        r.fields[column_index("p1_serve")] = "1";
        for (const auto& [k, v] : row) r.fields[column_index(k)] = v;
        out.push_back(r);
    }
    return out;
}

}  // namespace

TEST_CASE("parse_point_csv binds columns by name") {
    std::vector<RawRecord> recs = parse_point_csv(fixture_path("raw_points.csv"));
    CHECK(recs.size() == 20);
    CHECK(recs[0].get(column_index("match_id")) == "fix-001");
    CHECK(recs[0].get(column_index("p1_serve_speed")) == "100");

    // header missing a required column
    {
        std::ofstream out("missing_col.csv");
        const auto& cols = point_columns();
        for (std::size_t i = 0; i + 1 < cols.size(); ++i) out << cols[i] << (i + 2 < cols.size() ? "," : "");
        out << "\n";
    }
    CHECK_THROWS_AS(parse_point_csv("missing_col.csv"), schema_error);

    // empty file with header parses to an empty list
    {
        std::ofstream out("header_only.csv");
        const auto& cols = point_columns();
        for (std::size_t i = 0; i < cols.size(); ++i) out << cols[i] << (i + 1 < cols.size() ? "," : "");
        out << "\n";
    }
    CHECK(parse_point_csv("header_only.csv").empty());

    // wrong arity rows name the line number
    {
        std::ofstream out("bad_row.csv");
        const auto& cols = point_columns();
        for (std::size_t i = 0; i < cols.size(); ++i) out << cols[i] << (i + 1 < cols.size() ? "," : "");
        out << "\n1,2,3\n";
    }
    try {
        parse_point_csv("bad_row.csv");
        FAIL("expected a row error");
    } catch (const data_error& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("clean_points drop and transform rules") {
    auto rows = make_raw_rows({
        {{"p1_score", "0X"}},                                 // dropped
        {{"p2_score", "0Y"}},                                 // dropped
        {{"p1_serve", "0"}, {"p2_serve", "0"}},               // dropped: no server
        {{"p1_return_depth", ""}, {"p2_return_depth", "D"}},  // missing -> 0, D -> 1
        {{"p2_return_depth", "ND"}},                          // ND -> 0
        {{"p1_serve_depth", "CTL"}},                          // CTL -> 1
        {{"p1_serve_depth", "NCTL"}},                         // NCTL -> 0
        {{"p1_points_sum", "10"}, {"p2_points_sum", "7"}},    // diffs recomputed
        {{"points_victor", "2"}},                             // indicators recomputed
    });
    std::vector<PointRecord> cleaned = clean_points(rows);
    REQUIRE(cleaned.size() == 6);
    CHECK(cleaned[0].p1_return_depth == 0.0);
    CHECK(cleaned[0].p2_return_depth == 1.0);
    CHECK(cleaned[1].p2_return_depth == 0.0);
    CHECK(cleaned[2].p1_serve_depth == 1.0);
    CHECK(cleaned[3].p1_serve_depth == 0.0);
    CHECK(cleaned[4].p1_points_diff == 3);
    CHECK(cleaned[4].p2_points_diff == -3);
    CHECK(cleaned[4].p1_points_won == 1);
    CHECK(cleaned[5].p1_points_won == 0);
    CHECK(cleaned[5].p2_points_won == 1);

    auto bad = make_raw_rows({{{"p1_return_depth", "XX"}}});
    try {
        clean_points(bad);
        FAIL("expected a value error");
    } catch (const value_error& e) {
        std::string msg = e.what();
        CHECK(msg.find("XX") != std::string::npos);
        CHECK(msg.find("line 2") != std::string::npos);
    }
}

TEST_CASE("impute_serve_speed mixture behaviour") {
    // Player A serves every point of four games, two won two lost. Known
    // speeds {100, 120} plus the same global values put the mixture median
    // at 110: won-game draws land at 120, lost-game draws at 100.
    auto rows = make_raw_rows({
        {{"game_no", "1"}, {"p1_serve_speed", "100"}, {"points_victor", "1"}, {"game_victor", "1"}},
        {{"game_no", "2"}, {"p1_serve_speed", "120"}, {"points_victor", "2"}, {"game_victor", "2"}},
        {{"game_no", "3"}, {"p1_serve_speed", ""}, {"points_victor", "1"}, {"game_victor", "1"}},
        {{"game_no", "4"}, {"p1_serve_speed", ""}, {"points_victor", "2"}, {"game_victor", "2"}},
    });
    std::vector<PointRecord> recs = clean_points(rows);
    REQUIRE(recs.size() == 4);
    CHECK(recs[2].p1_speed_missing);
    impute_serve_speed(recs, 42);
    CHECK(recs[0].p1_serve_speed == 100.0);  // present values never change
    CHECK(recs[1].p1_serve_speed == 120.0);
    CHECK(recs[2].p1_serve_speed >= 110.0);  // won service game: above median
    CHECK(recs[3].p1_serve_speed < 110.0);   // lost service game: below median

    // determinism
    std::vector<PointRecord> again = clean_points(rows);
    impute_serve_speed(again, 42);
    CHECK(again[2].p1_serve_speed == recs[2].p1_serve_speed);
    CHECK(again[3].p1_serve_speed == recs[3].p1_serve_speed);

    // no missing speeds: records unchanged
    std::vector<PointRecord> none = clean_points(make_raw_rows({{{"p1_serve_speed", "101"}}}));
    std::vector<PointRecord> before = none;
    impute_serve_speed(none, 7);
    CHECK(none[0] == before[0]);

    // empty global distribution
    std::vector<PointRecord> empty = clean_points(make_raw_rows({{{"p1_serve_speed", ""}}}));
    CHECK_THROWS_AS(impute_serve_speed(empty, 7), data_error);
}

TEST_CASE("serve speed normalization endpoints") {
    CHECK(normalize_serve_speed(80.0, 80.0, 120.0) == -1.0);
    CHECK(normalize_serve_speed(120.0, 80.0, 120.0) == 1.0);
    CHECK(normalize_serve_speed(100.0, 80.0, 120.0) == 0.0);
    CHECK(normalize_serve_speed(60.0, 80.0, 120.0) == -1.0);  // clamped
    CHECK(normalize_serve_speed(140.0, 80.0, 120.0) == 1.0);  // clamped
    CHECK_THROWS_AS(normalize_serve_speed(1.0, 5.0, 5.0), config_error);
    CHECK_THROWS_AS(normalize_serve_speed(1.0, 9.0, 5.0), config_error);
}

TEST_CASE("z-score of running distance") {
    ZScoreResult flat = zscore_distance_run({5.0, 5.0, 5.0});
    CHECK(flat.zero_spread);
    CHECK(flat.values == std::vector<double>{0.0, 0.0, 0.0});

    ZScoreResult z = zscore_distance_run({1.0, 2.0, 3.0});
    CHECK_FALSE(z.zero_spread);
    CHECK(z.values[0] == Catch::Approx(-1.224745).epsilon(1e-6));
    CHECK(z.values[1] == Catch::Approx(0.0).margin(1e-12));
    CHECK(z.values[2] == Catch::Approx(1.224745).epsilon(1e-6));

    auto rng = make_rng(5);
    std::vector<double> vals(257);
    for (double& v : vals) v = rand_uniform({1}, rng, 3.0, 90.0).item();
    ZScoreResult r = zscore_distance_run(vals);
    double mean = 0.0;
    for (double v : r.values) mean += v;
    mean /= static_cast<double>(r.values.size());
    CHECK(std::abs(mean) < 1e-12);
}

TEST_CASE("feature extraction layout") {
    PointRecord zero;
    zero.match_id = "m";
    auto [f1z, f2z] = extract_momentum_features(zero);
    for (double v : f1z) CHECK(v == 0.0);
    for (double v : f2z) CHECK(v == 0.0);

    PointRecord p;
    p.p1_ace = 1;
    auto [f1, f2] = extract_momentum_features(p);
    for (std::size_t i = 0; i < kFeatureDim; ++i) {
        CHECK(f1[i] == (i == 3 ? 1.0 : 0.0));  // ace sits in the serve group
        CHECK(f2[i] == 0.0);
    }

    CHECK(kModalitySlices[0].second - kModalitySlices[0].first == 6);
    CHECK(kModalitySlices[1].second - kModalitySlices[1].first == 2);
    CHECK(kModalitySlices[2].second - kModalitySlices[2].first == 7);
    CHECK(kModalitySlices[3].second - kModalitySlices[3].first == 1);
}

TEST_CASE("split_dataset chunking and determinism") {
    std::vector<std::string> ids;
    for (int i = 0; i < 10; ++i) ids.push_back("m" + std::to_string(i));
    DatasetSplit s = split_dataset(ids, 0.2, 5, 99);
    CHECK(s.test_ids.size() == 2);
    CHECK(s.train_ids.size() == 8);
    std::vector<std::size_t> sizes;
    for (const auto& f : s.folds) sizes.push_back(f.size());
    CHECK(sizes == std::vector<std::size_t>{2, 2, 2, 1, 1});

    DatasetSplit s2 = split_dataset(ids, 0.2, 5, 99);
    CHECK(s2.train_ids == s.train_ids);
    CHECK(s2.test_ids == s.test_ids);
    CHECK(s2.folds == s.folds);

    // folds partition the train ids and test/train are disjoint
    std::set<std::string> seen;
    for (const auto& f : s.folds)
        for (const auto& id : f) CHECK(seen.insert(id).second);
    CHECK(seen == std::set<std::string>(s.train_ids.begin(), s.train_ids.end()));
    for (const auto& id : s.test_ids) CHECK_FALSE(seen.count(id));

    std::vector<std::string> few = {"a", "b", "c", "d", "e"};
    CHECK_THROWS_AS(split_dataset(few, 0.2, 5, 1), config_error);
}

TEST_CASE("cleaning fixture matches the expected file byte for byte") {
    std::vector<RawRecord> raw = parse_point_csv(fixture_path("raw_points.csv"));
    REQUIRE(raw.size() == 20);
    std::vector<PointRecord> cleaned = clean_points(raw);
    impute_serve_speed(cleaned, 7);
    NormalizationStats stats = normalize_records(cleaned);
    CHECK(stats.speed_min == 80.0);
    CHECK(stats.speed_max == 120.0);
    CHECK(stats.dist_mu == 20.0);
    CHECK(stats.dist_sigma == 10.0);

    std::ostringstream out;
    write_point_csv(out, cleaned);
    CHECK(out.str() == read_file(fixture_path("cleaned_expected.csv")));

    // ingest is byte-deterministic for a fixed seed
    std::vector<PointRecord> again = clean_points(parse_point_csv(fixture_path("raw_points.csv")));
    impute_serve_speed(again, 7);
    normalize_records(again);
    std::ostringstream out2;
    write_point_csv(out2, again);
    CHECK(out.str() == out2.str());
}

TEST_CASE("cleaned records round-trip through serialization") {
    std::vector<RawRecord> raw = parse_point_csv(fixture_path("raw_points.csv"));
    std::vector<PointRecord> cleaned = clean_points(raw);
    impute_serve_speed(cleaned, 7);
    normalize_records(cleaned);
    {
        std::ofstream out("roundtrip.csv");
        write_point_csv(out, cleaned);
    }
    std::vector<PointRecord> reloaded = load_cleaned_csv("roundtrip.csv");
    REQUIRE(reloaded.size() == cleaned.size());
    for (std::size_t i = 0; i < cleaned.size(); ++i) CHECK(reloaded[i] == cleaned[i]);
}

TEST_CASE("normalization metadata round-trips") {
    NormalizationStats s{80.5, 131.25, 20.125, 9.75};
    NormalizationStats r = NormalizationStats::parse(s.serialize());
    CHECK(r.speed_min == s.speed_min);
    CHECK(r.speed_max == s.speed_max);
    CHECK(r.dist_mu == s.dist_mu);
    CHECK(r.dist_sigma == s.dist_sigma);
    CHECK_THROWS_AS(NormalizationStats::parse("speed_min=1\n"), config_error);
}

TEST_CASE("match sequences from the fixture corpus") {
    std::vector<PointRecord> cleaned = clean_points(parse_point_csv(fixture_path("raw_points.csv")));
    impute_serve_speed(cleaned, 7);
    normalize_records(cleaned);
    std::vector<MatchSequence> seqs = build_match_sequences(cleaned);
    REQUIRE(seqs.size() == 1);
    const MatchSequence& m = seqs[0];
    CHECK(m.match_id == "fix-001");
    CHECK(m.point_count() == 17);
    REQUIRE(m.games.size() == 4);
    CHECK(m.games[0].victor == 1);
    CHECK(m.games[1].victor == 2);
    CHECK(m.games[2].victor == 1);
    for (std::size_t t = 0; t < m.point_count(); ++t) {
        CHECK(m.y_point[t] == (m.p1_features[t][11] == 1.0 ? 1 : 0));  // winner indicator slot
    }
}
