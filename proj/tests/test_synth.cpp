#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "hydranet/synth.hpp"

using namespace hydranet;

TEST_CASE("synthetic matches obey scoring rules") {
    PlantConfig cfg;
    cfg.carryover_prob = 0.6;
    std::vector<MatchSequence> matches = generate_synthetic_matches(6, 31, cfg);
    REQUIRE(matches.size() == 6);
    for (const MatchSequence& m : matches) {
        m.validate();
        // every game has winner margin >= 2, or is the tiebreak game
        for (std::size_t gi = 0; gi < m.games.size(); ++gi) {
            const SpanBoundary& g = m.games[gi];
            int a = 0, b = 0;
            for (std::size_t t = g.begin; t < g.end; ++t) (m.y_point[t] == 1 ? a : b)++;
            int winner_pts = g.victor == 1 ? a : b;
            int loser_pts = g.victor == 1 ? b : a;
            CHECK(winner_pts - loser_pts >= 2);
            CHECK(winner_pts >= 4);  // tiebreaks need 7, ordinary games 4
        }
        // sets: 6 games with margin >= 2 or 7-6 via tiebreak
        for (const SpanBoundary& s : m.sets) {
            int g1 = 0, g2 = 0;
            for (const SpanBoundary& g : m.games) {
                if (g.begin >= s.begin && g.end <= s.end) (g.victor == 1 ? g1 : g2)++;
            }
            int w = s.victor == 1 ? g1 : g2;
            int l = s.victor == 1 ? g2 : g1;
            bool ordinary = w >= 6 && w - l >= 2;
            bool tiebreak = w == 7 && l == 6;
            CHECK((ordinary || tiebreak));
        }
        // best-of-three: winner takes two sets
        int s1 = 0, s2 = 0;
        for (const SpanBoundary& s : m.sets) (s.victor == 1 ? s1 : s2)++;
        CHECK(std::max(s1, s2) == 2);
        CHECK((m.y_match == 1 ? s1 : s2) == std::max(s1, s2));
    }
}

TEST_CASE("carryover probability one pins next-game winners") {
    PlantConfig cfg;
    cfg.carryover_prob = 1.0;
    std::vector<MatchSequence> matches = generate_synthetic_matches(4, 77, cfg);
    for (const MatchSequence& m : matches) {
        for (std::size_t g = 0; g + 1 < m.games.size(); ++g) {
            int last_point_winner = m.y_point[m.games[g].end - 1] == 1 ? 1 : 2;
            CHECK(m.games[g + 1].victor == last_point_winner);
        }
        // the game winner always takes the game's final point
        for (const SpanBoundary& g : m.games) {
            CHECK((m.y_point[g.end - 1] == 1 ? 1 : 2) == g.victor);
        }
    }
}

TEST_CASE("planted point signal sets winner-consistent indicators") {
    std::vector<MatchSequence> matches = generate_synthetic_matches(2, 5);
    for (const MatchSequence& m : matches) {
        for (std::size_t t = 0; t < m.point_count(); ++t) {
            // feature 11 is the winner indicator, feature 8 the unforced error
            if (m.y_point[t] == 1) {
                CHECK(m.p1_features[t][11] == 1.0);
                CHECK(m.p2_features[t][8] == 1.0);
            } else {
                CHECK(m.p2_features[t][11] == 1.0);
                CHECK(m.p1_features[t][8] == 1.0);
            }
        }
    }
}

TEST_CASE("same seed reproduces the corpus bit for bit") {
    SyntheticCorpus a = generate_synthetic_corpus(3, 123);
    SyntheticCorpus b = generate_synthetic_corpus(3, 123);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) CHECK(a.records[i] == b.records[i]);
    SyntheticCorpus c = generate_synthetic_corpus(3, 124);
    bool all_equal = a.records.size() == c.records.size();
    if (all_equal) {
        all_equal = false;
        for (std::size_t i = 0; i < a.records.size(); ++i) {
            if (!(a.records[i] == c.records[i])) {
                all_equal = false;
                break;
            }
            all_equal = true;
        }
    }
    CHECK_FALSE(all_equal);
}

TEST_CASE("best-of-five config plays to three sets") {
    PlantConfig cfg;
    cfg.best_of_five = true;
    std::vector<MatchSequence> matches = generate_synthetic_matches(3, 9, cfg);
    for (const MatchSequence& m : matches) {
        int s1 = 0, s2 = 0;
        for (const SpanBoundary& s : m.sets) (s.victor == 1 ? s1 : s2)++;
        CHECK(std::max(s1, s2) == 3);
    }
}

TEST_CASE("missing-speed fraction flows through imputation") {
    PlantConfig cfg;
    cfg.missing_speed_fraction = 0.3;
    SyntheticCorpus c = generate_synthetic_corpus(3, 21, cfg);
    for (const PointRecord& p : c.records) {
        CHECK_FALSE(p.p1_speed_missing);
        CHECK_FALSE(p.p2_speed_missing);
        CHECK(p.p1_serve_speed >= -1.0);
        CHECK(p.p1_serve_speed <= 1.0);
    }
}
