#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hydranet/model.hpp"

namespace hydranet {

// ---------------------------------------------------------------------------
// Granularity targets
// ---------------------------------------------------------------------------

enum class Granularity { point = 0, game = 1, set = 2, match = 3 };

inline const char* granularity_name(Granularity g) {
    switch (g) {
        case Granularity::point: return "point";
        case Granularity::game: return "game";
        case Granularity::set: return "set";
        case Granularity::match: return "match";
    }
    throw contract_error("unknown granularity");
}

struct GranularitySample {
    Granularity granularity;
    std::size_t t;  // source point index (0-based)
    int label;      // 1 when player 1 wins the target
    std::string match_id;
};

/// 1-based half-time index: ceil(N / 2).
inline std::size_t half_time_index(std::size_t n_points) { return (n_points + 1) / 2; }

/// Builds the prediction targets of a match. Point samples exist at every
/// point; a game sample sits on the last point of each game that has a
/// successor and is labeled with the next game's winner; set samples work the
/// same way on set boundaries; the single match sample sits at the half-time
/// point and is labeled with the match winner.
inline std::vector<GranularitySample> assemble_granularity_targets(const MatchSequence& match) {
    if (match.games.empty()) throw data_error("match " + match.match_id + " has no complete games");
    std::vector<GranularitySample> out;
    const std::size_t n = match.point_count();
    out.reserve(n + match.games.size() + match.sets.size() + 1);
    for (std::size_t t = 0; t < n; ++t) {
        out.push_back({Granularity::point, t, match.y_point[t], match.match_id});
    }
    for (std::size_t g = 0; g + 1 < match.games.size(); ++g) {
        out.push_back({Granularity::game, match.games[g].end - 1,
                       match.games[g + 1].victor == 1 ? 1 : 0, match.match_id});
    }
    for (std::size_t s = 0; s + 1 < match.sets.size(); ++s) {
        out.push_back({Granularity::set, match.sets[s].end - 1,
                       match.sets[s + 1].victor == 1 ? 1 : 0, match.match_id});
    }
    out.push_back({Granularity::match, half_time_index(n) - 1, match.y_match == 1 ? 1 : 0,
                   match.match_id});
    return out;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

/// Binary cross-entropy against the head outputs, clamped to
/// [1e-7, 1 - 1e-7]. preds is (N, 1); samples select rows by source index.
inline Tensor classification_loss(const Tensor& preds, const std::vector<std::size_t>& indices,
                                  const std::vector<int>& labels) {
    if (indices.size() != labels.size() || indices.empty()) {
        throw contract_error("classification loss needs matching non-empty indices and labels");
    }
    Tensor picked = clamp(gather_rows(preds, indices), 1e-7, 1.0 - 1e-7);
    std::vector<double> y(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) y[i] = static_cast<double>(labels[i]);
    Tensor yt = Tensor::from_data({labels.size(), 1}, std::move(y));
    Tensor ones = Tensor::full({labels.size(), 1}, 1.0);
    Tensor ll = add(mul(yt, log(picked)), mul(sub(ones, yt), log(sub(ones, picked))));
    return scale(sum_all(ll), -1.0 / static_cast<double>(labels.size()));
}

struct GranularityWeights {
    double point = 1.0;
    double game = 1.0;
    double set = 1.0;
    double match = 1.0;

    double get(Granularity g) const {
        switch (g) {
            case Granularity::point: return point;
            case Granularity::game: return game;
            case Granularity::set: return set;
            case Granularity::match: return match;
        }
        throw contract_error("unknown granularity");
    }
};

/// Total objective: versus loss plus the weighted sum of per-granularity
/// classification losses.
inline Tensor total_loss(const Tensor& l_ver, const std::vector<std::pair<Granularity, Tensor>>& l_cla,
                         const GranularityWeights& weights) {
    Tensor total = l_ver;
    for (const auto& [g, loss] : l_cla) {
        double w = weights.get(g);
        if (w != 0.0) total = add(total, scale(loss, w));
    }
    return total;
}

// ---------------------------------------------------------------------------
// Training configuration
// ---------------------------------------------------------------------------

struct TrainConfig {
    double lr = 0.001;
    int epochs = 5;
    double dropout = 0.1;
    double margin = 0.5;
    std::size_t heads = 4;
    std::size_t head_dim = 8;
    std::size_t embed_dim = 32;
    std::size_t caam_heads = 8;
    std::size_t head_hidden = 32;
    std::uint64_t seed = 1;
    GranularityWeights weights;
    double test_fraction = 0.2;
    std::size_t folds = 5;
    bool shared_modality_embeddings = false;

    ModelConfig model(std::optional<Modality> ablated = std::nullopt) const {
        ModelConfig m;
        m.heads = heads;
        m.head_dim = head_dim;
        m.embed_dim = embed_dim;
        m.caam_heads = caam_heads;
        m.head_hidden = head_hidden;
        m.margin = margin;
        m.dropout = dropout;
        m.shared_modality_embeddings = shared_modality_embeddings;
        m.ablated = ablated;
        return m;
    }

    void validate() const {
        model().validate();
        if (lr <= 0.0) throw config_error("lr must be positive");
        if (epochs < 0) throw config_error("epochs must be non-negative");
        if (test_fraction <= 0.0 || test_fraction >= 1.0) {
            throw config_error("test_fraction must be in (0, 1)");
        }
        if (folds == 0) throw config_error("folds must be positive");
    }

    std::string serialize() const {
        std::string s;
        auto kv = [&](const char* k, const std::string& v) { s += std::string(k) + "=" + v + "\n"; };
        kv("lr", format_double(lr));
        kv("epochs", std::to_string(epochs));
        kv("dropout", format_double(dropout));
        kv("margin", format_double(margin));
        kv("heads", std::to_string(heads));
        kv("head_dim", std::to_string(head_dim));
        kv("embed_dim", std::to_string(embed_dim));
        kv("caam_heads", std::to_string(caam_heads));
        kv("head_hidden", std::to_string(head_hidden));
        kv("seed", std::to_string(seed));
        kv("w_point", format_double(weights.point));
        kv("w_game", format_double(weights.game));
        kv("w_set", format_double(weights.set));
        kv("w_match", format_double(weights.match));
        kv("test_fraction", format_double(test_fraction));
        kv("folds", std::to_string(folds));
        kv("shared_modality_embeddings", shared_modality_embeddings ? "1" : "0");
        return s;
    }

    void apply(const std::string& key, const std::string& value) {
        if (key == "lr") lr = parse_double(value, key);
        else if (key == "epochs") epochs = static_cast<int>(parse_int(value, key));
        else if (key == "dropout") dropout = parse_double(value, key);
        else if (key == "margin") margin = parse_double(value, key);
        else if (key == "heads") heads = static_cast<std::size_t>(parse_int(value, key));
        else if (key == "head_dim") head_dim = static_cast<std::size_t>(parse_int(value, key));
        else if (key == "embed_dim") embed_dim = static_cast<std::size_t>(parse_int(value, key));
        else if (key == "caam_heads") caam_heads = static_cast<std::size_t>(parse_int(value, key));
        else if (key == "head_hidden") head_hidden = static_cast<std::size_t>(parse_int(value, key));
        else if (key == "seed") seed = static_cast<std::uint64_t>(parse_int(value, key));
        else if (key == "w_point") weights.point = parse_double(value, key);
        else if (key == "w_game") weights.game = parse_double(value, key);
        else if (key == "w_set") weights.set = parse_double(value, key);
        else if (key == "w_match") weights.match = parse_double(value, key);
        else if (key == "test_fraction") test_fraction = parse_double(value, key);
        else if (key == "folds") folds = static_cast<std::size_t>(parse_int(value, key));
        else if (key == "shared_modality_embeddings") shared_modality_embeddings = value == "1";
        else throw config_error("unknown config key '" + key + "'");
    }

    static TrainConfig parse(const std::string& text) {
        TrainConfig cfg;
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            auto eq = line.find('=');
            if (eq == std::string::npos) throw config_error("bad config line '" + line + "'");
            cfg.apply(line.substr(0, eq), line.substr(eq + 1));
        }
        cfg.validate();
        return cfg;
    }

    static TrainConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw io_error("cannot open config file '" + path + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }
};

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct LossLogRow {
    int epoch = 0;
    int batch = 0;
    double l_ver = 0.0;
    double l_point = 0.0;
    double l_game = 0.0;
    double l_set = 0.0;
    double l_match = 0.0;
    double total = 0.0;
};

inline void write_loss_log(std::ostream& os, const std::vector<LossLogRow>& rows,
                           const std::string& started_stamp) {
    os << "# run_started " << started_stamp << "\n";
    os << "epoch,batch,l_ver,l_point,l_game,l_set,l_match,total\n";
    for (const LossLogRow& r : rows) {
        os << r.epoch << ',' << r.batch << ',' << format_double(r.l_ver) << ','
           << format_double(r.l_point) << ',' << format_double(r.l_game) << ','
           << format_double(r.l_set) << ',' << format_double(r.l_match) << ','
           << format_double(r.total) << "\n";
    }
}

struct MatchLosses {
    Tensor total;
    LossLogRow components;
};

/// Losses for one match forward pass: versus over all points plus the four
/// granularity classification losses.
inline MatchLosses match_losses(const HydraNetModel::MatchForward& fwd, const MatchSequence& match,
                                const GranularityWeights& weights, double margin) {
    MatchLosses out;
    Tensor l_ver = versus_loss(fwd.y1, fwd.y2, margin);
    out.components.l_ver = l_ver.item();

    std::vector<GranularitySample> samples = assemble_granularity_targets(match);
    std::map<Granularity, std::pair<std::vector<std::size_t>, std::vector<int>>> buckets;
    for (const GranularitySample& s : samples) {
        buckets[s.granularity].first.push_back(s.t);
        buckets[s.granularity].second.push_back(s.label);
    }
    std::vector<std::pair<Granularity, Tensor>> l_cla;
    for (auto& [g, bucket] : buckets) {
        Tensor l = classification_loss(fwd.scores, bucket.first, bucket.second);
        double v = l.item();
        switch (g) {
            case Granularity::point: out.components.l_point = v; break;
            case Granularity::game: out.components.l_game = v; break;
            case Granularity::set: out.components.l_set = v; break;
            case Granularity::match: out.components.l_match = v; break;
        }
        l_cla.emplace_back(g, l);
    }
    out.total = total_loss(l_ver, l_cla, weights);
    out.components.total = out.total.item();
    return out;
}

struct TrainResult {
    HydraNetModel model;
    std::vector<LossLogRow> log;
};

/// Trains one model on the given matches: per epoch the matches are visited
/// in seeded shuffled order; each match runs a full forward, a backward pass
/// through the whole match graph (the carried momentum links its games), and
/// one optimizer step. Deterministic for a fixed config.
inline TrainResult train(const std::vector<MatchSequence>& matches, const TrainConfig& cfg,
                         std::optional<Modality> ablated = std::nullopt) {
    cfg.validate();
    if (matches.empty()) throw config_error("training needs a non-empty match list");
    TrainResult result{HydraNetModel::init(cfg.model(ablated), cfg.seed), {}};
    AdamState adam;
    adam.lr = cfg.lr;
    adam.init(result.model.params);
    auto shuffle_rng = make_rng(cfg.seed, /*stream=*/5);
    auto dropout_rng = make_rng(cfg.seed, /*stream=*/6);

    std::vector<std::size_t> order(matches.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        int batch = 0;
        for (std::size_t idx : order) {
            const MatchSequence& match = matches[idx];
            Tape tape;
            HydraNetModel::MatchForward fwd =
                result.model.forward_match(match, /*training=*/true, &dropout_rng);
            MatchLosses losses = match_losses(fwd, match, cfg.weights, cfg.margin);
            tape.backward(losses.total);
            adam_step(result.model.params, adam);
            losses.components.epoch = epoch;
            losses.components.batch = ++batch;
            result.log.push_back(losses.components);
        }
    }
    return result;
}

}  // namespace hydranet
