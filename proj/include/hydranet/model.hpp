#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hydranet/hydra.hpp"
#include "hydranet/interaction.hpp"
#include "hydranet/pipeline.hpp"

namespace hydranet {

struct ModelConfig {
    std::size_t d = kFeatureDim;
    std::size_t heads = 4;
    std::size_t head_dim = 8;
    std::size_t embed_dim = 32;
    std::size_t caam_heads = 8;
    std::size_t head_hidden = 32;
    double margin = 0.5;
    double dropout = 0.1;
    bool shared_modality_embeddings = false;
    std::optional<Modality> ablated;  // feature group zeroed at input and in the attention groups

    HydraConfig hydra() const { return HydraConfig{d, heads, head_dim}; }

    void validate() const {
        hydra().validate();
        if (embed_dim == 0 || caam_heads == 0 || embed_dim % caam_heads != 0) {
            throw config_error("embed_dim must be a positive multiple of caam_heads");
        }
        if (head_hidden == 0) throw config_error("head_hidden must be positive");
        if (margin < 0.0) throw config_error("margin must be non-negative");
        if (dropout < 0.0 || dropout >= 1.0) throw config_error("dropout must be in [0, 1)");
    }
};

/// Prediction head: the two fused player vectors are concatenated and passed
/// through a SiLU hidden layer to a sigmoid momentum score for player 1.
struct HeadParams {
    Tensor w1, b1;  // (2d, hidden), (hidden)
    Tensor w2, b2;  // (hidden, 1), (1)

    static HeadParams init(std::size_t d, std::size_t hidden, std::mt19937_64& rng) {
        HeadParams p;
        p.w1 = randn({2 * d, hidden}, rng, 1.0 / std::sqrt(2.0 * double(d)), true);
        p.b1 = Tensor::zeros({hidden}, true);
        p.w2 = randn({hidden, 1}, rng, 1.0 / std::sqrt(double(hidden)), true);
        p.b2 = Tensor::zeros({1}, true);
        return p;
    }

    void register_into(ParameterMap& params, const std::string& prefix) const {
        params.add(prefix + ".w1", w1);
        params.add(prefix + ".b1", b1);
        params.add(prefix + ".w2", w2);
        params.add(prefix + ".b2", b2);
    }
};

inline Tensor predict_momentum_score(const Tensor& z1, const Tensor& z2, const HeadParams& head) {
    Tensor cat = concat_cols({z1, z2});
    Tensor hidden = silu(add_rowvec(matmul(cat, head.w1), head.b1));
    return sigmoid(add_rowvec(matmul(hidden, head.w2), head.b2));
}

/// The assembled model: one momentum tower per player role (separate weights,
/// mirroring the per-player carry matrices), modality embeddings, the shared
/// cross-player attention, and the score head.
struct HydraNetModel {
    ModelConfig cfg;
    HydraParams hydra_p1, hydra_p2;
    PlayerEmbedParams embed_p1, embed_p2;
    CaamParams caam;
    HeadParams head;
    ParameterMap params;

    static HydraNetModel init(const ModelConfig& cfg, std::uint64_t seed) {
        cfg.validate();
        HydraNetModel m;
        m.cfg = cfg;
        auto rng = make_rng(seed, /*stream=*/1);
        HydraConfig hc = cfg.hydra();
        m.hydra_p1 = HydraParams::init(hc, rng);
        m.hydra_p2 = HydraParams::init(hc, rng);
        m.embed_p1 = PlayerEmbedParams::init(cfg.embed_dim, rng);
        m.embed_p2 = cfg.shared_modality_embeddings ? m.embed_p1
                                                    : PlayerEmbedParams::init(cfg.embed_dim, rng);
        m.caam = CaamParams::init(cfg.embed_dim, cfg.d, cfg.caam_heads, rng);
        m.head = HeadParams::init(cfg.d, cfg.head_hidden, rng);
        m.hydra_p1.register_into(m.params, "p1");
        m.hydra_p2.register_into(m.params, "p2");
        m.embed_p1.register_into(m.params, "emb1");
        m.embed_p2.register_into(m.params, "emb2");
        m.caam.register_into(m.params, "caam");
        m.head.register_into(m.params, "head");
        return m;
    }

    /// Per-game feature rows as a constant tensor, with the ablated modality
    /// slice zeroed at the input.
    Tensor game_points(const MatchSequence& match, const std::vector<PlayerFeatureVector>& feats,
                       const SpanBoundary& game) const {
        const std::size_t l = game.end - game.begin;
        std::vector<double> data(l * cfg.d, 0.0);
        for (std::size_t i = 0; i < l; ++i) {
            const PlayerFeatureVector& f = feats[game.begin + i];
            for (std::size_t j = 0; j < cfg.d; ++j) data[i * cfg.d + j] = f[j];
            if (cfg.ablated) {
                auto [lo, hi] = kModalitySlices[static_cast<std::size_t>(*cfg.ablated)];
                for (std::size_t j = lo; j < hi; ++j) data[i * cfg.d + j] = 0.0;
            }
        }
        (void)match;
        return Tensor::from_data({l, cfg.d}, std::move(data));
    }

    struct MatchForward {
        Tensor scores;  // (N, 1): per-point momentum score for player 1
        Tensor y1, y2;  // (N, d): per-point tower outputs, feed the versus loss
    };

    MatchForward forward_match(const MatchSequence& match, bool training,
                               std::mt19937_64* dropout_rng = nullptr) const {
        if (match.games.empty()) throw data_error("match " + match.match_id + " has no games");
        const HydraConfig hc = cfg.hydra();
        const double drop = training ? cfg.dropout : 0.0;

        auto [mi1, mi2] = init_implicit_momentum(cfg.d);
        std::vector<Tensor> y1_parts, y2_parts;
        y1_parts.reserve(match.games.size());
        y2_parts.reserve(match.games.size());
        for (std::size_t gi = 0; gi < match.games.size(); ++gi) {
            const SpanBoundary& game = match.games[gi];
            Tensor pts1 = game_points(match, match.p1_features, game);
            Tensor pts2 = game_points(match, match.p2_features, game);
            GameForward g1 = forward_game(pts1, mi1.value, hydra_p1, hc, drop, dropout_rng);
            GameForward g2 = forward_game(pts2, mi2.value, hydra_p2, hc, drop, dropout_rng);
            y1_parts.push_back(g1.points);
            y2_parts.push_back(g2.points);
            if (gi + 1 < match.games.size()) {
                bool new_set = false;
                for (const SpanBoundary& s : match.sets) new_set = new_set || s.begin == game.end;
                Transition tr = new_set ? Transition::cross_set : Transition::cross_game;
                mi1 = {update_implicit_momentum(g1.last, tr, hydra_p1),
                       new_set ? Provenance::cross_set : Provenance::cross_game};
                mi2 = {update_implicit_momentum(g2.last, tr, hydra_p2),
                       new_set ? Provenance::cross_set : Provenance::cross_game};
            }
        }
        MatchForward out;
        out.y1 = concat_rows(y1_parts);
        out.y2 = concat_rows(y2_parts);

        // Per-point fusion: modality groups -> embeddings -> cross-player
        // attention -> score head. Embeddings run batched over all points.
        std::array<Tensor, 4> groups1 = split_modality_groups(out.y1);
        std::array<Tensor, 4> groups2 = split_modality_groups(out.y2);
        if (cfg.ablated) {
            const std::size_t m = static_cast<std::size_t>(*cfg.ablated);
            const std::size_t w = kModalitySlices[m].second - kModalitySlices[m].first;
            groups1[m] = Tensor::zeros({out.y1.extent(0), w});
            groups2[m] = Tensor::zeros({out.y2.extent(0), w});
        }
        std::array<Tensor, 4> emb1 = embed_modalities(groups1, embed_p1, drop, dropout_rng);
        std::array<Tensor, 4> emb2 = embed_modalities(groups2, embed_p2, drop, dropout_rng);

        const std::size_t n = out.y1.extent(0);
        std::vector<Tensor> z1_rows, z2_rows;
        z1_rows.reserve(n);
        z2_rows.reserve(n);
        for (std::size_t t = 0; t < n; ++t) {
            std::vector<Tensor> f1_rows, f2_rows;
            f1_rows.reserve(4);
            f2_rows.reserve(4);
            for (std::size_t m = 0; m < 4; ++m) {
                f1_rows.push_back(slice_rows(emb1[m], t, t + 1));
                f2_rows.push_back(slice_rows(emb2[m], t, t + 1));
            }
            auto [zt1, zt2] = caam_attention(concat_rows(f1_rows), concat_rows(f2_rows), caam);
            z1_rows.push_back(zt1);
            z2_rows.push_back(zt2);
        }
        out.scores = predict_momentum_score(concat_rows(z1_rows), concat_rows(z2_rows), head);
        return out;
    }
};

}  // namespace hydranet
