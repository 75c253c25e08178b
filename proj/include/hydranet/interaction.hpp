#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "hydranet/adam.hpp"
#include "hydranet/pipeline.hpp"
#include "hydranet/tensor.hpp"

namespace hydranet {

// ---------------------------------------------------------------------------
// Versus loss
// ---------------------------------------------------------------------------

/// Hinge on the cosine similarity of the two players' momentum rows:
/// mean over rows of max(0, margin + cos(y1, y2)) with L2-normalized inputs.
/// Row norms are floored at 1e-12, so zero rows are safe.
inline Tensor versus_loss(const Tensor& y1, const Tensor& y2, double margin) {
    if (y1.shape() != y2.shape() || y1.rank() != 2) {
        throw shape_error("versus loss expects two equally shaped row batches");
    }
    const double huge = std::numeric_limits<double>::max();
    Tensor n1 = clamp(sqrt(sum_axis(square(y1), 1)), 1e-12, huge);
    Tensor n2 = clamp(sqrt(sum_axis(square(y2), 1)), 1e-12, huge);
    Tensor y1n = mul_colvec(y1, reciprocal(n1));
    Tensor y2n = mul_colvec(y2, reciprocal(n2));
    Tensor cos = sum_axis(mul(y1n, y2n), 1);
    Tensor hinge = relu(add_scalar(cos, margin));
    return scale(sum_all(hinge), 1.0 / static_cast<double>(y1.extent(0)));
}

// ---------------------------------------------------------------------------
// Modality groups
// ---------------------------------------------------------------------------

enum class Modality { serve = 0, return_ = 1, psychology = 2, fatigue = 3 };

inline const char* modality_name(Modality m) {
    switch (m) {
        case Modality::serve: return "serve";
        case Modality::return_: return "return";
        case Modality::psychology: return "psychology";
        case Modality::fatigue: return "fatigue";
    }
    throw contract_error("unknown modality");
}

inline Modality parse_modality(const std::string& s) {
    if (s == "serve") return Modality::serve;
    if (s == "return") return Modality::return_;
    if (s == "psychology") return Modality::psychology;
    if (s == "fatigue") return Modality::fatigue;
    throw value_error("unknown modality '" + s + "' (expected serve/return/psychology/fatigue)");
}

/// Splits (L, 16) momentum rows at the fixed offsets 0|6|8|15|16.
inline std::array<Tensor, 4> split_modality_groups(const Tensor& y) {
    if (y.rank() != 2 || y.extent(1) != kFeatureDim) {
        throw shape_error("modality split expects width " + std::to_string(kFeatureDim) + ", got " +
                          shape_str(y.shape()));
    }
    std::array<Tensor, 4> out;
    for (std::size_t m = 0; m < 4; ++m) {
        out[m] = slice_cols(y, kModalitySlices[m].first, kModalitySlices[m].second);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Modality embeddings
// ---------------------------------------------------------------------------

struct ModalityEmbedParams {
    Tensor w1, b1;  // (width, embed_dim), (embed_dim)
    Tensor w2, b2;  // (embed_dim, embed_dim), (embed_dim)
};

struct PlayerEmbedParams {
    std::array<ModalityEmbedParams, 4> modalities;

    static PlayerEmbedParams init(std::size_t embed_dim, std::mt19937_64& rng) {
        PlayerEmbedParams p;
        for (std::size_t m = 0; m < 4; ++m) {
            const std::size_t width = kModalitySlices[m].second - kModalitySlices[m].first;
            p.modalities[m].w1 = randn({width, embed_dim}, rng, 1.0 / std::sqrt(double(width)), true);
            p.modalities[m].b1 = Tensor::zeros({embed_dim}, true);
            p.modalities[m].w2 =
                randn({embed_dim, embed_dim}, rng, 1.0 / std::sqrt(double(embed_dim)), true);
            p.modalities[m].b2 = Tensor::zeros({embed_dim}, true);
        }
        return p;
    }

    void register_into(ParameterMap& params, const std::string& prefix) const {
        for (std::size_t m = 0; m < 4; ++m) {
            std::string base = prefix + "." + modality_name(static_cast<Modality>(m));
            params.add(base + ".w1", modalities[m].w1);
            params.add(base + ".b1", modalities[m].b1);
            params.add(base + ".w2", modalities[m].w2);
            params.add(base + ".b2", modalities[m].b2);
        }
    }
};

/// Two-layer perceptron per modality (width -> embed_dim -> embed_dim, SiLU
/// after the first layer, dropout between the layers when training).
inline std::array<Tensor, 4> embed_modalities(const std::array<Tensor, 4>& groups,
                                              const PlayerEmbedParams& params, double dropout_p = 0.0,
                                              std::mt19937_64* rng = nullptr) {
    std::array<Tensor, 4> out;
    for (std::size_t m = 0; m < 4; ++m) {
        const ModalityEmbedParams& mp = params.modalities[m];
        Tensor h = silu(add_rowvec(matmul(groups[m], mp.w1), mp.b1));
        if (dropout_p > 0.0) {
            if (!rng) throw contract_error("dropout requires a random source");
            h = dropout(h, dropout_p, *rng);
        }
        out[m] = add_rowvec(matmul(h, mp.w2), mp.b2);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Collaborative-adversarial attention
// ---------------------------------------------------------------------------

struct CaamParams {
    std::size_t heads = 8;
    Tensor wq, wk, wv;  // (embed_dim, embed_dim), shared by both players
    Tensor w_out;       // (embed_dim, d)
    Tensor b_out;       // (d)

    static CaamParams init(std::size_t embed_dim, std::size_t d, std::size_t heads,
                           std::mt19937_64& rng) {
        if (heads == 0 || embed_dim % heads != 0) {
            throw config_error("embed dim " + std::to_string(embed_dim) +
                               " must be divisible by the head count " + std::to_string(heads));
        }
        CaamParams p;
        p.heads = heads;
        const double std = 1.0 / std::sqrt(static_cast<double>(embed_dim));
        p.wq = randn({embed_dim, embed_dim}, rng, std, true);
        p.wk = randn({embed_dim, embed_dim}, rng, std, true);
        p.wv = randn({embed_dim, embed_dim}, rng, std, true);
        p.w_out = randn({embed_dim, d}, rng, std, true);
        p.b_out = Tensor::zeros({d}, true);
        return p;
    }

    void register_into(ParameterMap& params, const std::string& prefix) const {
        params.add(prefix + ".wq", wq);
        params.add(prefix + ".wk", wk);
        params.add(prefix + ".wv", wv);
        params.add(prefix + ".w_out", w_out);
        params.add(prefix + ".b_out", b_out);
    }
};

/// One point's attention: each player's four modality embeddings query the
/// union of both players' eight embeddings (keys and values alike), with
/// multi-head scaled dot-product attention. The four query outputs are
/// summed and mapped to the feature width.
inline std::pair<Tensor, Tensor> caam_attention(const Tensor& f1, const Tensor& f2,
                                                const CaamParams& cp) {
    if (f1.rank() != 2 || f1.shape() != f2.shape() || f1.extent(0) != 4) {
        throw shape_error("caam expects two (4, embed_dim) stacks, got " + shape_str(f1.shape()) +
                          " and " + shape_str(f2.shape()));
    }
    const std::size_t de = f1.extent(1);
    const std::size_t hd = de / cp.heads;
    const double scl = 1.0 / std::sqrt(static_cast<double>(hd));
    Tensor u = concat_rows({f1, f2});  // the key/value union, order irrelevant to the sum
    Tensor k = matmul(u, cp.wk);
    Tensor v = matmul(u, cp.wv);

    auto attend_one = [&](const Tensor& f) {
        Tensor q = matmul(f, cp.wq);
        std::vector<Tensor> head_outs;
        head_outs.reserve(cp.heads);
        for (std::size_t h = 0; h < cp.heads; ++h) {
            Tensor qh = slice_cols(q, h * hd, (h + 1) * hd);
            Tensor kh = slice_cols(k, h * hd, (h + 1) * hd);
            Tensor vh = slice_cols(v, h * hd, (h + 1) * hd);
            Tensor probs = softmax_masked(scale(matmul(qh, transpose(kh)), scl), 1);
            head_outs.push_back(matmul(probs, vh));
        }
        Tensor merged = concat_cols(head_outs);                   // (4, embed_dim)
        Tensor pooled = reshape(sum_axis(merged, 0), {1, de});    // sum over the four modalities
        return add_rowvec(matmul(pooled, cp.w_out), cp.b_out);    // (1, d)
    };
    return {attend_one(f1), attend_one(f2)};
}

}  // namespace hydranet
