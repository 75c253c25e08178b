#pragma once

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hydranet/adam.hpp"
#include "hydranet/tensor.hpp"

namespace hydranet {

inline constexpr double kRmsEps = 1e-6;

/// Dimensions of one per-player momentum model. The state width equals the
/// feature width d; the inner width is heads * head_dim.
struct HydraConfig {
    std::size_t d = 16;
    std::size_t heads = 4;
    std::size_t head_dim = 8;

    std::size_t d_inner() const { return heads * head_dim; }
    std::size_t d_state() const { return d; }
    std::size_t d_in() const { return 2 * d_inner() + 2 * d_state() + heads; }

    void validate() const {
        if (d == 0 || heads == 0 || head_dim == 0) {
            throw config_error("hydra dimensions must be positive");
        }
    }
};

struct HydraParams {
    Tensor w_in;   // (d, d_in)
    Tensor b_in;   // (d_in)
    Tensor a_log;  // (heads): base temporal decay, applied as -exp(a_log)
    Tensor dt_bias;  // (heads)
    Tensor residual_d;   // (heads), broadcast over head_dim
    Tensor norm_weight;  // (d_inner)
    Tensor w_out;  // (d_inner, d)
    Tensor b_out;  // (d)
    Tensor wq_diag, wk_diag, wv_diag;  // (d_inner, d_inner)
    Tensor wq_off, wk_off, wv_off;
    Tensor w_game;  // (d, d): carry update at game boundaries
    Tensor b_game;  // (d)
    Tensor w_set;   // (d, d): carry update at set boundaries
    Tensor b_set;   // (d)

    static HydraParams init(const HydraConfig& cfg, std::mt19937_64& rng) {
        cfg.validate();
        HydraParams p;
        const double in_std = 1.0 / std::sqrt(static_cast<double>(cfg.d));
        const double inner_std = 1.0 / std::sqrt(static_cast<double>(cfg.d_inner()));
        // Input rows carry unbounded score-difference features, so the input
        // projection and the fusion query/key maps start small: the window
        // products and attention logits must not begin saturated or the
        // fusion gradients die.
        p.w_in = randn({cfg.d, cfg.d_in()}, rng, in_std / 16.0, true);
        p.b_in = Tensor::zeros({cfg.d_in()}, true);
        std::vector<double> alog(cfg.heads);
        for (std::size_t h = 0; h < cfg.heads; ++h) alog[h] = std::log(static_cast<double>(h + 1));
        p.a_log = Tensor::from_data({cfg.heads}, std::move(alog), true);
        // softplus(dt_bias) ~ 0.05 at init keeps early decays gentle
        p.dt_bias = Tensor::full({cfg.heads}, std::log(std::expm1(0.05)), true);
        p.residual_d = Tensor::full({cfg.heads}, 1.0, true);
        p.norm_weight = Tensor::full({cfg.d_inner()}, 1.0, true);
        p.w_out = randn({cfg.d_inner(), cfg.d}, rng, inner_std, true);
        p.b_out = Tensor::zeros({cfg.d}, true);
        p.wq_diag = randn({cfg.d_inner(), cfg.d_inner()}, rng, inner_std / 8.0, true);
        p.wk_diag = randn({cfg.d_inner(), cfg.d_inner()}, rng, inner_std / 8.0, true);
        p.wv_diag = randn({cfg.d_inner(), cfg.d_inner()}, rng, inner_std, true);
        p.wq_off = randn({cfg.d_inner(), cfg.d_inner()}, rng, inner_std / 8.0, true);
        p.wk_off = randn({cfg.d_inner(), cfg.d_inner()}, rng, inner_std / 8.0, true);
        p.wv_off = randn({cfg.d_inner(), cfg.d_inner()}, rng, inner_std, true);
        p.w_game = randn({cfg.d, cfg.d}, rng, in_std, true);
        p.b_game = Tensor::zeros({cfg.d}, true);
        p.w_set = randn({cfg.d, cfg.d}, rng, in_std, true);
        p.b_set = Tensor::zeros({cfg.d}, true);
        return p;
    }

    void register_into(ParameterMap& params, const std::string& prefix) const {
        params.add(prefix + ".w_in", w_in);
        params.add(prefix + ".b_in", b_in);
        params.add(prefix + ".a_log", a_log);
        params.add(prefix + ".dt_bias", dt_bias);
        params.add(prefix + ".residual_d", residual_d);
        params.add(prefix + ".norm_weight", norm_weight);
        params.add(prefix + ".w_out", w_out);
        params.add(prefix + ".b_out", b_out);
        params.add(prefix + ".wq_diag", wq_diag);
        params.add(prefix + ".wk_diag", wk_diag);
        params.add(prefix + ".wv_diag", wv_diag);
        params.add(prefix + ".wq_off", wq_off);
        params.add(prefix + ".wk_off", wk_off);
        params.add(prefix + ".wv_off", wv_off);
        params.add(prefix + ".w_game", w_game);
        params.add(prefix + ".b_game", b_game);
        params.add(prefix + ".w_set", w_set);
        params.add(prefix + ".b_set", b_set);
    }
};

// ---------------------------------------------------------------------------
// Implicit momentum
// ---------------------------------------------------------------------------

enum class Provenance { match_start, cross_game, cross_set };
enum class Transition { cross_game, cross_set };

struct ImplicitMomentum {
    Tensor value;  // (1, d)
    Provenance provenance = Provenance::match_start;
};

/// Both players start a match with zero carried momentum.
inline std::pair<ImplicitMomentum, ImplicitMomentum> init_implicit_momentum(std::size_t d) {
    return {ImplicitMomentum{Tensor::zeros({1, d}), Provenance::match_start},
            ImplicitMomentum{Tensor::zeros({1, d}), Provenance::match_start}};
}

/// Carry update from the final output row of a game.
inline Tensor update_implicit_momentum(const Tensor& y_last, Transition transition,
                                       const HydraParams& params) {
    if (y_last.rank() != 2 || y_last.extent(0) != 1) {
        throw shape_error("implicit momentum update expects a single output row");
    }
    switch (transition) {
        case Transition::cross_game:
            return add_rowvec(matmul(y_last, params.w_game), params.b_game);
        case Transition::cross_set:
            return add_rowvec(matmul(y_last, params.w_set), params.b_set);
    }
    throw contract_error("unknown momentum transition");
}

/// Prepends the carried momentum row to the game's points: row 0 is M_i,
/// rows 1..L are the points in order.
inline Tensor build_game_input(const Tensor& m_i, const Tensor& points) {
    if (points.rank() != 2 || m_i.rank() != 2 || m_i.extent(0) != 1 ||
        m_i.extent(1) != points.extent(1)) {
        throw shape_error("game input expects (1, d) momentum and (L, d) points");
    }
    if (points.extent(0) == 0) throw contract_error("cannot build input for an empty game");
    return concat_rows({m_i, points});
}

// ---------------------------------------------------------------------------
// Core parameter construction
// ---------------------------------------------------------------------------

struct CoreParams {
    Tensor z;   // (T, d_inner), gate input
    Tensor x;   // (T, d_inner), head h occupies columns [h*P, (h+1)*P)
    Tensor B;   // (T, d_state), input-to-state map, shared across heads
    Tensor C;   // (T, d_state), state-to-output map, shared across heads
    Tensor dt;  // (T, heads)
};

inline CoreParams project_core_parameters(const Tensor& g, const HydraParams& params,
                                          const HydraConfig& cfg) {
    if (g.rank() != 2 || g.extent(1) != cfg.d) {
        throw shape_error("game input must be (T, " + std::to_string(cfg.d) + "), got " +
                          shape_str(g.shape()));
    }
    Tensor proj = add_rowvec(matmul(g, params.w_in), params.b_in);  // (T, d_in)
    const std::size_t di = cfg.d_inner(), ds = cfg.d_state();
    CoreParams core;
    core.z = slice_cols(proj, 0, di);
    Tensor xbc = slice_cols(proj, di, 2 * di + 2 * ds);
    core.x = slice_cols(xbc, 0, di);
    core.B = slice_cols(xbc, di, di + ds);
    core.C = slice_cols(xbc, di + ds, di + 2 * ds);
    core.dt = slice_cols(proj, 2 * di + 2 * ds, 2 * di + 2 * ds + cfg.heads);
    return core;
}

/// A = -exp(a_log) * softplus(dt + dt_bias), strictly negative everywhere.
inline Tensor compute_decay(const Tensor& dt, const HydraParams& params) {
    Tensor rate = softplus(add_rowvec(dt, params.dt_bias));
    return mul_rowvec(rate, neg(exp(params.a_log)));
}

// ---------------------------------------------------------------------------
// Windowing
// ---------------------------------------------------------------------------

/// Row layout of the sliding windows and of the fold back to sequence form.
/// stride 1 gives the production overlap (window n covers positions n-1 and
/// n; the output for position t is taken from the window where t is the
/// current point). stride == window gives disjoint chunks.
struct WindowPlan {
    std::size_t window = 2;
    std::size_t stride = 1;
    std::vector<std::size_t> starts;
    std::vector<std::size_t> fold_index;  // seq position -> window * window_size + slot

    static WindowPlan make(std::size_t seq_len, std::size_t window, std::size_t stride) {
        if (seq_len < 2) throw shape_error("windowing requires a sequence of at least 2 rows");
        if (window < 2) throw shape_error("window size must be at least 2");
        WindowPlan plan;
        plan.window = window;
        plan.stride = stride;
        if (stride == 1) {
            if (window != 2) throw contract_error("overlapping windows use size 2");
            for (std::size_t s = 0; s + 2 <= seq_len; ++s) plan.starts.push_back(s);
            plan.fold_index.resize(seq_len);
            plan.fold_index[0] = 0;  // window 0, slot 0
            for (std::size_t t = 1; t < seq_len; ++t) plan.fold_index[t] = (t - 1) * 2 + 1;
        } else if (stride == window) {
            if (seq_len % window != 0) {
                throw shape_error("sequence length " + std::to_string(seq_len) +
                                  " is not a multiple of the window size");
            }
            for (std::size_t s = 0; s < seq_len; s += window) plan.starts.push_back(s);
            plan.fold_index.resize(seq_len);
            for (std::size_t t = 0; t < seq_len; ++t) plan.fold_index[t] = t;
        } else {
            throw contract_error("unsupported window stride");
        }
        return plan;
    }

    std::size_t count() const { return starts.size(); }
};

// ---------------------------------------------------------------------------
// Per-window pieces (single head)
// ---------------------------------------------------------------------------

/// Causal within-window aggregation: out[s] = sum_{t<=s} (C_s . B_t) L[s][t] x_t.
inline Tensor mssd_intra_window(const Tensor& x_w, const Tensor& a_w, const Tensor& b_w,
                                const Tensor& c_w) {
    Tensor l = segsum_exp(a_w);
    Tensor cb = matmul(c_w, transpose(b_w));
    return matmul(mul(cb, l), x_w);
}

struct WindowState {
    Tensor cumsum_a;  // (S)
    Tensor state;     // (head_dim, d_state): decayed end-of-window state
};

/// End-of-window state: state = sum_s E[s] x_s (outer) B_s with the decay
/// E[s] = exp(cumsum[S-1] - cumsum[s]), read off the last row of the segment
/// matrix.
inline WindowState mssd_window_state(const Tensor& x_w, const Tensor& a_w, const Tensor& b_w) {
    const std::size_t s_len = a_w.extent(0);
    WindowState ws;
    ws.cumsum_a = cumsum(a_w, 0);
    Tensor l = segsum_exp(a_w);
    Tensor decay = reshape(slice_rows(l, s_len - 1, s_len), {s_len});
    ws.state = matmul(transpose(x_w), mul_colvec(b_w, decay));
    return ws;
}

/// Inter-window recursion. window_end_sums is (N, 1) with each window's total
/// decay; states_flat is (N, head_dim * d_state). Returns the carried state
/// entering each window: zero for the first, then the decayed accumulation of
/// earlier window states.
inline Tensor mssd_carried_states(const Tensor& window_end_sums, const Tensor& states_flat) {
    const std::size_t n = states_flat.extent(0);
    Tensor padded = reshape(concat_rows({Tensor::zeros({1, 1}), window_end_sums}), {n + 1});
    Tensor f = segsum_exp(padded);                       // (N+1, N+1)
    Tensor f_sub = slice_cols(slice_rows(f, 0, n), 1, n + 1);  // (N, N), strictly causal
    return matmul(f_sub, states_flat);
}

/// Off-diagonal window output: out[s] = (C_s . carried) * exp(cumsum[s]).
inline Tensor mssd_off_diagonal(const Tensor& c_w, const Tensor& carried,
                                const Tensor& cumsum_a) {
    return mul_colvec(matmul(c_w, transpose(carried)), exp(cumsum_a));
}

// ---------------------------------------------------------------------------
// Full kernel
// ---------------------------------------------------------------------------

struct MssdStreams {
    Tensor y_diag;  // (T, d_inner)
    Tensor y_off;   // (T, d_inner)
};

/// Runs the five-step windowed kernel over the sequence and folds both
/// streams back to sequence form.
inline MssdStreams mssd_streams(const Tensor& x, const Tensor& a, const Tensor& b,
                                const Tensor& c, const HydraConfig& cfg,
                                std::size_t window = 2, std::size_t stride = 1) {
    const std::size_t seq_len = x.extent(0);
    if (a.extent(0) != seq_len || b.extent(0) != seq_len || c.extent(0) != seq_len) {
        throw shape_error("kernel inputs must share the sequence length");
    }
    const WindowPlan plan = WindowPlan::make(seq_len, window, stride);
    const std::size_t n = plan.count();
    const std::size_t s_len = plan.window;
    const std::size_t p = cfg.head_dim;

    std::vector<Tensor> diag_heads, off_heads;
    diag_heads.reserve(cfg.heads);
    off_heads.reserve(cfg.heads);
    for (std::size_t h = 0; h < cfg.heads; ++h) {
        Tensor x_h = slice_cols(x, h * p, (h + 1) * p);
        Tensor a_h = slice_cols(a, h, h + 1);  // (T, 1)

        std::vector<Tensor> diag_blocks, state_rows, end_sums, cum_list, cw_list;
        diag_blocks.reserve(n);
        state_rows.reserve(n);
        end_sums.reserve(n);
        cum_list.reserve(n);
        cw_list.reserve(n);
        for (std::size_t w = 0; w < n; ++w) {
            const std::size_t r0 = plan.starts[w];
            Tensor x_w = slice_rows(x_h, r0, r0 + s_len);
            Tensor a_w = reshape(slice_rows(a_h, r0, r0 + s_len), {s_len});
            Tensor b_w = slice_rows(b, r0, r0 + s_len);
            Tensor c_w = slice_rows(c, r0, r0 + s_len);

            diag_blocks.push_back(mssd_intra_window(x_w, a_w, b_w, c_w));
            WindowState ws = mssd_window_state(x_w, a_w, b_w);
            state_rows.push_back(reshape(ws.state, {1, p * cfg.d_state()}));
            Tensor cs2 = reshape(ws.cumsum_a, {s_len, 1});
            end_sums.push_back(slice_rows(cs2, s_len - 1, s_len));
            cum_list.push_back(ws.cumsum_a);
            cw_list.push_back(c_w);
        }

        Tensor carried = mssd_carried_states(concat_rows(end_sums), concat_rows(state_rows));
        std::vector<Tensor> off_blocks;
        off_blocks.reserve(n);
        for (std::size_t w = 0; w < n; ++w) {
            Tensor carried_w = reshape(slice_rows(carried, w, w + 1), {p, cfg.d_state()});
            off_blocks.push_back(mssd_off_diagonal(cw_list[w], carried_w, cum_list[w]));
        }

        diag_heads.push_back(gather_rows(concat_rows(diag_blocks), plan.fold_index));
        off_heads.push_back(gather_rows(concat_rows(off_blocks), plan.fold_index));
    }
    return {concat_cols(diag_heads), concat_cols(off_heads)};
}

inline Tensor causal_mask(std::size_t n) {
    std::vector<double> m(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) m[i * n + j] = 1.0;
    return Tensor::from_data({n, n}, std::move(m));
}

/// Bidirectional cross-attention between the two streams, each projected to
/// queries/keys/values, scaled by 1/sqrt(d_inner).
inline Tensor fuse_streams(const Tensor& y_diag, const Tensor& y_off, const HydraParams& params,
                           bool causal = true) {
    const std::size_t t_len = y_diag.extent(0);
    const double scl = 1.0 / std::sqrt(static_cast<double>(y_diag.extent(1)));
    Tensor qd = matmul(y_diag, params.wq_diag);
    Tensor kd = matmul(y_diag, params.wk_diag);
    Tensor vd = matmul(y_diag, params.wv_diag);
    Tensor qo = matmul(y_off, params.wq_off);
    Tensor ko = matmul(y_off, params.wk_off);
    Tensor vo = matmul(y_off, params.wv_off);
    Tensor mask;
    const Tensor* mp = nullptr;
    if (causal) {
        mask = causal_mask(t_len);
        mp = &mask;
    }
    Tensor a1 = softmax_masked(scale(matmul(qd, transpose(ko)), scl), 1, mp);
    Tensor a2 = softmax_masked(scale(matmul(qo, transpose(kd)), scl), 1, mp);
    return add(matmul(a1, vo), matmul(a2, vd));
}

/// Residual, gated normalization and output projection:
/// Y' = Y + x * D, Y''' = (Y' * silu(z)) / rms(Y') * w, out = Y''' W_out + b.
inline Tensor finalize_output(const Tensor& y, const Tensor& x, const Tensor& z,
                              const HydraParams& params, const HydraConfig& cfg) {
    Tensor d_wide = expand_heads(params.residual_d, cfg.head_dim);
    Tensor y_res = add(y, mul_rowvec(x, d_wide));
    Tensor gate = silu(z);
    Tensor gated = mul(y_res, gate);
    Tensor mean_sq = scale(sum_axis(square(y_res), 1), 1.0 / static_cast<double>(cfg.d_inner()));
    Tensor inv_rms = rsqrt(add_scalar(mean_sq, kRmsEps));
    Tensor normed = mul_rowvec(mul_colvec(gated, inv_rms), params.norm_weight);
    return add_rowvec(matmul(normed, params.w_out), params.b_out);
}

// ---------------------------------------------------------------------------
// Whole-game forward pass
// ---------------------------------------------------------------------------

struct GameForward {
    Tensor full;    // (1+L, d): row 0 is the carried-momentum position
    Tensor points;  // (L, d): per-point outputs
    Tensor last;    // (1, d): final row, used for the carry update
};

inline GameForward forward_game(const Tensor& points, const Tensor& m_i, const HydraParams& params,
                                const HydraConfig& cfg, double dropout_p = 0.0,
                                std::mt19937_64* dropout_rng = nullptr) {
    Tensor g = build_game_input(m_i, points);
    CoreParams core = project_core_parameters(g, params, cfg);
    Tensor a = compute_decay(core.dt, params);
    MssdStreams streams = mssd_streams(core.x, a, core.B, core.C, cfg);
    Tensor fused = fuse_streams(streams.y_diag, streams.y_off, params, /*causal=*/true);
    if (dropout_p > 0.0) {
        if (!dropout_rng) throw contract_error("dropout requires a random source");
        fused = dropout(fused, dropout_p, *dropout_rng);
    }
    Tensor out = finalize_output(fused, core.x, core.z, params, cfg);
    const std::size_t t_len = out.extent(0);
    GameForward r;
    r.full = out;
    r.points = slice_rows(out, 1, t_len);
    r.last = slice_rows(out, t_len - 1, t_len);
    return r;
}

/// Chunked kernel in its plain form (no attention fusion): the sum of the
/// within-window and inter-window streams. With disjoint windows this equals
/// the sequential state-space recurrence.
inline Tensor mssd_chunked_sum(const Tensor& x, const Tensor& a, const Tensor& b, const Tensor& c,
                               const HydraConfig& cfg, std::size_t window, std::size_t stride) {
    MssdStreams s = mssd_streams(x, a, b, c, cfg, window, stride);
    return add(s.y_diag, s.y_off);
}

}  // namespace hydranet
