#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "hydranet/hydra.hpp"

namespace hydranet {
namespace reference {

// Loop-based transcription of the momentum kernel, kept deliberately free of
// the tensor library so it can serve as an independent oracle for the fast
// path. Only parameter VALUES are shared, never code.

using Grid = std::vector<std::vector<double>>;

struct NaiveWeights {
    std::size_t d = 0, heads = 0, head_dim = 0;
    std::vector<double> w_in, b_in, a_log, dt_bias, residual_d, norm_weight, w_out, b_out;
    std::vector<double> wq_diag, wk_diag, wv_diag, wq_off, wk_off, wv_off;
};

inline NaiveWeights extract_naive_weights(const HydraParams& p, const HydraConfig& cfg) {
    NaiveWeights w;
    w.d = cfg.d;
    w.heads = cfg.heads;
    w.head_dim = cfg.head_dim;
    w.w_in = p.w_in.values();
    w.b_in = p.b_in.values();
    w.a_log = p.a_log.values();
    w.dt_bias = p.dt_bias.values();
    w.residual_d = p.residual_d.values();
    w.norm_weight = p.norm_weight.values();
    w.w_out = p.w_out.values();
    w.b_out = p.b_out.values();
    w.wq_diag = p.wq_diag.values();
    w.wk_diag = p.wk_diag.values();
    w.wv_diag = p.wv_diag.values();
    w.wq_off = p.wq_off.values();
    w.wk_off = p.wk_off.values();
    w.wv_off = p.wv_off.values();
    return w;
}

namespace naive {

inline double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// out[r] = sum_k in[r][k] * w[k][c] + b[c]
inline Grid linear(const Grid& in, const std::vector<double>& w, const std::vector<double>& b,
                   std::size_t in_w, std::size_t out_w) {
    Grid out(in.size(), std::vector<double>(out_w, 0.0));
    for (std::size_t r = 0; r < in.size(); ++r) {
        for (std::size_t c = 0; c < out_w; ++c) {
            double s = b.empty() ? 0.0 : b[c];
            for (std::size_t k = 0; k < in_w; ++k) s += in[r][k] * w[k * out_w + c];
            out[r][c] = s;
        }
    }
    return out;
}

}  // namespace naive

/// Forward pass for one game, identical contract to forward_game in
/// evaluation mode. points is (L, d) row-major, m_i has length d; the result
/// is the full (1+L, d) output.
inline Grid naive_mssd_reference(const Grid& points, const std::vector<double>& m_i,
                                 const NaiveWeights& w) {
    const std::size_t L = points.size();
    const std::size_t d = w.d;
    const std::size_t H = w.heads;
    const std::size_t P = w.head_dim;
    const std::size_t d_inner = H * P;
    const std::size_t d_state = d;
    const std::size_t d_in = 2 * d_inner + 2 * d_state + H;
    const std::size_t T = L + 1;

    // Input assembly and projection into z | x | B | C | dt.
    Grid g(T, std::vector<double>(d));
    g[0] = m_i;
    for (std::size_t t = 0; t < L; ++t) g[t + 1] = points[t];
    Grid proj = naive::linear(g, w.w_in, w.b_in, d, d_in);

    Grid z(T, std::vector<double>(d_inner));
    std::vector<Grid> x(T, Grid(H, std::vector<double>(P)));
    Grid bmat(T, std::vector<double>(d_state));
    Grid cmat(T, std::vector<double>(d_state));
    Grid amat(T, std::vector<double>(H));
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < d_inner; ++j) z[t][j] = proj[t][j];
        for (std::size_t h = 0; h < H; ++h)
            for (std::size_t p = 0; p < P; ++p) x[t][h][p] = proj[t][d_inner + h * P + p];
        for (std::size_t j = 0; j < d_state; ++j) bmat[t][j] = proj[t][2 * d_inner + j];
        for (std::size_t j = 0; j < d_state; ++j) cmat[t][j] = proj[t][2 * d_inner + d_state + j];
        for (std::size_t h = 0; h < H; ++h) {
            double dt = proj[t][2 * d_inner + 2 * d_state + h];
            amat[t][h] = -std::exp(w.a_log[h]) * naive::softplus(dt + w.dt_bias[h]);
        }
    }

    // Sliding windows of size 2 with stride 1: window n covers rows n-1 and n
    // of the padded sequence (0-based: rows n and n+1 for window n).
    const std::size_t N = T - 1;
    const std::size_t S = 2;

    // Per window and head: within-window output, cumulative decay, end state.
    // y_diag[n][s][h][p], cums[h][n][s], state[n][h][p][dstate]
    std::vector<std::vector<Grid>> y_diag(N, std::vector<Grid>(S, Grid(H, std::vector<double>(P, 0.0))));
    std::vector<std::vector<Grid>> y_off(N, std::vector<Grid>(S, Grid(H, std::vector<double>(P, 0.0))));
    std::vector<std::vector<std::vector<double>>> cums(
        N, std::vector<std::vector<double>>(S, std::vector<double>(H, 0.0)));
    std::vector<std::vector<Grid>> state(N, std::vector<Grid>(H, Grid(P, std::vector<double>(d_state, 0.0))));

    for (std::size_t n = 0; n < N; ++n) {
        const std::size_t rows[2] = {n, n + 1};
        for (std::size_t h = 0; h < H; ++h) {
            // cumulative decay inside the window
            double acc = 0.0;
            for (std::size_t s = 0; s < S; ++s) {
                acc += amat[rows[s]][h];
                cums[n][s][h] = acc;
            }
            // within-window causal aggregation
            for (std::size_t s = 0; s < S; ++s) {
                for (std::size_t t = 0; t <= s; ++t) {
                    double cb = 0.0;
                    for (std::size_t k = 0; k < d_state; ++k)
                        cb += cmat[rows[s]][k] * bmat[rows[t]][k];
                    double seg = 0.0;
                    for (std::size_t k = t + 1; k <= s; ++k) seg += amat[rows[k]][h];
                    double weight = cb * std::exp(seg);
                    for (std::size_t p = 0; p < P; ++p)
                        y_diag[n][s][h][p] += weight * x[rows[t]][h][p];
                }
            }
            // decayed end-of-window state
            for (std::size_t s = 0; s < S; ++s) {
                double decay = std::exp(cums[n][S - 1][h] - cums[n][s][h]);
                for (std::size_t p = 0; p < P; ++p)
                    for (std::size_t k = 0; k < d_state; ++k)
                        state[n][h][p][k] += bmat[rows[s]][k] * decay * x[rows[s]][h][p];
            }
        }
    }

    // Carried state entering each window: zero-initialized recursion over the
    // padded sequence of window end sums.
    for (std::size_t h = 0; h < H; ++h) {
        std::vector<double> padded(N + 1, 0.0);
        for (std::size_t n = 0; n < N; ++n) padded[n + 1] = cums[n][S - 1][h];
        for (std::size_t n = 0; n < N; ++n) {
            Grid carried(P, std::vector<double>(d_state, 0.0));
            for (std::size_t c = 1; c <= n; ++c) {
                double seg = 0.0;
                for (std::size_t k = c + 1; k <= n; ++k) seg += padded[k];
                double f = std::exp(seg);
                for (std::size_t p = 0; p < P; ++p)
                    for (std::size_t k = 0; k < d_state; ++k)
                        carried[p][k] += f * state[c - 1][h][p][k];
            }
            for (std::size_t s = 0; s < S; ++s) {
                double decay = std::exp(cums[n][s][h]);
                for (std::size_t p = 0; p < P; ++p) {
                    double dot = 0.0;
                    for (std::size_t k = 0; k < d_state; ++k)
                        dot += cmat[n + s][k] * carried[p][k];
                    y_off[n][s][h][p] = dot * decay;
                }
            }
        }
    }

    // Fold the windowed streams back to sequences: position 0 from window 0
    // slot 0, position t from window t-1 slot 1.
    Grid diag_seq(T, std::vector<double>(d_inner));
    Grid off_seq(T, std::vector<double>(d_inner));
    for (std::size_t t = 0; t < T; ++t) {
        std::size_t n = t == 0 ? 0 : t - 1;
        std::size_t s = t == 0 ? 0 : 1;
        for (std::size_t h = 0; h < H; ++h)
            for (std::size_t p = 0; p < P; ++p) {
                diag_seq[t][h * P + p] = y_diag[n][s][h][p];
                off_seq[t][h * P + p] = y_off[n][s][h][p];
            }
    }

    // Cross-attention fusion with causal masking.
    Grid qd = naive::linear(diag_seq, w.wq_diag, {}, d_inner, d_inner);
    Grid kd = naive::linear(diag_seq, w.wk_diag, {}, d_inner, d_inner);
    Grid vd = naive::linear(diag_seq, w.wv_diag, {}, d_inner, d_inner);
    Grid qo = naive::linear(off_seq, w.wq_off, {}, d_inner, d_inner);
    Grid ko = naive::linear(off_seq, w.wk_off, {}, d_inner, d_inner);
    Grid vo = naive::linear(off_seq, w.wv_off, {}, d_inner, d_inner);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_inner));
    Grid fused(T, std::vector<double>(d_inner, 0.0));
    auto attend = [&](const Grid& q, const Grid& k, const Grid& v) {
        for (std::size_t i = 0; i < T; ++i) {
            std::vector<double> logits(i + 1);
            double mx = -1e300;
            for (std::size_t j = 0; j <= i; ++j) {
                double s = 0.0;
                for (std::size_t c = 0; c < d_inner; ++c) s += q[i][c] * k[j][c];
                logits[j] = s * scale;
                if (logits[j] > mx) mx = logits[j];
            }
            double denom = 0.0;
            for (std::size_t j = 0; j <= i; ++j) {
                logits[j] = std::exp(logits[j] - mx);
                denom += logits[j];
            }
            for (std::size_t j = 0; j <= i; ++j) {
                double wgt = logits[j] / denom;
                for (std::size_t c = 0; c < d_inner; ++c) fused[i][c] += wgt * v[j][c];
            }
        }
    };
    attend(qd, ko, vo);
    attend(qo, kd, vd);

    // Residual, gated normalization, output projection.
    Grid y3(T, std::vector<double>(d_inner));
    for (std::size_t t = 0; t < T; ++t) {
        double ss = 0.0;
        std::vector<double> yres(d_inner);
        for (std::size_t h = 0; h < H; ++h)
            for (std::size_t p = 0; p < P; ++p) {
                std::size_t c = h * P + p;
                yres[c] = fused[t][c] + x[t][h][p] * w.residual_d[h];
                ss += yres[c] * yres[c];
            }
        double inv = 1.0 / std::sqrt(ss / static_cast<double>(d_inner) + kRmsEps);
        for (std::size_t c = 0; c < d_inner; ++c) {
            double gate = z[t][c] * naive::sigmoid(z[t][c]);
            y3[t][c] = yres[c] * gate * inv * w.norm_weight[c];
        }
    }
    return naive::linear(y3, w.w_out, w.b_out, d_inner, d);
}

/// Sequential state-space recurrence h_t = exp(a_t) h_{t-1} + B_t x_t,
/// y_t = C_t . h_t, evaluated with plain loops. Shapes match the kernel
/// inputs: x (T, H*P), a (T, H), b and c (T, d_state).
inline Grid naive_ssm_scan(const Grid& x, const Grid& a, const Grid& b, const Grid& c,
                           std::size_t heads, std::size_t head_dim) {
    const std::size_t T = x.size();
    const std::size_t d_state = b.empty() ? 0 : b[0].size();
    Grid y(T, std::vector<double>(heads * head_dim, 0.0));
    for (std::size_t h = 0; h < heads; ++h) {
        Grid state(head_dim, std::vector<double>(d_state, 0.0));
        for (std::size_t t = 0; t < T; ++t) {
            double decay = std::exp(a[t][h]);
            for (std::size_t p = 0; p < head_dim; ++p)
                for (std::size_t k = 0; k < d_state; ++k) {
                    state[p][k] = decay * state[p][k] + b[t][k] * x[t][h * head_dim + p];
                }
            for (std::size_t p = 0; p < head_dim; ++p) {
                double dot = 0.0;
                for (std::size_t k = 0; k < d_state; ++k) dot += c[t][k] * state[p][k];
                y[t][h * head_dim + p] = dot;
            }
        }
    }
    return y;
}

}  // namespace reference
}  // namespace hydranet
