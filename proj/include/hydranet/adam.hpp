#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hydranet/tensor.hpp"

namespace hydranet {

/// Ordered collection of named learnable tensors. Order is the registration
/// order, which fixes the optimizer and checkpoint iteration order.
class ParameterMap {
public:
    Tensor add(std::string name, Tensor t) {
        if (!t.requires_grad()) {
            throw contract_error("parameter '" + name + "' must require gradients");
        }
        if (find(name)) throw contract_error("duplicate parameter name '" + name + "'");
        items_.emplace_back(std::move(name), t);
        return t;
    }

    const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }

    Tensor* find(const std::string& name) {
        for (auto& [n, t] : items_)
            if (n == name) return &t;
        return nullptr;
    }

    std::size_t total_size() const {
        std::size_t n = 0;
        for (const auto& [name, t] : items_) n += t.size();
        return n;
    }

    void zero_grads() {
        for (auto& [name, t] : items_) t.zero_grad();
    }

private:
    std::vector<std::pair<std::string, Tensor>> items_;
};

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long step_count = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    void init(const ParameterMap& params) {
        m.clear();
        v.clear();
        for (const auto& [name, t] : params.items()) {
            m.emplace_back(t.size(), 0.0);
            v.emplace_back(t.size(), 0.0);
        }
        step_count = 0;
    }
};

/// Standard Adam update with bias correction; gradients are zeroed after the
/// step. Tensors registered more than once (aliased parameters) are updated
/// once, on their first occurrence.
inline void adam_step(ParameterMap& params, AdamState& state) {
    if (state.m.size() != params.items().size()) {
        throw contract_error("adam state not initialized for this parameter map");
    }
    ++state.step_count;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    std::unordered_set<const TensorNode*> seen;
    for (std::size_t p = 0; p < params.items().size(); ++p) {
        const std::string& name = params.items()[p].first;
        Tensor t = params.items()[p].second;  // shared handle
        if (!t.requires_grad() || t.grad().size() != t.size()) {
            throw contract_error("missing gradient on parameter '" + name + "'");
        }
        if (!seen.insert(t.node().get()).second) continue;
        auto& value = t.mutable_values();
        auto& grad = t.mutable_grad();
        auto& mp = state.m[p];
        auto& vp = state.v[p];
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double g = grad[i];
            mp[i] = state.beta1 * mp[i] + (1.0 - state.beta1) * g;
            vp[i] = state.beta2 * vp[i] + (1.0 - state.beta2) * g * g;
            const double mhat = mp[i] / bc1;
            const double vhat = vp[i] / bc2;
            value[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
        std::fill(grad.begin(), grad.end(), 0.0);
    }
}

/// Finite-difference check of d(loss)/d(theta), one parameter group at a
/// time. Deviations inside a group are normalized by the group's gradient
/// scale: with h = 1e-5 the central differences of an O(1) loss carry about
/// 1e-11 of cancellation noise, so an entry-wise quotient would read pure
/// noise for any entry whose true gradient is tiny. loss_fn must be a pure
/// function of the current parameter values. Returns the worst group error.
inline double grad_check_params(const std::function<Tensor()>& loss_fn, ParameterMap& params,
                                double h = 1e-5) {
    std::vector<std::vector<double>> analytic;
    {
        params.zero_grads();
        Tape tape;
        Tensor loss = loss_fn();
        if (loss.size() != 1) throw contract_error("grad_check_params requires a scalar loss");
        tape.backward(loss);
        for (const auto& [name, t] : params.items()) analytic.push_back(t.grad());
    }
    double worst = 0.0;
    std::unordered_set<const TensorNode*> seen;
    for (std::size_t p = 0; p < params.items().size(); ++p) {
        Tensor t = params.items()[p].second;  // shared handle
        if (!seen.insert(t.node().get()).second) continue;
        auto& value = t.mutable_values();
        double dev = 0.0, scale = 1e-8;
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double orig = value[i];
            value[i] = orig + h;
            double fp = loss_fn().item();
            value[i] = orig - h;
            double fm = loss_fn().item();
            value[i] = orig;
            double numeric = (fp - fm) / (2.0 * h);
            dev = std::max(dev, std::abs(analytic[p][i] - numeric));
            scale = std::max({scale, std::abs(analytic[p][i]), std::abs(numeric)});
        }
        worst = std::max(worst, dev / scale);
    }
    params.zero_grads();
    return worst;
}

}  // namespace hydranet
