#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hydranet/common.hpp"

namespace hydranet {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(s[i]);
    }
    out += ")";
    return out;
}

struct TensorNode {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // sized iff requires_grad
    bool requires_grad = false;
};

/// Dense row-major tensor of 64-bit floats. A Tensor is a cheap shared handle;
/// values are treated as immutable once an operation has consumed them.
/// Gradients accumulate on nodes with requires_grad when a Tape is active.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return make(std::move(shape), 0.0, requires_grad);
    }

    static Tensor full(Shape shape, double v, bool requires_grad = false) {
        return make(std::move(shape), v, requires_grad);
    }

    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false) {
        if (shape_size(shape) != data.size()) {
            throw shape_error("tensor data length " + std::to_string(data.size()) +
                              " does not match shape " + shape_str(shape));
        }
        auto node = std::make_shared<TensorNode>();
        node->shape = std::move(shape);
        node->value = std::move(data);
        node->requires_grad = requires_grad;
        if (requires_grad) node->grad.assign(node->value.size(), 0.0);
        return Tensor(std::move(node));
    }

    static Tensor scalar(double v, bool requires_grad = false) {
        return from_data({1}, {v}, requires_grad);
    }

    static Tensor vec(std::vector<double> data, bool requires_grad = false) {
        Shape s{data.size()};
        return from_data(std::move(s), std::move(data), requires_grad);
    }

    static Tensor row(std::vector<double> data, bool requires_grad = false) {
        Shape s{1, data.size()};
        return from_data(std::move(s), std::move(data), requires_grad);
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t size() const { return node_->value.size(); }
    std::size_t extent(std::size_t axis) const { return node_->shape.at(axis); }
    bool requires_grad() const { return node_->requires_grad; }

    const std::vector<double>& values() const { return node_->value; }
    const std::vector<double>& grad() const {
        if (!node_->requires_grad) throw contract_error("tensor has no gradient buffer");
        return node_->grad;
    }

    // Mutation is reserved for leaf setup and optimizer updates between tapes.
    std::vector<double>& mutable_values() { return node_->value; }
    std::vector<double>& mutable_grad() {
        if (!node_->requires_grad) throw contract_error("tensor has no gradient buffer");
        return node_->grad;
    }

    void zero_grad() {
        if (node_->requires_grad) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
    }

    double item() const {
        if (size() != 1) throw contract_error("item() requires a single-element tensor, got " + shape_str(shape()));
        return node_->value[0];
    }

    double at(std::size_t i) const { return node_->value.at(i); }
    double at(std::size_t i, std::size_t j) const {
        if (rank() != 2) throw shape_error("2-index access on rank-" + std::to_string(rank()) + " tensor");
        return node_->value[i * extent(1) + j];
    }

    const std::shared_ptr<TensorNode>& node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

    static Tensor make(Shape shape, double fill, bool requires_grad) {
        auto node = std::make_shared<TensorNode>();
        node->value.assign(shape_size(shape), fill);
        node->shape = std::move(shape);
        node->requires_grad = requires_grad;
        if (requires_grad) node->grad.assign(node->value.size(), 0.0);
        return Tensor(std::move(node));
    }

    std::shared_ptr<TensorNode> node_;
};

/// Single-writer record of operations for reverse-mode differentiation.
/// Exactly one tape may be active per thread; operations record a backward
/// rule when any input requires a gradient. backward() runs the rules in
/// reverse, populating leaf gradients, then clears the tape.
class Tape {
public:
    Tape() {
        if (active_) throw contract_error("a tape is already active on this thread");
        active_ = this;
    }
    ~Tape() { active_ = nullptr; }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static bool recording() { return active_ != nullptr; }
    static Tape& current() {
        if (!active_) throw contract_error("no active tape");
        return *active_;
    }

    void record(std::function<void()> fn) { ops_.push_back(std::move(fn)); }
    std::size_t op_count() const { return ops_.size(); }

    void backward(const Tensor& loss) {
        if (loss.size() != 1) {
            throw contract_error("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
        }
        if (!loss.requires_grad()) {
            throw contract_error("backward requires a loss recorded on the tape");
        }
        loss.node()->grad[0] += 1.0;
        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
        ops_.clear();
    }

private:
    static thread_local Tape* active_;
    std::vector<std::function<void()>> ops_;
};

inline thread_local Tape* Tape::active_ = nullptr;

inline void backward(const Tensor& loss) { Tape::current().backward(loss); }

namespace detail {

inline bool track(std::initializer_list<const Tensor*> inputs) {
    if (!Tape::recording()) return false;
    for (const Tensor* t : inputs) {
        if (t->requires_grad()) return true;
    }
    return false;
}

inline Tensor result(Shape shape, std::vector<double> data, bool rg) {
    return Tensor::from_data(std::move(shape), std::move(data), rg);
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw shape_error(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise operations
// ---------------------------------------------------------------------------

inline double stable_softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

inline double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace detail {

// fwd(x) -> y, dfwd(x, y) -> dy/dx
template <class Fwd, class Dfwd>
Tensor unary_op(const Tensor& x, Fwd fwd, Dfwd dfwd) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x.values()[i], i);
    bool rg = track({&x});
    Tensor y = result(x.shape(), std::move(out), rg);
    if (rg) {
        auto xn = x.node();
        auto yn = y.node();
        Tape::current().record([xn, yn, dfwd]() {
            if (!xn->requires_grad) return;
            for (std::size_t i = 0; i < xn->value.size(); ++i) {
                xn->grad[i] += yn->grad[i] * dfwd(xn->value[i], yn->value[i]);
            }
        });
    }
    return y;
}

}  // namespace detail

inline Tensor exp(const Tensor& x) {
    return detail::unary_op(
        x, [](double v, std::size_t) { return std::exp(v); },
        [](double, double y) { return y; });
}

inline Tensor log(const Tensor& x) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x.values()[i] > 0.0)) {
            throw domain_error("log of non-positive entry " + format_double(x.values()[i]) +
                               " at index " + std::to_string(i));
        }
    }
    return detail::unary_op(
        x, [](double v, std::size_t) { return std::log(v); },
        [](double v, double) { return 1.0 / v; });
}

inline Tensor sigmoid(const Tensor& x) {
    return detail::unary_op(
        x, [](double v, std::size_t) { return sigmoid_scalar(v); },
        [](double, double y) { return y * (1.0 - y); });
}

inline Tensor softplus(const Tensor& x) {
    return detail::unary_op(
        x, [](double v, std::size_t) { return stable_softplus(v); },
        [](double v, double) { return sigmoid_scalar(v); });
}

inline Tensor silu(const Tensor& x) {
    return detail::unary_op(
        x, [](double v, std::size_t) { return v * sigmoid_scalar(v); },
        [](double v, double) {
            double s = sigmoid_scalar(v);
            return s * (1.0 + v * (1.0 - s));
        });
}

inline Tensor neg(const Tensor& x) {
    return detail::unary_op(
        x, [](double v, std::size_t) { return -v; }, [](double, double) { return -1.0; });
}

inline Tensor scale(const Tensor& x, double c) {
    return detail::unary_op(
        x, [c](double v, std::size_t) { return c * v; }, [c](double, double) { return c; });
}

inline Tensor add_scalar(const Tensor& x, double c) {
    return detail::unary_op(
        x, [c](double v, std::size_t) { return v + c; }, [](double, double) { return 1.0; });
}

inline Tensor square(const Tensor& x) {
    return detail::unary_op(
        x, [](double v, std::size_t) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

inline Tensor sqrt(const Tensor& x) {
    return detail::unary_op(
        x, [](double v, std::size_t) { return std::sqrt(v); },
        [](double, double y) { return 0.5 / y; });
}

inline Tensor rsqrt(const Tensor& x) {
    return detail::unary_op(
        x, [](double v, std::size_t) { return 1.0 / std::sqrt(v); },
        [](double v, double y) { return -0.5 * y / v; });
}

inline Tensor reciprocal(const Tensor& x) {
    return detail::unary_op(
        x, [](double v, std::size_t) { return 1.0 / v; },
        [](double, double y) { return -y * y; });
}

inline Tensor relu(const Tensor& x) {
    return detail::unary_op(
        x, [](double v, std::size_t) { return v > 0.0 ? v : 0.0; },
        [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Tensor clamp(const Tensor& x, double lo, double hi) {
    return detail::unary_op(
        x, [lo, hi](double v, std::size_t) { return std::min(std::max(v, lo), hi); },
        [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

enum class Unary { exp, log, sigmoid, softplus, silu, negate, scale_by };

inline Tensor apply_elementwise(const Tensor& x, Unary fn, double c = 1.0) {
    switch (fn) {
        case Unary::exp: return exp(x);
        case Unary::log: return log(x);
        case Unary::sigmoid: return sigmoid(x);
        case Unary::softplus: return softplus(x);
        case Unary::silu: return silu(x);
        case Unary::negate: return neg(x);
        case Unary::scale_by: return scale(x, c);
    }
    throw contract_error("unknown elementwise function");
}

// ---------------------------------------------------------------------------
// Binary elementwise
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "add");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a.values()[i] + b.values()[i];
    bool rg = detail::track({&a, &b});
    Tensor y = detail::result(a.shape(), std::move(out), rg);
    if (rg) {
        auto an = a.node(), bn = b.node(), yn = y.node();
        Tape::current().record([an, bn, yn]() {
            if (an->requires_grad)
                for (std::size_t i = 0; i < an->value.size(); ++i) an->grad[i] += yn->grad[i];
            if (bn->requires_grad)
                for (std::size_t i = 0; i < bn->value.size(); ++i) bn->grad[i] += yn->grad[i];
        });
    }
    return y;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "sub");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a.values()[i] - b.values()[i];
    bool rg = detail::track({&a, &b});
    Tensor y = detail::result(a.shape(), std::move(out), rg);
    if (rg) {
        auto an = a.node(), bn = b.node(), yn = y.node();
        Tape::current().record([an, bn, yn]() {
            if (an->requires_grad)
                for (std::size_t i = 0; i < an->value.size(); ++i) an->grad[i] += yn->grad[i];
            if (bn->requires_grad)
                for (std::size_t i = 0; i < bn->value.size(); ++i) bn->grad[i] -= yn->grad[i];
        });
    }
    return y;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "mul");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a.values()[i] * b.values()[i];
    bool rg = detail::track({&a, &b});
    Tensor y = detail::result(a.shape(), std::move(out), rg);
    if (rg) {
        auto an = a.node(), bn = b.node(), yn = y.node();
        Tape::current().record([an, bn, yn]() {
            if (an->requires_grad)
                for (std::size_t i = 0; i < an->value.size(); ++i)
                    an->grad[i] += yn->grad[i] * bn->value[i];
            if (bn->requires_grad)
                for (std::size_t i = 0; i < bn->value.size(); ++i)
                    bn->grad[i] += yn->grad[i] * an->value[i];
        });
    }
    return y;
}

// ---------------------------------------------------------------------------
// Matrix operations
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw shape_error("matmul requires rank-2 tensors, got " + shape_str(a.shape()) + " and " +
                          shape_str(b.shape()));
    }
    if (a.extent(1) != b.extent(0)) {
        throw shape_error("matmul inner extent mismatch: " + shape_str(a.shape()) + " x " +
                          shape_str(b.shape()));
    }
    const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    std::vector<double> out(m * n, 0.0);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            double aip = av[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = bv.data() + p * n;
            double* orow = out.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    }
    bool rg = detail::track({&a, &b});
    Tensor y = detail::result({m, n}, std::move(out), rg);
    if (rg) {
        auto an = a.node(), bn = b.node(), yn = y.node();
        Tape::current().record([an, bn, yn, m, k, n]() {
            if (an->requires_grad) {
                // dA = dY * B^T
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < n; ++j)
                            s += yn->grad[i * n + j] * bn->value[p * n + j];
                        an->grad[i * k + p] += s;
                    }
            }
            if (bn->requires_grad) {
                // dB = A^T * dY
                for (std::size_t p = 0; p < k; ++p)
                    for (std::size_t j = 0; j < n; ++j) {
                        double s = 0.0;
                        for (std::size_t i = 0; i < m; ++i)
                            s += an->value[i * k + p] * yn->grad[i * n + j];
                        bn->grad[p * n + j] += s;
                    }
            }
        });
    }
    return y;
}

inline Tensor transpose(const Tensor& x) {
    if (x.rank() != 2) throw shape_error("transpose requires a rank-2 tensor");
    const std::size_t m = x.extent(0), n = x.extent(1);
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x.values()[i * n + j];
    bool rg = detail::track({&x});
    Tensor y = detail::result({n, m}, std::move(out), rg);
    if (rg) {
        auto xn = x.node(), yn = y.node();
        Tape::current().record([xn, yn, m, n]() {
            if (!xn->requires_grad) return;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) xn->grad[i * n + j] += yn->grad[j * m + i];
        });
    }
    return y;
}

inline Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_size(shape) != x.size()) {
        throw shape_error("cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
    }
    bool rg = detail::track({&x});
    Tensor y = detail::result(std::move(shape), x.values(), rg);
    if (rg) {
        auto xn = x.node(), yn = y.node();
        Tape::current().record([xn, yn]() {
            if (!xn->requires_grad) return;
            for (std::size_t i = 0; i < xn->value.size(); ++i) xn->grad[i] += yn->grad[i];
        });
    }
    return y;
}

// ---------------------------------------------------------------------------
// Reductions and broadcasts
// ---------------------------------------------------------------------------

inline Tensor sum_all(const Tensor& x) {
    double s = std::accumulate(x.values().begin(), x.values().end(), 0.0);
    bool rg = detail::track({&x});
    Tensor y = detail::result({1}, {s}, rg);
    if (rg) {
        auto xn = x.node(), yn = y.node();
        Tape::current().record([xn, yn]() {
            if (!xn->requires_grad) return;
            for (std::size_t i = 0; i < xn->value.size(); ++i) xn->grad[i] += yn->grad[0];
        });
    }
    return y;
}

inline Tensor mean_all(const Tensor& x) { return scale(sum_all(x), 1.0 / static_cast<double>(x.size())); }

/// Sum of a rank-2 tensor along an axis: axis 0 collapses rows (-> length-n
/// vector), axis 1 collapses columns (-> length-m vector).
inline Tensor sum_axis(const Tensor& x, std::size_t axis) {
    if (x.rank() != 2) throw shape_error("sum_axis requires a rank-2 tensor");
    if (axis > 1) throw shape_error("sum_axis: invalid axis " + std::to_string(axis) + " for rank-2");
    const std::size_t m = x.extent(0), n = x.extent(1);
    const std::size_t out_len = axis == 0 ? n : m;
    std::vector<double> out(out_len, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[axis == 0 ? j : i] += x.values()[i * n + j];
    bool rg = detail::track({&x});
    Tensor y = detail::result({out_len}, std::move(out), rg);
    if (rg) {
        auto xn = x.node(), yn = y.node();
        Tape::current().record([xn, yn, m, n, axis]() {
            if (!xn->requires_grad) return;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    xn->grad[i * n + j] += yn->grad[axis == 0 ? j : i];
        });
    }
    return y;
}

namespace detail {

inline void check_rowvec(const Tensor& m, const Tensor& v, const char* op) {
    if (m.rank() != 2 || v.rank() != 1 || v.extent(0) != m.extent(1)) {
        throw shape_error(std::string(op) + ": expected matrix and length-" +
                          std::to_string(m.rank() == 2 ? m.extent(1) : 0) + " vector, got " +
                          shape_str(m.shape()) + " and " + shape_str(v.shape()));
    }
}

inline void check_colvec(const Tensor& m, const Tensor& v, const char* op) {
    if (m.rank() != 2 || v.rank() != 1 || v.extent(0) != m.extent(0)) {
        throw shape_error(std::string(op) + ": expected matrix and length-" +
                          std::to_string(m.rank() == 2 ? m.extent(0) : 0) + " vector, got " +
                          shape_str(m.shape()) + " and " + shape_str(v.shape()));
    }
}

}  // namespace detail

/// m[i][j] + v[j]
inline Tensor add_rowvec(const Tensor& m, const Tensor& v) {
    detail::check_rowvec(m, v, "add_rowvec");
    const std::size_t r = m.extent(0), c = m.extent(1);
    std::vector<double> out(m.values());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] += v.values()[j];
    bool rg = detail::track({&m, &v});
    Tensor y = detail::result(m.shape(), std::move(out), rg);
    if (rg) {
        auto mn = m.node(), vn = v.node(), yn = y.node();
        Tape::current().record([mn, vn, yn, r, c]() {
            if (mn->requires_grad)
                for (std::size_t i = 0; i < r * c; ++i) mn->grad[i] += yn->grad[i];
            if (vn->requires_grad)
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) vn->grad[j] += yn->grad[i * c + j];
        });
    }
    return y;
}

/// m[i][j] * v[j]
inline Tensor mul_rowvec(const Tensor& m, const Tensor& v) {
    detail::check_rowvec(m, v, "mul_rowvec");
    const std::size_t r = m.extent(0), c = m.extent(1);
    std::vector<double> out(m.size());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = m.values()[i * c + j] * v.values()[j];
    bool rg = detail::track({&m, &v});
    Tensor y = detail::result(m.shape(), std::move(out), rg);
    if (rg) {
        auto mn = m.node(), vn = v.node(), yn = y.node();
        Tape::current().record([mn, vn, yn, r, c]() {
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) {
                    if (mn->requires_grad) mn->grad[i * c + j] += yn->grad[i * c + j] * vn->value[j];
                    if (vn->requires_grad) vn->grad[j] += yn->grad[i * c + j] * mn->value[i * c + j];
                }
        });
    }
    return y;
}

/// m[i][j] * v[i]
inline Tensor mul_colvec(const Tensor& m, const Tensor& v) {
    detail::check_colvec(m, v, "mul_colvec");
    const std::size_t r = m.extent(0), c = m.extent(1);
    std::vector<double> out(m.size());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = m.values()[i * c + j] * v.values()[i];
    bool rg = detail::track({&m, &v});
    Tensor y = detail::result(m.shape(), std::move(out), rg);
    if (rg) {
        auto mn = m.node(), vn = v.node(), yn = y.node();
        Tape::current().record([mn, vn, yn, r, c]() {
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) {
                    if (mn->requires_grad) mn->grad[i * c + j] += yn->grad[i * c + j] * vn->value[i];
                    if (vn->requires_grad) vn->grad[i] += yn->grad[i * c + j] * mn->value[i * c + j];
                }
        });
    }
    return y;
}

/// Repeats each entry of a length-H vector P times: out[h*P + p] = v[h].
inline Tensor expand_heads(const Tensor& v, std::size_t repeat) {
    if (v.rank() != 1) throw shape_error("expand_heads requires a rank-1 tensor");
    const std::size_t h = v.extent(0);
    std::vector<double> out(h * repeat);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t p = 0; p < repeat; ++p) out[i * repeat + p] = v.values()[i];
    bool rg = detail::track({&v});
    Tensor y = detail::result({h * repeat}, std::move(out), rg);
    if (rg) {
        auto vn = v.node(), yn = y.node();
        Tape::current().record([vn, yn, h, repeat]() {
            if (!vn->requires_grad) return;
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t p = 0; p < repeat; ++p) vn->grad[i] += yn->grad[i * repeat + p];
        });
    }
    return y;
}

// ---------------------------------------------------------------------------
// Structural operations
// ---------------------------------------------------------------------------

inline Tensor slice_rows(const Tensor& x, std::size_t r0, std::size_t r1) {
    if (x.rank() != 2) throw shape_error("slice_rows requires a rank-2 tensor");
    const std::size_t m = x.extent(0), n = x.extent(1);
    if (r0 >= r1 || r1 > m) {
        throw shape_error("slice_rows [" + std::to_string(r0) + ", " + std::to_string(r1) +
                          ") out of range for " + shape_str(x.shape()));
    }
    std::vector<double> out(x.values().begin() + static_cast<std::ptrdiff_t>(r0 * n),
                            x.values().begin() + static_cast<std::ptrdiff_t>(r1 * n));
    bool rg = detail::track({&x});
    Tensor y = detail::result({r1 - r0, n}, std::move(out), rg);
    if (rg) {
        auto xn = x.node(), yn = y.node();
        Tape::current().record([xn, yn, r0, n]() {
            if (!xn->requires_grad) return;
            for (std::size_t i = 0; i < yn->value.size(); ++i) xn->grad[r0 * n + i] += yn->grad[i];
        });
    }
    return y;
}

inline Tensor slice_cols(const Tensor& x, std::size_t c0, std::size_t c1) {
    if (x.rank() != 2) throw shape_error("slice_cols requires a rank-2 tensor");
    const std::size_t m = x.extent(0), n = x.extent(1);
    if (c0 >= c1 || c1 > n) {
        throw shape_error("slice_cols [" + std::to_string(c0) + ", " + std::to_string(c1) +
                          ") out of range for " + shape_str(x.shape()));
    }
    const std::size_t w = c1 - c0;
    std::vector<double> out(m * w);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) out[i * w + j] = x.values()[i * n + c0 + j];
    bool rg = detail::track({&x});
    Tensor y = detail::result({m, w}, std::move(out), rg);
    if (rg) {
        auto xn = x.node(), yn = y.node();
        Tape::current().record([xn, yn, m, n, c0, w]() {
            if (!xn->requires_grad) return;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < w; ++j) xn->grad[i * n + c0 + j] += yn->grad[i * w + j];
        });
    }
    return y;
}

inline Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw shape_error("concat_rows on empty list");
    const std::size_t n = parts.front().rank() == 2 ? parts.front().extent(1) : 0;
    std::size_t rows = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != 2 || p.extent(1) != n) {
            throw shape_error("concat_rows: incompatible part " + shape_str(p.shape()));
        }
        rows += p.extent(0);
    }
    std::vector<double> out;
    out.reserve(rows * n);
    bool rg = false;
    for (const Tensor& p : parts) {
        out.insert(out.end(), p.values().begin(), p.values().end());
        rg = rg || p.requires_grad();
    }
    rg = rg && Tape::recording();
    Tensor y = detail::result({rows, n}, std::move(out), rg);
    if (rg) {
        std::vector<std::shared_ptr<TensorNode>> nodes;
        nodes.reserve(parts.size());
        for (const Tensor& p : parts) nodes.push_back(p.node());
        auto yn = y.node();
        Tape::current().record([nodes, yn]() {
            std::size_t off = 0;
            for (const auto& pn : nodes) {
                if (pn->requires_grad)
                    for (std::size_t i = 0; i < pn->value.size(); ++i) pn->grad[i] += yn->grad[off + i];
                off += pn->value.size();
            }
        });
    }
    return y;
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw shape_error("concat_cols on empty list");
    const std::size_t m = parts.front().rank() == 2 ? parts.front().extent(0) : 0;
    std::size_t cols = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != 2 || p.extent(0) != m) {
            throw shape_error("concat_cols: incompatible part " + shape_str(p.shape()));
        }
        cols += p.extent(1);
    }
    std::vector<double> out(m * cols);
    bool rg = false;
    std::size_t off = 0;
    for (const Tensor& p : parts) {
        const std::size_t w = p.extent(1);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < w; ++j) out[i * cols + off + j] = p.values()[i * w + j];
        off += w;
        rg = rg || p.requires_grad();
    }
    rg = rg && Tape::recording();
    Tensor y = detail::result({m, cols}, std::move(out), rg);
    if (rg) {
        std::vector<std::shared_ptr<TensorNode>> nodes;
        nodes.reserve(parts.size());
        for (const Tensor& p : parts) nodes.push_back(p.node());
        auto yn = y.node();
        Tape::current().record([nodes, yn, m, cols]() {
            std::size_t off2 = 0;
            for (const auto& pn : nodes) {
                const std::size_t w = pn->shape[1];
                if (pn->requires_grad)
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < w; ++j)
                            pn->grad[i * w + j] += yn->grad[i * cols + off2 + j];
                off2 += w;
            }
        });
    }
    return y;
}

inline Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& idx) {
    if (x.rank() != 2) throw shape_error("gather_rows requires a rank-2 tensor");
    const std::size_t m = x.extent(0), n = x.extent(1);
    std::vector<double> out(idx.size() * n);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] >= m) throw shape_error("gather_rows: index " + std::to_string(idx[r]) + " out of range");
        std::copy_n(x.values().begin() + static_cast<std::ptrdiff_t>(idx[r] * n), n,
                    out.begin() + static_cast<std::ptrdiff_t>(r * n));
    }
    bool rg = detail::track({&x});
    Tensor y = detail::result({idx.size(), n}, std::move(out), rg);
    if (rg) {
        auto xn = x.node(), yn = y.node();
        Tape::current().record([xn, yn, idx, n]() {
            if (!xn->requires_grad) return;
            for (std::size_t r = 0; r < idx.size(); ++r)
                for (std::size_t j = 0; j < n; ++j) xn->grad[idx[r] * n + j] += yn->grad[r * n + j];
        });
    }
    return y;
}

// ---------------------------------------------------------------------------
// Sequence kernels
// ---------------------------------------------------------------------------

/// Inclusive prefix sums along an axis (rank-1: axis 0; rank-2: axis 0 or 1).
inline Tensor cumsum(const Tensor& x, std::size_t axis) {
    if (x.rank() == 0 || x.rank() > 2) throw shape_error("cumsum supports rank-1 and rank-2 tensors");
    if (axis >= x.rank()) {
        throw shape_error("cumsum: invalid axis " + std::to_string(axis) + " for shape " +
                          shape_str(x.shape()));
    }
    std::vector<double> out(x.values());
    if (x.rank() == 1) {
        for (std::size_t i = 1; i < out.size(); ++i) out[i] += out[i - 1];
    } else {
        const std::size_t m = x.extent(0), n = x.extent(1);
        if (axis == 0) {
            for (std::size_t i = 1; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) out[i * n + j] += out[(i - 1) * n + j];
        } else {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 1; j < n; ++j) out[i * n + j] += out[i * n + j - 1];
        }
    }
    bool rg = detail::track({&x});
    Tensor y = detail::result(x.shape(), std::move(out), rg);
    if (rg) {
        auto xn = x.node(), yn = y.node();
        auto shape = x.shape();
        Tape::current().record([xn, yn, shape, axis]() {
            if (!xn->requires_grad) return;
            // d(out[i])/d(x[k]) = 1 for k <= i: suffix-sum the incoming grads.
            if (shape.size() == 1) {
                double acc = 0.0;
                for (std::size_t i = shape[0]; i-- > 0;) {
                    acc += yn->grad[i];
                    xn->grad[i] += acc;
                }
            } else {
                const std::size_t m = shape[0], n = shape[1];
                if (axis == 0) {
                    for (std::size_t j = 0; j < n; ++j) {
                        double acc = 0.0;
                        for (std::size_t i = m; i-- > 0;) {
                            acc += yn->grad[i * n + j];
                            xn->grad[i * n + j] += acc;
                        }
                    }
                } else {
                    for (std::size_t i = 0; i < m; ++i) {
                        double acc = 0.0;
                        for (std::size_t j = n; j-- > 0;) {
                            acc += yn->grad[i * n + j];
                            xn->grad[i * n + j] += acc;
                        }
                    }
                }
            }
        });
    }
    return y;
}

/// Lower-triangular cumulative-decay matrix: out[i][j] = exp(sum_{k=j+1..i} a[k])
/// for i >= j (unit diagonal) and 0 above the diagonal. Exponents are clamped
/// at 80 before exponentiation; with non-positive decays the clamp is inert.
inline Tensor segsum_exp(const Tensor& a) {
    if (a.rank() != 1) throw shape_error("segsum_exp requires a rank-1 tensor");
    const std::size_t n = a.extent(0);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(a.values()[i])) {
            throw domain_error("segsum_exp: non-finite input at index " + std::to_string(i));
        }
    }
    // Segment sums are accumulated per column so that entries outside a
    // segment contribute no floating-point noise to it.
    std::vector<double> out(n * n, 0.0);
    std::vector<double> sums(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        out[j * n + j] = 1.0;
        double s = 0.0;
        for (std::size_t i = j + 1; i < n; ++i) {
            s += a.values()[i];
            sums[i * n + j] = s;
            out[i * n + j] = std::exp(std::min(s, 80.0));
        }
    }
    bool rg = detail::track({&a});
    Tensor y = detail::result({n, n}, std::move(out), rg);
    if (rg) {
        auto an = a.node(), yn = y.node();
        Tape::current().record([an, yn, n, sums = std::move(sums)]() {
            if (!an->requires_grad) return;
            // Entry (i, j) depends on a[k] for k in [j+1, i]; accumulate the
            // weighted range adds with a difference array.
            std::vector<double> diff(n + 1, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < i; ++j) {
                    if (sums[i * n + j] > 80.0) continue;  // clamped region is flat
                    double w = yn->grad[i * n + j] * yn->value[i * n + j];
                    if (w == 0.0) continue;
                    diff[j + 1] += w;
                    diff[i + 1] -= w;
                }
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                acc += diff[k];
                an->grad[k] += acc;
            }
        });
    }
    return y;
}

/// Row-stabilized softmax with optional 0/1 mask (same shape, non-grad).
/// Masked entries receive weight exactly 0. Rank-1 tensors use axis 0;
/// rank-2 tensors support axis 1 (per row) and axis 0 (per column).
inline Tensor softmax_masked(const Tensor& logits, std::size_t axis, const Tensor* mask = nullptr) {
    if (logits.rank() == 0 || logits.rank() > 2) {
        throw shape_error("softmax_masked supports rank-1 and rank-2 tensors");
    }
    if (axis >= logits.rank()) {
        throw shape_error("softmax_masked: invalid axis " + std::to_string(axis) + " for shape " +
                          shape_str(logits.shape()));
    }
    if (mask && mask->shape() != logits.shape()) {
        throw shape_error("softmax_masked: mask shape " + shape_str(mask->shape()) +
                          " does not match logits " + shape_str(logits.shape()));
    }
    const bool rank1 = logits.rank() == 1;
    const bool rowwise = rank1 || axis == 1;
    const std::size_t groups = rank1 ? 1 : (rowwise ? logits.extent(0) : logits.extent(1));
    const std::size_t width = rank1 ? logits.extent(0) : (rowwise ? logits.extent(1) : logits.extent(0));
    auto index = [rank1, rowwise, groups, width](std::size_t g, std::size_t w) {
        if (rank1) return w;
        return rowwise ? g * width + w : w * groups + g;
    };
    std::vector<double> out(logits.size(), 0.0);
    for (std::size_t g = 0; g < groups; ++g) {
        double mx = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (std::size_t w = 0; w < width; ++w) {
            std::size_t i = index(g, w);
            if (mask && mask->values()[i] == 0.0) continue;
            any = true;
            mx = std::max(mx, logits.values()[i]);
        }
        if (!any) {
            throw domain_error("softmax_masked: fully masked group " + std::to_string(g));
        }
        double denom = 0.0;
        for (std::size_t w = 0; w < width; ++w) {
            std::size_t i = index(g, w);
            if (mask && mask->values()[i] == 0.0) continue;
            out[i] = std::exp(logits.values()[i] - mx);
            denom += out[i];
        }
        for (std::size_t w = 0; w < width; ++w) {
            std::size_t i = index(g, w);
            out[i] /= denom;
        }
    }
    bool rg = detail::track({&logits});
    Tensor y = detail::result(logits.shape(), std::move(out), rg);
    if (rg) {
        auto xn = logits.node(), yn = y.node();
        Tape::current().record([xn, yn, groups, width, index]() {
            if (!xn->requires_grad) return;
            for (std::size_t g = 0; g < groups; ++g) {
                double dot = 0.0;
                for (std::size_t w = 0; w < width; ++w) {
                    std::size_t i = index(g, w);
                    dot += yn->grad[i] * yn->value[i];
                }
                for (std::size_t w = 0; w < width; ++w) {
                    std::size_t i = index(g, w);
                    xn->grad[i] += yn->value[i] * (yn->grad[i] - dot);
                }
            }
        });
    }
    return y;
}

/// Inverted dropout with a seeded mask; identity when probability is 0.
inline Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng) {
    if (p < 0.0 || p >= 1.0) throw contract_error("dropout probability must be in [0, 1)");
    if (p == 0.0) return x;
    std::bernoulli_distribution keep(1.0 - p);
    std::vector<double> mask(x.size());
    for (double& m : mask) m = keep(rng) ? 1.0 / (1.0 - p) : 0.0;
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x.values()[i] * mask[i];
    bool rg = detail::track({&x});
    Tensor y = detail::result(x.shape(), std::move(out), rg);
    if (rg) {
        auto xn = x.node(), yn = y.node();
        Tape::current().record([xn, yn, mask = std::move(mask)]() {
            if (!xn->requires_grad) return;
            for (std::size_t i = 0; i < xn->value.size(); ++i) xn->grad[i] += yn->grad[i] * mask[i];
        });
    }
    return y;
}

// ---------------------------------------------------------------------------
// Random initialization (leaves, never on tape)
// ---------------------------------------------------------------------------

inline Tensor randn(Shape shape, std::mt19937_64& rng, double stddev = 1.0, bool requires_grad = false) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> data(shape_size(shape));
    for (double& v : data) v = dist(rng);
    return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

inline Tensor rand_uniform(Shape shape, std::mt19937_64& rng, double lo, double hi,
                           bool requires_grad = false) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> data(shape_size(shape));
    for (double& v : data) v = dist(rng);
    return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

/// Compares the tape gradient of a scalar-valued function against central
/// finite differences. Returns the maximum relative error over entries with
/// denominator max(|analytic|, |numeric|, 1e-8).
inline double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x0,
                         double h = 1e-5) {
    Tensor x = Tensor::from_data(x0.shape(), x0.values(), true);
    std::vector<double> analytic;
    {
        Tape tape;
        Tensor loss = f(x);
        if (loss.size() != 1) throw contract_error("grad_check requires a scalar-valued function");
        tape.backward(loss);
        analytic = x.grad();
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < x0.size(); ++i) {
        std::vector<double> vp = x0.values(), vm = x0.values();
        vp[i] += h;
        vm[i] -= h;
        double fp = f(Tensor::from_data(x0.shape(), std::move(vp))).item();
        double fm = f(Tensor::from_data(x0.shape(), std::move(vm))).item();
        double numeric = (fp - fm) / (2.0 * h);
        if (!std::isfinite(numeric)) throw domain_error("grad_check: non-finite finite difference");
        double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

}  // namespace hydranet
