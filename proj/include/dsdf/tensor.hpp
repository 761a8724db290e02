#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsdf/rng.hpp"

namespace dsdf {

class GradientTape;

// Dense row-major f64 tensor. Values are immutable once they enter a tape;
// the optional node id links the value into the active GradientTape.
class Tensor {
public:
    Tensor() : data_(std::make_shared<std::vector<double>>()) {}

    Tensor(std::vector<int> shape, std::vector<double> data)
        : shape_(std::move(shape)),
          data_(std::make_shared<std::vector<double>>(std::move(data))) {
        if (numel_of(shape_) != static_cast<int64_t>(data_->size()))
            throw std::invalid_argument("Tensor: shape/data size mismatch");
    }

    static Tensor zeros(std::vector<int> shape) {
        int64_t n = numel_of(shape);
        return Tensor(std::move(shape), std::vector<double>(n, 0.0));
    }

    static Tensor full(std::vector<int> shape, double v) {
        int64_t n = numel_of(shape);
        return Tensor(std::move(shape), std::vector<double>(n, v));
    }

    static Tensor scalar(double v) { return Tensor({}, {v}); }

    static Tensor randn(std::vector<int> shape, Rng& rng, double std = 1.0) {
        int64_t n = numel_of(shape);
        std::vector<double> d(n);
        for (auto& x : d) x = rng.normal(0.0, std);
        return Tensor(std::move(shape), std::move(d));
    }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int64_t numel() const { return numel_of(shape_); }
    int dim(int i) const { return shape_[i]; }

    const std::vector<double>& data() const { return *data_; }
    std::vector<double>& mutable_data() { return *data_; }
    double item() const {
        if (numel() != 1) throw std::invalid_argument("item(): tensor not scalar");
        return (*data_)[0];
    }
    double at(int64_t i) const { return (*data_)[i]; }

    bool finite() const {
        for (double v : *data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    int node() const { return node_; }
    void set_node(int n) { node_ = n; }

    Tensor reshaped(std::vector<int> shape) const;

    static int64_t numel_of(const std::vector<int>& shape) {
        int64_t n = 1;
        for (int d : shape) n *= d;
        return n;
    }

private:
    std::vector<int> shape_;
    std::shared_ptr<std::vector<double>> data_;
    int node_ = -1;
};

// Reverse-mode tape: ordered op records with local-gradient closures.
// Confined to one logical thread; inputs of every node precede it.
class GradientTape {
public:
    using BackFn = std::function<void(const std::vector<double>& upstream)>;

    int watch(Tensor& t) {
        int id = new_node(t.numel());
        t.set_node(id);
        return id;
    }

    std::vector<double>& grad_buffer(int node) { return grads_[node]; }

    const std::vector<double>& grad(const Tensor& t) const {
        if (t.node() < 0) throw std::invalid_argument("grad: tensor not on tape");
        return grads_[t.node()];
    }

    Tensor grad_tensor(const Tensor& t) const {
        return Tensor(t.shape(), grad(t));
    }

    void backward(const Tensor& loss) {
        if (loss.numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
        if (loss.node() < 0) throw std::invalid_argument("backward: loss not on tape");
        grads_[loss.node()][0] = 1.0;
        for (int i = static_cast<int>(backs_.size()) - 1; i >= 0; --i) {
            int node = i + n_leaves_;
            backs_[i](grads_[node]);
        }
        consumed_ = true;
    }

    bool consumed() const { return consumed_; }
    size_t size() const { return backs_.size(); }

private:
    int new_node(int64_t numel) {
        if (!backs_.empty()) throw std::logic_error("watch() after first recorded op");
        grads_.emplace_back(numel, 0.0);
        ++n_leaves_;
        return static_cast<int>(grads_.size()) - 1;
    }

    friend class TapeScope;
    friend Tensor tape_output(GradientTape*, Tensor, GradientTape::BackFn);

    int record_op(int64_t out_numel, BackFn fn) {
        grads_.emplace_back(out_numel, 0.0);
        backs_.push_back(std::move(fn));
        return static_cast<int>(grads_.size()) - 1;
    }

    std::vector<std::vector<double>> grads_;
    std::vector<BackFn> backs_;
    int n_leaves_ = 0;
    bool consumed_ = false;
};

namespace detail {

inline GradientTape*& active_tape() {
    thread_local GradientTape* t = nullptr;
    return t;
}

}  // namespace detail

// RAII activation of a tape for define-by-run recording.
class TapeScope {
public:
    explicit TapeScope(GradientTape& tape) : prev_(detail::active_tape()) {
        detail::active_tape() = &tape;
    }
    ~TapeScope() { detail::active_tape() = prev_; }
    TapeScope(const TapeScope&) = delete;

private:
    GradientTape* prev_;
};

inline Tensor tape_output(GradientTape* tape, Tensor out, GradientTape::BackFn fn) {
    if (tape) out.set_node(tape->record_op(out.numel(), std::move(fn)));
    return out;
}

inline Tensor Tensor::reshaped(std::vector<int> shape) const {
    if (numel_of(shape) != numel())
        throw std::invalid_argument("reshape: element count mismatch");
    Tensor out(std::move(shape), *data_);
    GradientTape* tape = detail::active_tape();
    if (tape && node_ >= 0) {
        int in_node = node_;
        return tape_output(tape, std::move(out), [tape, in_node](const std::vector<double>& g) {
            auto& gin = tape->grad_buffer(in_node);
            for (size_t i = 0; i < g.size(); ++i) gin[i] += g[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Broadcasting (trailing-dimension alignment, size-1 expansion)

namespace detail {

inline std::vector<int> broadcast_shape(const std::vector<int>& a, const std::vector<int>& b) {
    size_t r = std::max(a.size(), b.size());
    std::vector<int> out(r);
    for (size_t i = 0; i < r; ++i) {
        int da = i < a.size() ? a[a.size() - 1 - i] : 1;
        int db = i < b.size() ? b[b.size() - 1 - i] : 1;
        if (da != db && da != 1 && db != 1)
            throw std::invalid_argument("broadcast: incompatible shapes");
        out[r - 1 - i] = std::max(da, db);
    }
    return out;
}

// Strides of `shape` expanded against broadcast result `out` (0 on broadcast dims).
inline std::vector<int64_t> broadcast_strides(const std::vector<int>& shape,
                                              const std::vector<int>& out) {
    std::vector<int64_t> strides(out.size(), 0);
    int64_t s = 1;
    for (size_t i = 0; i < shape.size(); ++i) {
        size_t src = shape.size() - 1 - i;
        size_t dst = out.size() - 1 - i;
        strides[dst] = (shape[src] == 1 && out[dst] != 1) ? 0 : s;
        s *= shape[src];
    }
    return strides;
}

// Flat index in a broadcast operand for flat index `idx` of the output.
struct BroadcastIndexer {
    std::vector<int> out_shape;
    std::vector<int64_t> strides;
    int64_t operator()(int64_t idx) const {
        int64_t off = 0;
        for (int i = static_cast<int>(out_shape.size()) - 1; i >= 0; --i) {
            int64_t coord = idx % out_shape[i];
            idx /= out_shape[i];
            off += coord * strides[i];
        }
        return off;
    }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops

enum class EwOp { add, sub, mul, div, neg, exp, log, sqrt, relu, gelu, tanh };

namespace detail {

inline double gelu_fwd(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }
inline double gelu_grad(double x) {
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * M_PI);
    return 0.5 * (1.0 + std::erf(x * inv_sqrt2)) + x * inv_sqrt2pi * std::exp(-0.5 * x * x);
}

inline Tensor binary_ew(EwOp op, const Tensor& a, const Tensor& b) {
    auto out_shape = broadcast_shape(a.shape(), b.shape());
    int64_t n = Tensor::numel_of(out_shape);
    BroadcastIndexer ia{out_shape, broadcast_strides(a.shape(), out_shape)};
    BroadcastIndexer ib{out_shape, broadcast_strides(b.shape(), out_shape)};
    bool a_direct = a.shape() == out_shape;
    bool b_direct = b.shape() == out_shape;
    std::vector<double> d(n);
    const auto& av = a.data();
    const auto& bv = b.data();
    for (int64_t i = 0; i < n; ++i) {
        double x = av[a_direct ? i : ia(i)];
        double y = bv[b_direct ? i : ib(i)];
        switch (op) {
            case EwOp::add: d[i] = x + y; break;
            case EwOp::sub: d[i] = x - y; break;
            case EwOp::mul: d[i] = x * y; break;
            case EwOp::div:
                if (y == 0.0) throw std::domain_error("div: division by zero");
                d[i] = x / y;
                break;
            default: throw std::logic_error("binary_ew: bad op");
        }
    }
    Tensor out(out_shape, std::move(d));

    GradientTape* tape = active_tape();
    if (!tape || (a.node() < 0 && b.node() < 0)) return out;
    int an = a.node(), bn = b.node();
    std::vector<double> a_saved = (op == EwOp::div) ? a.data() : std::vector<double>{};
    std::vector<double> b_saved =
        (op == EwOp::mul || op == EwOp::div) ? b.data() : std::vector<double>{};
    std::vector<double> av_copy = (op == EwOp::mul) ? a.data() : std::vector<double>{};
    return tape_output(tape, std::move(out),
        [tape, op, an, bn, ia, ib, a_direct, b_direct, n,
         a_saved = std::move(a_saved), b_saved = std::move(b_saved),
         av_copy = std::move(av_copy)](const std::vector<double>& g) {
            for (int64_t i = 0; i < n; ++i) {
                double ga = 0, gb = 0;
                switch (op) {
                    case EwOp::add: ga = g[i]; gb = g[i]; break;
                    case EwOp::sub: ga = g[i]; gb = -g[i]; break;
                    case EwOp::mul: {
                        double x = av_copy[a_direct ? i : ia(i)];
                        double y = b_saved[b_direct ? i : ib(i)];
                        ga = g[i] * y;
                        gb = g[i] * x;
                        break;
                    }
                    case EwOp::div: {
                        double x = a_saved[a_direct ? i : ia(i)];
                        double y = b_saved[b_direct ? i : ib(i)];
                        ga = g[i] / y;
                        gb = -g[i] * x / (y * y);
                        break;
                    }
                    default: break;
                }
                if (an >= 0) tape->grad_buffer(an)[a_direct ? i : ia(i)] += ga;
                if (bn >= 0) tape->grad_buffer(bn)[b_direct ? i : ib(i)] += gb;
            }
        });
}

inline Tensor unary_ew(EwOp op, const Tensor& a) {
    int64_t n = a.numel();
    std::vector<double> d(n);
    const auto& av = a.data();
    for (int64_t i = 0; i < n; ++i) {
        double x = av[i];
        switch (op) {
            case EwOp::neg: d[i] = -x; break;
            case EwOp::exp: d[i] = std::exp(x); break;
            case EwOp::log:
                if (x <= 0.0) throw std::domain_error("log: non-positive input");
                d[i] = std::log(x);
                break;
            case EwOp::sqrt:
                if (x < 0.0) throw std::domain_error("sqrt: negative input");
                d[i] = std::sqrt(x);
                break;
            case EwOp::relu: d[i] = x > 0.0 ? x : 0.0; break;
            case EwOp::gelu: d[i] = gelu_fwd(x); break;
            case EwOp::tanh: d[i] = std::tanh(x); break;
            default: throw std::logic_error("unary_ew: bad op");
        }
    }
    Tensor out(a.shape(), std::move(d));
    GradientTape* tape = active_tape();
    if (!tape || a.node() < 0) return out;
    int an = a.node();
    std::vector<double> x_saved = a.data();
    std::vector<double> y_saved = out.data();
    return tape_output(tape, std::move(out),
        [tape, op, an, n, x_saved = std::move(x_saved),
         y_saved = std::move(y_saved)](const std::vector<double>& g) {
            auto& ga = tape->grad_buffer(an);
            for (int64_t i = 0; i < n; ++i) {
                double x = x_saved[i], y = y_saved[i], d = 0;
                switch (op) {
                    case EwOp::neg: d = -1.0; break;
                    case EwOp::exp: d = y; break;
                    case EwOp::log: d = 1.0 / x; break;
                    case EwOp::sqrt: d = 0.5 / y; break;
                    case EwOp::relu: d = x > 0.0 ? 1.0 : 0.0; break;
                    case EwOp::gelu: d = gelu_grad(x); break;
                    case EwOp::tanh: d = 1.0 - y * y; break;
                    default: break;
                }
                ga[i] += g[i] * d;
            }
        });
}

}  // namespace detail

inline Tensor elementwise(EwOp op, const Tensor& a) { return detail::unary_ew(op, a); }
inline Tensor elementwise(EwOp op, const Tensor& a, const Tensor& b) {
    return detail::binary_ew(op, a, b);
}

inline Tensor add(const Tensor& a, const Tensor& b) { return detail::binary_ew(EwOp::add, a, b); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return detail::binary_ew(EwOp::sub, a, b); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return detail::binary_ew(EwOp::mul, a, b); }
inline Tensor div(const Tensor& a, const Tensor& b) { return detail::binary_ew(EwOp::div, a, b); }
inline Tensor neg(const Tensor& a) { return detail::unary_ew(EwOp::neg, a); }
inline Tensor exp(const Tensor& a) { return detail::unary_ew(EwOp::exp, a); }
inline Tensor log(const Tensor& a) { return detail::unary_ew(EwOp::log, a); }
inline Tensor sqrt(const Tensor& a) { return detail::unary_ew(EwOp::sqrt, a); }
inline Tensor relu(const Tensor& a) { return detail::unary_ew(EwOp::relu, a); }
inline Tensor gelu(const Tensor& a) { return detail::unary_ew(EwOp::gelu, a); }
inline Tensor tanh(const Tensor& a) { return detail::unary_ew(EwOp::tanh, a); }

inline Tensor mul_scalar(const Tensor& a, double s) { return mul(a, Tensor::scalar(s)); }
inline Tensor add_scalar(const Tensor& a, double s) { return add(a, Tensor::scalar(s)); }

// Absolute value via relu(x) + relu(-x); subgradient 0 at the kink.
inline Tensor abs(const Tensor& a) { return add(relu(a), relu(neg(a))); }

// ---------------------------------------------------------------------------
// Matmul (2D, plus matching leading batch dims)

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() < 2 || b.rank() < 2)
        throw std::invalid_argument("matmul: rank must be >= 2");
    int m = a.dim(a.rank() - 2), k = a.dim(a.rank() - 1);
    int k2 = b.dim(b.rank() - 2), nn = b.dim(b.rank() - 1);
    if (k != k2) throw std::invalid_argument("matmul: inner-dimension mismatch");
    std::vector<int> a_batch(a.shape().begin(), a.shape().end() - 2);
    std::vector<int> b_batch(b.shape().begin(), b.shape().end() - 2);
    if (!a_batch.empty() && !b_batch.empty() && a_batch != b_batch)
        throw std::invalid_argument("matmul: batch dims must match");
    std::vector<int> batch = a_batch.empty() ? b_batch : a_batch;
    int64_t nb = Tensor::numel_of(batch);
    int64_t a_step = a_batch.empty() ? 0 : static_cast<int64_t>(m) * k;
    int64_t b_step = b_batch.empty() ? 0 : static_cast<int64_t>(k) * nn;

    std::vector<int> out_shape = batch;
    out_shape.push_back(m);
    out_shape.push_back(nn);
    std::vector<double> out(nb * m * nn, 0.0);
    const auto& av = a.data();
    const auto& bv = b.data();
    for (int64_t bi = 0; bi < nb; ++bi) {
        const double* A = av.data() + bi * a_step;
        const double* B = bv.data() + bi * b_step;
        double* C = out.data() + bi * static_cast<int64_t>(m) * nn;
        for (int i = 0; i < m; ++i)
            for (int p = 0; p < k; ++p) {
                double aip = A[static_cast<int64_t>(i) * k + p];
                const double* Bp = B + static_cast<int64_t>(p) * nn;
                double* Ci = C + static_cast<int64_t>(i) * nn;
                for (int j = 0; j < nn; ++j) Ci[j] += aip * Bp[j];
            }
    }
    Tensor result(out_shape, std::move(out));

    GradientTape* tape = detail::active_tape();
    if (!tape || (a.node() < 0 && b.node() < 0)) return result;
    int an = a.node(), bn = b.node();
    std::vector<double> a_saved = a.data();
    std::vector<double> b_saved = b.data();
    return tape_output(tape, std::move(result),
        [tape, an, bn, m, k, nn, nb, a_step, b_step,
         a_saved = std::move(a_saved), b_saved = std::move(b_saved)](const std::vector<double>& g) {
            for (int64_t bi = 0; bi < nb; ++bi) {
                const double* A = a_saved.data() + bi * a_step;
                const double* B = b_saved.data() + bi * b_step;
                const double* G = g.data() + bi * static_cast<int64_t>(m) * nn;
                if (an >= 0) {
                    double* dA = tape->grad_buffer(an).data() + bi * a_step;
                    // dA = G * B^T
                    for (int i = 0; i < m; ++i)
                        for (int j = 0; j < nn; ++j) {
                            double gij = G[static_cast<int64_t>(i) * nn + j];
                            const double* Bj = B;
                            for (int p = 0; p < k; ++p)
                                dA[static_cast<int64_t>(i) * k + p] +=
                                    gij * Bj[static_cast<int64_t>(p) * nn + j];
                        }
                }
                if (bn >= 0) {
                    double* dB = tape->grad_buffer(bn).data() + bi * b_step;
                    // dB = A^T * G
                    for (int i = 0; i < m; ++i)
                        for (int p = 0; p < k; ++p) {
                            double aip = A[static_cast<int64_t>(i) * k + p];
                            const double* Gi = G + static_cast<int64_t>(i) * nn;
                            double* dBp = dB + static_cast<int64_t>(p) * nn;
                            for (int j = 0; j < nn; ++j) dBp[j] += aip * Gi[j];
                        }
                }
            }
        });
}

inline Tensor transpose2d(const Tensor& a) {
    if (a.rank() != 2) throw std::invalid_argument("transpose2d: rank must be 2");
    int m = a.dim(0), n = a.dim(1);
    std::vector<double> d(static_cast<int64_t>(m) * n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) d[static_cast<int64_t>(j) * m + i] = a.at(static_cast<int64_t>(i) * n + j);
    Tensor out({n, m}, std::move(d));
    GradientTape* tape = detail::active_tape();
    if (!tape || a.node() < 0) return out;
    int an = a.node();
    return tape_output(tape, std::move(out), [tape, an, m, n](const std::vector<double>& g) {
        auto& ga = tape->grad_buffer(an);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                ga[static_cast<int64_t>(i) * n + j] += g[static_cast<int64_t>(j) * m + i];
    });
}

// ---------------------------------------------------------------------------
// Reductions

enum class ReduceOp { sum, mean, max };

namespace detail {

// axis < 0 means reduce all.
inline Tensor reduce_impl(ReduceOp op, const Tensor& a, int axis) {
    const auto& av = a.data();
    if (axis < 0) {
        double r;
        int64_t arg = 0;
        if (op == ReduceOp::max) {
            r = av[0];
            for (int64_t i = 1; i < a.numel(); ++i)
                if (av[i] > r) { r = av[i]; arg = i; }
        } else {
            r = std::accumulate(av.begin(), av.end(), 0.0);
            if (op == ReduceOp::mean) r /= static_cast<double>(a.numel());
        }
        Tensor out = Tensor::scalar(r);
        GradientTape* tape = active_tape();
        if (!tape || a.node() < 0) return out;
        int an = a.node();
        int64_t n = a.numel();
        return tape_output(tape, std::move(out),
            [tape, op, an, n, arg](const std::vector<double>& g) {
                auto& ga = tape->grad_buffer(an);
                if (op == ReduceOp::max) {
                    ga[arg] += g[0];
                } else {
                    double c = op == ReduceOp::mean ? g[0] / n : g[0];
                    for (int64_t i = 0; i < n; ++i) ga[i] += c;
                }
            });
    }

    if (axis >= a.rank()) throw std::invalid_argument("reduce: invalid axis");
    int64_t outer = 1, inner = 1;
    int len = a.dim(axis);
    for (int i = 0; i < axis; ++i) outer *= a.dim(i);
    for (int i = axis + 1; i < a.rank(); ++i) inner *= a.dim(i);
    std::vector<int> out_shape;
    for (int i = 0; i < a.rank(); ++i)
        if (i != axis) out_shape.push_back(a.dim(i));
    std::vector<double> d(outer * inner);
    std::vector<int64_t> argmax(op == ReduceOp::max ? outer * inner : 0);
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t in = 0; in < inner; ++in) {
            int64_t base = o * len * inner + in;
            if (op == ReduceOp::max) {
                double best = av[base];
                int64_t barg = 0;
                for (int j = 1; j < len; ++j) {
                    double v = av[base + static_cast<int64_t>(j) * inner];
                    if (v > best) { best = v; barg = j; }  // ties -> lowest index
                }
                d[o * inner + in] = best;
                argmax[o * inner + in] = barg;
            } else {
                double s = 0;
                for (int j = 0; j < len; ++j) s += av[base + static_cast<int64_t>(j) * inner];
                d[o * inner + in] = op == ReduceOp::mean ? s / len : s;
            }
        }
    Tensor out(out_shape, std::move(d));
    GradientTape* tape = active_tape();
    if (!tape || a.node() < 0) return out;
    int an = a.node();
    return tape_output(tape, std::move(out),
        [tape, op, an, outer, inner, len, argmax = std::move(argmax)](const std::vector<double>& g) {
            auto& ga = tape->grad_buffer(an);
            for (int64_t o = 0; o < outer; ++o)
                for (int64_t in = 0; in < inner; ++in) {
                    int64_t base = o * len * inner + in;
                    double gv = g[o * inner + in];
                    if (op == ReduceOp::max) {
                        ga[base + argmax[o * inner + in] * inner] += gv;
                    } else {
                        double c = op == ReduceOp::mean ? gv / len : gv;
                        for (int j = 0; j < len; ++j) ga[base + static_cast<int64_t>(j) * inner] += c;
                    }
                }
        });
}

}  // namespace detail

inline Tensor reduce(ReduceOp op, const Tensor& a, int axis = -1) {
    return detail::reduce_impl(op, a, axis);
}
inline Tensor sum(const Tensor& a, int axis = -1) { return reduce(ReduceOp::sum, a, axis); }
inline Tensor mean(const Tensor& a, int axis = -1) { return reduce(ReduceOp::mean, a, axis); }
inline Tensor max(const Tensor& a, int axis = -1) { return reduce(ReduceOp::max, a, axis); }

// ---------------------------------------------------------------------------
// Softmax along an axis, max-stabilized, fused gradient.

inline Tensor softmax(const Tensor& a, int axis) {
    if (!a.finite()) throw std::domain_error("softmax: non-finite input");
    if (axis < 0) axis += a.rank();
    if (axis < 0 || axis >= a.rank()) throw std::invalid_argument("softmax: invalid axis");
    int64_t outer = 1, inner = 1;
    int len = a.dim(axis);
    for (int i = 0; i < axis; ++i) outer *= a.dim(i);
    for (int i = axis + 1; i < a.rank(); ++i) inner *= a.dim(i);
    const auto& av = a.data();
    std::vector<double> d(a.numel());
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t in = 0; in < inner; ++in) {
            int64_t base = o * len * inner + in;
            double mx = av[base];
            for (int j = 1; j < len; ++j)
                mx = std::max(mx, av[base + static_cast<int64_t>(j) * inner]);
            double z = 0;
            for (int j = 0; j < len; ++j) {
                double e = std::exp(av[base + static_cast<int64_t>(j) * inner] - mx);
                d[base + static_cast<int64_t>(j) * inner] = e;
                z += e;
            }
            for (int j = 0; j < len; ++j) d[base + static_cast<int64_t>(j) * inner] /= z;
        }
    Tensor out(a.shape(), std::move(d));
    GradientTape* tape = detail::active_tape();
    if (!tape || a.node() < 0) return out;
    int an = a.node();
    std::vector<double> s_saved = out.data();
    return tape_output(tape, std::move(out),
        [tape, an, outer, inner, len, s_saved = std::move(s_saved)](const std::vector<double>& g) {
            auto& ga = tape->grad_buffer(an);
            for (int64_t o = 0; o < outer; ++o)
                for (int64_t in = 0; in < inner; ++in) {
                    int64_t base = o * len * inner + in;
                    double dot = 0;
                    for (int j = 0; j < len; ++j) {
                        int64_t ix = base + static_cast<int64_t>(j) * inner;
                        dot += g[ix] * s_saved[ix];
                    }
                    for (int j = 0; j < len; ++j) {
                        int64_t ix = base + static_cast<int64_t>(j) * inner;
                        ga[ix] += s_saved[ix] * (g[ix] - dot);
                    }
                }
        });
}

// ---------------------------------------------------------------------------
// Concatenation along the last axis (rank-matched inputs).

inline Tensor concat_last(const Tensor& a, const Tensor& b) {
    if (a.rank() != b.rank() || a.rank() < 1)
        throw std::invalid_argument("concat_last: rank mismatch");
    for (int i = 0; i + 1 < a.rank(); ++i)
        if (a.dim(i) != b.dim(i)) throw std::invalid_argument("concat_last: leading dims differ");
    int ca = a.dim(a.rank() - 1), cb = b.dim(b.rank() - 1);
    int64_t rows = a.numel() / ca;
    std::vector<int> out_shape = a.shape();
    out_shape.back() = ca + cb;
    std::vector<double> d(rows * (ca + cb));
    for (int64_t r = 0; r < rows; ++r) {
        std::copy_n(a.data().data() + r * ca, ca, d.data() + r * (ca + cb));
        std::copy_n(b.data().data() + r * cb, cb, d.data() + r * (ca + cb) + ca);
    }
    Tensor out(out_shape, std::move(d));
    GradientTape* tape = detail::active_tape();
    if (!tape || (a.node() < 0 && b.node() < 0)) return out;
    int an = a.node(), bn = b.node();
    return tape_output(tape, std::move(out),
        [tape, an, bn, rows, ca, cb](const std::vector<double>& g) {
            for (int64_t r = 0; r < rows; ++r) {
                if (an >= 0) {
                    auto& ga = tape->grad_buffer(an);
                    for (int j = 0; j < ca; ++j) ga[r * ca + j] += g[r * (ca + cb) + j];
                }
                if (bn >= 0) {
                    auto& gb = tape->grad_buffer(bn);
                    for (int j = 0; j < cb; ++j) gb[r * cb + j] += g[r * (ca + cb) + ca + j];
                }
            }
        });
}

// Columns [c0, c1) of a 2D tensor.
inline Tensor slice_cols(const Tensor& a, int c0, int c1) {
    if (a.rank() != 2) throw std::invalid_argument("slice_cols: rank must be 2");
    int rows = a.dim(0), cols = a.dim(1);
    int w = c1 - c0;
    std::vector<double> d(static_cast<int64_t>(rows) * w);
    for (int r = 0; r < rows; ++r)
        for (int j = 0; j < w; ++j)
            d[static_cast<int64_t>(r) * w + j] = a.at(static_cast<int64_t>(r) * cols + c0 + j);
    Tensor out({rows, w}, std::move(d));
    GradientTape* tape = detail::active_tape();
    if (!tape || a.node() < 0) return out;
    int an = a.node();
    return tape_output(tape, std::move(out), [tape, an, rows, cols, c0, w](const std::vector<double>& g) {
        auto& ga = tape->grad_buffer(an);
        for (int r = 0; r < rows; ++r)
            for (int j = 0; j < w; ++j)
                ga[static_cast<int64_t>(r) * cols + c0 + j] += g[static_cast<int64_t>(r) * w + j];
    });
}

// Rows [r0, r1) of a 2D tensor.
inline Tensor slice_rows(const Tensor& a, int r0, int r1) {
    if (a.rank() != 2) throw std::invalid_argument("slice_rows: rank must be 2");
    int cols = a.dim(1);
    std::vector<double> d(a.data().begin() + static_cast<int64_t>(r0) * cols,
                          a.data().begin() + static_cast<int64_t>(r1) * cols);
    Tensor out({r1 - r0, cols}, std::move(d));
    GradientTape* tape = detail::active_tape();
    if (!tape || a.node() < 0) return out;
    int an = a.node();
    return tape_output(tape, std::move(out), [tape, an, r0, r1, cols](const std::vector<double>& g) {
        auto& ga = tape->grad_buffer(an);
        for (int64_t i = 0; i < static_cast<int64_t>(r1 - r0) * cols; ++i)
            ga[static_cast<int64_t>(r0) * cols + i] += g[i];
    });
}

// ---------------------------------------------------------------------------
// Finite-difference oracle: max over coordinates of relative error between
// analytic gradient and central differences of f.

inline double finite_diff_check(const std::function<double(const Tensor&)>& f_value,
                                const std::function<Tensor(const Tensor&)>& f_grad,
                                const Tensor& x, double eps = 1e-5) {
    Tensor g = f_grad(x);
    double worst = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i) {
        std::vector<double> dp = x.data(), dm = x.data();
        dp[i] += eps;
        dm[i] -= eps;
        double fp = f_value(Tensor(x.shape(), dp));
        double fm = f_value(Tensor(x.shape(), dm));
        double fd = (fp - fm) / (2 * eps);
        double err = std::fabs(g.at(i) - fd) / (std::fabs(g.at(i)) + 1e-8);
        worst = std::max(worst, err);
    }
    return worst;
}

// Convenience form: f builds a scalar loss from a watched copy of x on a fresh tape.
inline double finite_diff_check(const std::function<Tensor(Tensor&, GradientTape&)>& f,
                                const Tensor& x, double eps = 1e-5) {
    auto value = [&f](const Tensor& p) {
        Tensor q = p;
        GradientTape tape;
        tape.watch(q);
        TapeScope scope(tape);
        return f(q, tape).item();
    };
    auto grad = [&f](const Tensor& p) {
        Tensor q = p;
        GradientTape tape;
        tape.watch(q);
        Tensor loss;
        {
            TapeScope scope(tape);
            loss = f(q, tape);
        }
        tape.backward(loss);
        return tape.grad_tensor(q);
    };
    return finite_diff_check(value, grad, x, eps);
}

}  // namespace dsdf
