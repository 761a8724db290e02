#pragma once

#include <cmath>
#include <deque>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsdf/tensor.hpp"

namespace dsdf {

// Ordered registry of named trainable tensors; the unit of checkpointing
// and the optimizer's parameter list.
class ParamStore {
public:
    Tensor& add(const std::string& name, Tensor t) {
        if (index_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
        index_[name] = params_.size();
        names_.push_back(name);
        params_.push_back(std::move(t));
        return params_.back();
    }

    Tensor& get(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("no parameter: " + name);
        return params_[it->second];
    }
    const Tensor& get(const std::string& name) const {
        return params_[index_.at(name)];
    }
    bool has(const std::string& name) const { return index_.count(name) > 0; }

    size_t size() const { return params_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    Tensor& at(size_t i) { return params_[i]; }
    const Tensor& at(size_t i) const { return params_[i]; }

    void watch_all(GradientTape& tape) {
        for (auto& p : params_) tape.watch(p);
    }

private:
    std::map<std::string, size_t> index_;
    std::vector<std::string> names_;
    std::deque<Tensor> params_;
};

// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)); biases start at zero.
inline Tensor init_params(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
    double bound = std::sqrt(6.0 / (fan_in + fan_out));
    int64_t n = Tensor::numel_of(shape);
    std::vector<double> d(n);
    for (auto& v : d) v = rng.uniform(-bound, bound);
    return Tensor(std::move(shape), std::move(d));
}

struct LinearLayer {
    Tensor* weight = nullptr;  // [out, in]
    Tensor* bias = nullptr;    // [out]

    static LinearLayer create(ParamStore& store, const std::string& name, int in, int out,
                              Rng& rng) {
        LinearLayer l;
        l.weight = &store.add(name + ".w", init_params({out, in}, in, out, rng));
        l.bias = &store.add(name + ".b", Tensor::zeros({out}));
        return l;
    }

    int in_dim() const { return weight->dim(1); }
    int out_dim() const { return weight->dim(0); }
};

// x [.., in] -> x W^T + b [.., out]
inline Tensor linear_forward(const LinearLayer& layer, const Tensor& x) {
    if (x.dim(x.rank() - 1) != layer.in_dim())
        throw std::invalid_argument("linear_forward: input dim mismatch");
    std::vector<int> flat{static_cast<int>(x.numel() / layer.in_dim()), layer.in_dim()};
    Tensor h = matmul(x.reshaped(flat), transpose2d(*layer.weight));
    h = add(h, *layer.bias);
    std::vector<int> out_shape = x.shape();
    out_shape.back() = layer.out_dim();
    return h.reshaped(out_shape);
}

// Normalize over the last axis (mean 0, var 1, eps 1e-5), then affine.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift,
                         double eps = 1e-5) {
    int d = x.dim(x.rank() - 1);
    if (d < 2) throw std::invalid_argument("layer_norm: axis length must be >= 2");
    std::vector<int> rows_shape = x.shape();
    rows_shape.back() = 1;
    Tensor mu = mean(x, x.rank() - 1).reshaped(rows_shape);
    Tensor centered = sub(x, mu);
    Tensor var = mean(mul(centered, centered), x.rank() - 1).reshaped(rows_shape);
    Tensor norm = div(centered, sqrt(add_scalar(var, eps)));
    return add(mul(norm, gain), shift);
}

struct LayerNormParams {
    Tensor* gain = nullptr;
    Tensor* shift = nullptr;

    static LayerNormParams create(ParamStore& store, const std::string& name, int dim) {
        LayerNormParams p;
        p.gain = &store.add(name + ".g", Tensor::full({dim}, 1.0));
        p.shift = &store.add(name + ".s", Tensor::zeros({dim}));
        return p;
    }

    Tensor operator()(const Tensor& x) const { return layer_norm(x, *gain, *shift); }
};

// Scaled dot-product attention. Q from q_input, K/V from kv_input; a single
// head unless heads > 1, in which case model_dim must split evenly.
struct AttentionBlock {
    LinearLayer wq, wk, wv, wo;
    int heads = 1;

    static AttentionBlock create(ParamStore& store, const std::string& name, int model_dim,
                                 int kv_dim, Rng& rng, int heads = 1) {
        if (model_dim % heads != 0)
            throw std::invalid_argument("AttentionBlock: heads must divide model_dim");
        AttentionBlock b;
        b.wq = LinearLayer::create(store, name + ".q", model_dim, model_dim, rng);
        b.wk = LinearLayer::create(store, name + ".k", kv_dim, model_dim, rng);
        b.wv = LinearLayer::create(store, name + ".v", kv_dim, model_dim, rng);
        b.wo = LinearLayer::create(store, name + ".o", model_dim, model_dim, rng);
        b.heads = heads;
        return b;
    }
};

// q_input [nq, dm], kv_input [nk, dkv] -> [nq, dm]. Residual added by caller.
inline Tensor attention(const Tensor& q_input, const Tensor& kv_input,
                        const AttentionBlock& block) {
    if (q_input.rank() != 2 || kv_input.rank() != 2)
        throw std::invalid_argument("attention: expected [tokens, dim] inputs");
    Tensor q = linear_forward(block.wq, q_input);
    Tensor k = linear_forward(block.wk, kv_input);
    Tensor v = linear_forward(block.wv, kv_input);
    int dm = q.dim(1);
    int dk = dm / block.heads;
    int nq = q.dim(0), nk = k.dim(0);
    double scale = 1.0 / std::sqrt(static_cast<double>(dk));

    (void)nq;
    (void)nk;
    Tensor out;
    if (block.heads == 1) {
        Tensor scores = mul_scalar(matmul(q, transpose2d(k)), scale);
        out = matmul(softmax(scores, 1), v);
    } else {
        for (int h = 0; h < block.heads; ++h) {
            Tensor qh = slice_cols(q, h * dk, (h + 1) * dk);
            Tensor kh = slice_cols(k, h * dk, (h + 1) * dk);
            Tensor vh = slice_cols(v, h * dk, (h + 1) * dk);
            Tensor scores = mul_scalar(matmul(qh, transpose2d(kh)), scale);
            Tensor oh = matmul(softmax(scores, 1), vh);
            out = (h == 0) ? oh : concat_last(out, oh);
        }
    }
    return linear_forward(block.wo, out);
}

// Sinusoidal positional embedding: pair i carries sin/cos of t * 10000^(-2i/dim).
inline Tensor timestep_embedding(int t, int dim) {
    if (dim % 2 != 0) throw std::invalid_argument("timestep_embedding: dim must be even");
    std::vector<double> d(dim);
    for (int i = 0; i < dim / 2; ++i) {
        double freq = std::pow(10000.0, -2.0 * i / dim);
        d[2 * i] = std::sin(t * freq);
        d[2 * i + 1] = std::cos(t * freq);
    }
    return Tensor({dim}, std::move(d));
}

// Adam with bias correction; aborts the step on non-finite gradients.
class Optimizer {
public:
    explicit Optimizer(double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999,
                       double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<ParamStore*>& stores, GradientTape& tape) {
        size_t total = 0;
        for (auto* s : stores) total += s->size();
        if (m_.empty()) {
            m_.resize(total);
            v_.resize(total);
            size_t k = 0;
            for (auto* s : stores)
                for (size_t i = 0; i < s->size(); ++i, ++k) {
                    m_[k].assign(s->at(i).numel(), 0.0);
                    v_[k].assign(s->at(i).numel(), 0.0);
                }
        }
        if (m_.size() != total) throw std::logic_error("adam_step: parameter set changed");
        for (auto* s : stores)
            for (size_t i = 0; i < s->size(); ++i)
                for (double g : tape.grad(s->at(i)))
                    if (!std::isfinite(g))
                        throw std::runtime_error("adam_step: non-finite gradient in " +
                                                 s->names()[i]);
        ++step_;
        double bc1 = 1.0 - std::pow(beta1_, step_);
        double bc2 = 1.0 - std::pow(beta2_, step_);
        size_t k = 0;
        for (auto* s : stores)
            for (size_t i = 0; i < s->size(); ++i, ++k) {
                auto& p = s->at(i).mutable_data();
                const auto& g = tape.grad(s->at(i));
                auto& m = m_[k];
                auto& v = v_[k];
                for (size_t j = 0; j < p.size(); ++j) {
                    m[j] = beta1_ * m[j] + (1 - beta1_) * g[j];
                    v[j] = beta2_ * v[j] + (1 - beta2_) * g[j] * g[j];
                    p[j] -= lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_);
                }
            }
    }

    void step(ParamStore& params, GradientTape& tape) { step({&params}, tape); }

    int64_t step_count() const { return step_; }
    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

private:
    double lr_, beta1_, beta2_, eps_;
    int64_t step_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace dsdf
