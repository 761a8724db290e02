#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsdf/geometry.hpp"
#include "dsdf/nn.hpp"
#include "dsdf/tensor.hpp"

namespace dsdf {

// Precomputed linear-beta schedule with all derived arrays; indices are
// 1-based in t, with alpha_bar[0] defined as 1.
struct DiffusionSchedule {
    int T = 0;
    std::vector<double> beta;        // beta[t], t=1..T (beta[0] unused)
    std::vector<double> alpha;       // 1 - beta
    std::vector<double> alpha_bar;   // prod alpha, alpha_bar[0] = 1
    std::vector<double> posterior_var;  // beta_tilde
    std::vector<double> sigma;       // sqrt(beta_tilde)
};

inline DiffusionSchedule make_schedule(int T = 500, double beta1 = 1e-4, double betaT = 0.02) {
    if (T < 2) throw std::invalid_argument("make_schedule: T >= 2");
    if (!(0 < beta1 && beta1 < betaT && betaT < 1))
        throw std::invalid_argument("make_schedule: need 0 < beta_1 < beta_T < 1");
    DiffusionSchedule s;
    s.T = T;
    s.beta.assign(T + 1, 0.0);
    s.alpha.assign(T + 1, 1.0);
    s.alpha_bar.assign(T + 1, 1.0);
    s.posterior_var.assign(T + 1, 0.0);
    s.sigma.assign(T + 1, 0.0);
    for (int t = 1; t <= T; ++t) {
        s.beta[t] = beta1 + (betaT - beta1) * (t - 1) / (T - 1);
        s.alpha[t] = 1.0 - s.beta[t];
        s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
        s.posterior_var[t] = (1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]) * s.beta[t];
        s.sigma[t] = std::sqrt(s.posterior_var[t]);
    }
    return s;
}

// Closed-form forward step: sqrt(abar_t) z0 + sqrt(1 - abar_t) eps.
inline std::vector<double> q_sample(const std::vector<double>& z0, int t,
                                    const std::vector<double>& eps,
                                    const DiffusionSchedule& s) {
    if (t < 1 || t > s.T) throw std::invalid_argument("q_sample: t out of range");
    if (eps.size() != z0.size()) throw std::invalid_argument("q_sample: eps dim mismatch");
    double a = std::sqrt(s.alpha_bar[t]);
    double b = std::sqrt(1.0 - s.alpha_bar[t]);
    std::vector<double> out(z0.size());
    for (size_t i = 0; i < z0.size(); ++i) out[i] = a * z0[i] + b * eps[i];
    return out;
}

inline Tensor q_sample(const Tensor& z0, int t, const Tensor& eps, const DiffusionSchedule& s) {
    if (t < 1 || t > s.T) throw std::invalid_argument("q_sample: t out of range");
    double a = std::sqrt(s.alpha_bar[t]);
    double b = std::sqrt(1.0 - s.alpha_bar[t]);
    return add(mul_scalar(z0, a), mul_scalar(eps, b));
}

// The all-zeros condition feature used for classifier-free dropout; also the
// unconditional path at sampling time.
inline Tensor zero_mask(int dim) { return Tensor::zeros({dim}); }

// Returns the zero-mask with probability p, else the input condition.
inline Tensor condition_dropout(const Tensor& condition, double p, Rng& rng) {
    if (p < 0 || p > 1) throw std::invalid_argument("condition_dropout: p in [0,1]");
    if (rng.uniform() < p) return zero_mask(condition.dim(condition.rank() - 1));
    return condition;
}

struct DenoiserConfig {
    int latent_dim = 64;     // D
    int model_dim = 128;     // width of the block stream
    int time_dim = 32;       // sinusoidal embedding width
    int condition_dim = 128; // feature width of the condition encoder output
    int blocks = 6;
    int ff_hidden = 256;
};

// x0-predicting denoiser: input projection of concat(z_t, gamma(t)), six
// pre-norm blocks of self-attention + cross-attention over the condition +
// feed-forward, output projection back to D.
class DenoiserModel {
public:
    DenoiserModel(const DenoiserConfig& cfg, Rng& rng) : cfg_(cfg) {
        in_ = LinearLayer::create(params, "den.in", cfg.latent_dim + cfg.time_dim, cfg.model_dim,
                                  rng);
        for (int b = 0; b < cfg.blocks; ++b) {
            std::string p = "den.b" + std::to_string(b);
            Block blk;
            blk.norm1 = LayerNormParams::create(params, p + ".n1", cfg.model_dim);
            blk.self_attn = AttentionBlock::create(params, p + ".sa", cfg.model_dim,
                                                   cfg.model_dim, rng);
            blk.norm2 = LayerNormParams::create(params, p + ".n2", cfg.model_dim);
            blk.cross_attn = AttentionBlock::create(params, p + ".ca", cfg.model_dim,
                                                    cfg.condition_dim, rng);
            blk.norm3 = LayerNormParams::create(params, p + ".n3", cfg.model_dim);
            blk.ff1 = LinearLayer::create(params, p + ".ff1", cfg.model_dim, cfg.ff_hidden, rng);
            blk.ff2 = LinearLayer::create(params, p + ".ff2", cfg.ff_hidden, cfg.model_dim, rng);
            blocks_.push_back(blk);
        }
        out_ = LinearLayer::create(params, "den.out", cfg.model_dim, cfg.latent_dim, rng);
    }

    DenoiserModel(const DenoiserModel&) = delete;
    DenoiserModel& operator=(const DenoiserModel&) = delete;

    const DenoiserConfig& config() const { return cfg_; }

    // z_t [D] (or [n,D] batch of tokens), t, condition feature [Fc] -> zhat0.
    // The zero-mask condition is the unconditional path by construction.
    Tensor denoise(const Tensor& z_t, int t, const Tensor& condition) const {
        bool vec = z_t.rank() == 1;
        Tensor z = vec ? z_t.reshaped({1, cfg_.latent_dim}) : z_t;
        if (z.dim(z.rank() - 1) != cfg_.latent_dim)
            throw std::invalid_argument("denoise: latent dim mismatch");
        int n = z.dim(0);
        Tensor gamma = timestep_embedding(t, cfg_.time_dim);
        Tensor gamma_rows = mul(gamma, Tensor::full({n, 1}, 1.0));
        Tensor h = linear_forward(in_, concat_last(z, gamma_rows));
        Tensor cond = condition.rank() == 1
                          ? condition.reshaped({1, cfg_.condition_dim})
                          : condition;
        for (const auto& blk : blocks_) {
            Tensor n1 = blk.norm1(h);
            h = add(h, attention(n1, n1, blk.self_attn));
            h = add(h, attention(blk.norm2(h), cond, blk.cross_attn));
            Tensor ff = linear_forward(blk.ff2, gelu(linear_forward(blk.ff1, blk.norm3(h))));
            h = add(h, ff);
        }
        Tensor out = linear_forward(out_, h);
        return vec ? out.reshaped({cfg_.latent_dim}) : out;
    }

    Tensor denoise(const Tensor& z_t, int t) const {
        return denoise(z_t, t, zero_mask(cfg_.condition_dim));
    }

    ParamStore params;

private:
    struct Block {
        LayerNormParams norm1, norm2, norm3;
        AttentionBlock self_attn, cross_attn;
        LinearLayer ff1, ff2;
    };

    DenoiserConfig cfg_;
    LinearLayer in_, out_;
    std::vector<Block> blocks_;
};

// MSE between the predicted clean latent and z0.
inline Tensor diffusion_loss(const DenoiserModel& model, const Tensor& z0, int t,
                             const Tensor& eps, const DiffusionSchedule& schedule,
                             const Tensor& condition) {
    Tensor z_t = q_sample(z0, t, eps, schedule);
    Tensor pred = model.denoise(z_t, t, condition);
    Tensor diff = sub(pred, z0);
    return mean(mul(diff, diff));
}

inline Tensor diffusion_loss(const DenoiserModel& model, const Tensor& z0, int t,
                             const Tensor& eps, const DiffusionSchedule& schedule) {
    return diffusion_loss(model, z0, t, eps, schedule, zero_mask(model.config().condition_dim));
}

// Posterior mean mu_tilde(z_t, zhat0) + sigma_t * noise; the final step (t=1)
// returns the mean with no injected noise.
inline std::vector<double> posterior_step(const std::vector<double>& zhat0,
                                          const std::vector<double>& z_t, int t,
                                          const DiffusionSchedule& s, Rng& rng) {
    if (t < 1 || t > s.T) throw std::invalid_argument("posterior_step: t out of range");
    double c_t = std::sqrt(s.alpha[t]) * (1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]);
    double c_0 = std::sqrt(s.alpha_bar[t - 1]) * s.beta[t] / (1.0 - s.alpha_bar[t]);
    std::vector<double> out(z_t.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = c_t * z_t[i] + c_0 * zhat0[i];
    if (t > 1)
        for (auto& v : out) v += s.sigma[t] * rng.normal();
    return out;
}

// Classifier-free combination (omega+1) zc - omega zu; omega = 0 reduces to
// the conditional prediction exactly (bitwise).
inline std::vector<double> guided_combine(const std::vector<double>& cond,
                                          const std::vector<double>& uncond, double omega) {
    if (omega == 0.0) return cond;
    std::vector<double> out(cond.size());
    for (size_t i = 0; i < cond.size(); ++i)
        out[i] = (omega + 1.0) * cond[i] - omega * uncond[i];
    return out;
}

struct SampleOptions {
    double omega = 0.0;
    bool force_guidance_path = false;  // evaluate the unconditional branch even at omega = 0
};

// Ancestral sampling: z_T ~ N(0,I); per step predict zhat0 (guided when
// omega > 0), form the posterior mean, inject noise until the last step.
inline std::vector<double> sample_latent(const DenoiserModel& model,
                                         const DiffusionSchedule& schedule,
                                         const Tensor& condition, Rng& rng,
                                         const SampleOptions& opt = {}) {
    int d = model.config().latent_dim;
    std::vector<double> z(d);
    for (auto& v : z) v = rng.normal();
    Tensor zeros = zero_mask(model.config().condition_dim);
    for (int t = schedule.T; t >= 1; --t) {
        Tensor z_t({d}, z);
        std::vector<double> zhat0 = model.denoise(z_t, t, condition).data();
        if (opt.omega != 0.0 || opt.force_guidance_path) {
            std::vector<double> zhat0_u = model.denoise(z_t, t, zeros).data();
            zhat0 = guided_combine(zhat0, zhat0_u, opt.omega);
        }
        z = posterior_step(zhat0, z, t, schedule, rng);
    }
    return z;
}

inline std::vector<double> sample_latent(const DenoiserModel& model,
                                         const DiffusionSchedule& schedule, Rng& rng) {
    return sample_latent(model, schedule, zero_mask(model.config().condition_dim), rng);
}

// Point-cloud condition encoder Upsilon: per-point MLP + max pool, same
// family as the modulation encoder but trained with the diffusion phase.
class ConditionEncoder {
public:
    ConditionEncoder(int hidden, int out_dim, Rng& rng) {
        l1_ = LinearLayer::create(params, "cond.l1", 3, hidden, rng);
        l2_ = LinearLayer::create(params, "cond.l2", hidden, hidden, rng);
        l3_ = LinearLayer::create(params, "cond.l3", hidden, out_dim, rng);
    }

    ConditionEncoder(const ConditionEncoder&) = delete;
    ConditionEncoder& operator=(const ConditionEncoder&) = delete;

    Tensor encode(const Tensor& pts) const {
        Tensor h = gelu(linear_forward(l1_, pts));
        h = gelu(linear_forward(l2_, h));
        return max(linear_forward(l3_, h), 0);
    }

    Tensor encode(const PointCloud& cloud) const {
        std::vector<double> d;
        d.reserve(cloud.points.size() * 3);
        for (const auto& p : cloud.points) d.insert(d.end(), p.begin(), p.end());
        return encode(Tensor({static_cast<int>(cloud.points.size()), 3}, std::move(d)));
    }

    ParamStore params;

private:
    LinearLayer l1_, l2_, l3_;
};

}  // namespace dsdf
