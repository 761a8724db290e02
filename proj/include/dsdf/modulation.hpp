#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsdf/geometry.hpp"
#include "dsdf/nn.hpp"
#include "dsdf/tensor.hpp"

namespace dsdf {

struct ModulationConfig {
    int feature_dim = 128;  // F: shape feature (pi) width
    int latent_dim = 64;    // D: latent z width
    int point_hidden = 128; // per-point MLP width in the encoder
    int vae_hidden = 128;
    int sdf_hidden = 128;
    int sdf_layers = 8;     // hidden layers in the SDF decoder
};

// Stage-one model: point-cloud encoder, VAE bottleneck, conditional SDF
// decoder. All parameters live in `params` under stable names.
class ModulationModel {
public:
    ModulationModel(const ModulationConfig& cfg, Rng& rng) : cfg_(cfg) {
        enc1_ = LinearLayer::create(params, "enc.l1", 3, cfg.point_hidden, rng);
        enc2_ = LinearLayer::create(params, "enc.l2", cfg.point_hidden, cfg.point_hidden, rng);
        enc3_ = LinearLayer::create(params, "enc.l3", cfg.point_hidden, cfg.feature_dim, rng);

        int vh = cfg.vae_hidden;
        vae_enc_ = {LinearLayer::create(params, "vae.enc.l1", cfg.feature_dim, vh, rng),
                    LinearLayer::create(params, "vae.enc.l2", vh, vh, rng),
                    LinearLayer::create(params, "vae.enc.l3", vh, vh, rng),
                    LinearLayer::create(params, "vae.enc.l4", vh, vh, rng),
                    LinearLayer::create(params, "vae.enc.l5", vh, 2 * cfg.latent_dim, rng)};
        // start the logvar head at the prior variance so early samples are not
        // swamped by unit-scale reparameterization noise
        for (int i = 0; i < cfg.latent_dim; ++i)
            vae_enc_.back().bias->mutable_data()[cfg.latent_dim + i] = 2.0 * std::log(0.25);
        vae_dec_ = {LinearLayer::create(params, "vae.dec.l1", cfg.latent_dim, vh, rng),
                    LinearLayer::create(params, "vae.dec.l2", vh, vh, rng),
                    LinearLayer::create(params, "vae.dec.l3", vh, vh, rng),
                    LinearLayer::create(params, "vae.dec.l4", vh, vh, rng),
                    LinearLayer::create(params, "vae.dec.l5", vh, cfg.feature_dim, rng)};

        sdf_in_ = LinearLayer::create(params, "sdf.in", 3 + cfg.feature_dim, cfg.sdf_hidden, rng);
        for (int i = 1; i < cfg.sdf_layers; ++i)
            sdf_hidden_.push_back(LinearLayer::create(params, "sdf.h" + std::to_string(i),
                                                      cfg.sdf_hidden, cfg.sdf_hidden, rng));
        sdf_out_ = LinearLayer::create(params, "sdf.out", cfg.sdf_hidden, 1, rng);
    }

    ModulationModel(const ModulationModel&) = delete;
    ModulationModel& operator=(const ModulationModel&) = delete;

    const ModulationConfig& config() const { return cfg_; }

    // pi = Psi(P): per-point MLP, max pool over points. Permutation invariant.
    Tensor encode(const PointCloud& cloud) const {
        if (cloud.points.empty()) throw std::invalid_argument("encode: empty cloud");
        return encode(points_tensor(cloud));
    }

    Tensor encode(const Tensor& pts) const {
        Tensor h = gelu(linear_forward(enc1_, pts));
        h = gelu(linear_forward(enc2_, h));
        h = linear_forward(enc3_, h);
        return max(h, 0);  // [F]
    }

    struct Posterior {
        Tensor mu, logvar, z;
    };

    // z = Theta_enc(pi): reparameterized sample unless rng is null, in which
    // case the posterior mean is returned (deterministic mode).
    Posterior vae_encode(const Tensor& pi, Rng* rng) const {
        Tensor h = pi;
        for (size_t i = 0; i + 1 < vae_enc_.size(); ++i)
            h = gelu(linear_forward(vae_enc_[i], h));
        h = linear_forward(vae_enc_.back(), h);
        int d = cfg_.latent_dim;
        Tensor h2 = h.reshaped({2, d});
        Tensor mu = slice_rows(h2, 0, 1).reshaped({d});
        Tensor logvar = slice_rows(h2, 1, 2).reshaped({d});
        Posterior p;
        p.mu = mu;
        p.logvar = logvar;
        if (rng) {
            Tensor eps = Tensor::randn({d}, *rng);
            p.z = add(mu, mul(exp(mul_scalar(logvar, 0.5)), eps));
        } else {
            p.z = mu;
        }
        return p;
    }

    // pi' = Theta_dec(z); accepts VAE-produced and diffusion-generated latents.
    Tensor vae_decode(const Tensor& z) const {
        Tensor h = z;
        for (size_t i = 0; i + 1 < vae_dec_.size(); ++i)
            h = gelu(linear_forward(vae_dec_[i], h));
        return linear_forward(vae_dec_.back(), h);
    }

    // s = Phi(x|z) for a batch of queries [n,3] -> [n].
    Tensor sdf_decode(const Tensor& queries, const Tensor& z) const {
        return sdf_decode_feature(queries, vae_decode(z));
    }

    Tensor sdf_decode_feature(const Tensor& queries, const Tensor& feature) const {
        int n = queries.dim(0);
        // broadcast the feature to every query row
        Tensor feat_rows = mul(feature, Tensor::full({n, 1}, 1.0));
        Tensor h = concat_last(queries, feat_rows);
        h = gelu(linear_forward(sdf_in_, h));
        for (const auto& layer : sdf_hidden_) h = gelu(linear_forward(layer, h));
        return linear_forward(sdf_out_, h).reshaped({n});
    }

    std::vector<double> sdf_values(const std::vector<Vec3>& queries,
                                   const std::vector<double>& z_data) const {
        Tensor z({cfg_.latent_dim}, z_data);
        Tensor feature = vae_decode(z);
        std::vector<double> out;
        out.reserve(queries.size());
        const int chunk = 8192;
        for (size_t start = 0; start < queries.size(); start += chunk) {
            size_t end = std::min(queries.size(), start + chunk);
            std::vector<double> q;
            q.reserve((end - start) * 3);
            for (size_t i = start; i < end; ++i)
                q.insert(q.end(), queries[i].begin(), queries[i].end());
            Tensor qt({static_cast<int>(end - start), 3}, std::move(q));
            Tensor s = sdf_decode_feature(qt, feature);
            out.insert(out.end(), s.data().begin(), s.data().end());
        }
        return out;
    }

    static Tensor points_tensor(const PointCloud& cloud) {
        std::vector<double> d;
        d.reserve(cloud.points.size() * 3);
        for (const auto& p : cloud.points) d.insert(d.end(), p.begin(), p.end());
        return Tensor({static_cast<int>(cloud.points.size()), 3}, std::move(d));
    }

    ParamStore params;

private:
    ModulationConfig cfg_;
    LinearLayer enc1_, enc2_, enc3_;
    std::vector<LinearLayer> vae_enc_, vae_dec_;
    LinearLayer sdf_in_, sdf_out_;
    std::vector<LinearLayer> sdf_hidden_;
};

// KL(q || N(0, prior_std^2 I)) for a diagonal Gaussian posterior.
inline Tensor kl_to_prior(const Tensor& mu, const Tensor& logvar, double prior_std = 0.25) {
    if (mu.shape() != logvar.shape()) throw std::invalid_argument("kl_to_prior: shape mismatch");
    // sum_i [ log(s/sigma_i) + (sigma_i^2 + mu_i^2)/(2 s^2) - 1/2 ]
    double s2 = prior_std * prior_std;
    Tensor var = exp(logvar);
    Tensor term = add(mul_scalar(sub(Tensor::scalar(2.0 * std::log(prior_std)), logvar), 0.5),
                      mul_scalar(add(var, mul(mu, mu)), 1.0 / (2.0 * s2)));
    return sum(add_scalar(term, -0.5));
}

struct ModulationLossParts {
    Tensor total, l1, kl;
};

// Joint loss: mean L1 on predicted signed distances + beta * KL.
// No VAE reconstruction term.
inline ModulationLossParts modulation_loss(const ModulationModel& model, const PointCloud& cloud,
                                           const Tensor& queries, const Tensor& gt_sdf,
                                           double beta, Rng* rng, double prior_std = 0.25) {
    if (queries.dim(0) != gt_sdf.dim(0))
        throw std::invalid_argument("modulation_loss: unpaired queries/gt");
    Tensor pi = model.encode(cloud);
    auto post = model.vae_encode(pi, rng);
    Tensor pred = model.sdf_decode(queries, post.z);
    ModulationLossParts parts;
    parts.l1 = mean(abs(sub(pred, gt_sdf)));
    parts.kl = kl_to_prior(post.mu, post.logvar, prior_std);
    parts.total = add(parts.l1, mul_scalar(parts.kl, beta));
    return parts;
}

// Evaluate Phi(.|z) on the lattice and run marching cubes.
inline Mesh reconstruct_mesh(const ModulationModel& model, const std::vector<double>& z,
                             int resolution) {
    GridField field;
    field.resolution = resolution;
    std::vector<Vec3> pts;
    pts.reserve(static_cast<size_t>(resolution) * resolution * resolution);
    double h = 2.0 / (resolution - 1);
    for (int iz = 0; iz < resolution; ++iz)
        for (int iy = 0; iy < resolution; ++iy)
            for (int ix = 0; ix < resolution; ++ix)
                pts.push_back({-1.0 + ix * h, -1.0 + iy * h, -1.0 + iz * h});
    field.values = model.sdf_values(pts, z);
    return marching_cubes(field);
}

}  // namespace dsdf
