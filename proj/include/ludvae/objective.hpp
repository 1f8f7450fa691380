#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "ludvae/model.hpp"
#include "ludvae/rng.hpp"
#include "ludvae/tensor.hpp"

namespace ludvae {

/// Loss components of one forward pass (or a batch average of them).
/// Invariant: total = 0.5*recon_clean + 0.5*recon_noisy
///                  + anneal_weight * sum(kl_zn_per_layer).
/// The content-path KL is the constant c of the delta/uniform latent choice;
/// it never affects gradients and is recorded as 0 by convention.
struct LossBreakdown {
  double recon_clean = 0.0;
  double recon_noisy = 0.0;
  std::vector<double> kl_zn_per_layer;
  double anneal_weight = 0.0;
  double total = 0.0;
  double content_kl_constant = 0.0;

  double kl_total() const {
    return std::accumulate(kl_zn_per_layer.begin(), kl_zn_per_layer.end(), 0.0);
  }
};

struct ObjectiveOptions {
  double sigma_x = 15.0;  // pre-processor noise on the clean domain, [0,255] units
  double sigma_y = 10.0;  // on the corrupted domain
  // The generative model lives in 8-bit pixel units while tensors hold [0,1]
  // values; scaling the KL by 1/255^2 makes the [0,1] objective identical to
  // the 8-bit one (reconstruction terms are reported unscaled).
  double kl_scale = 1.0 / (255.0 * 255.0);
  bool preprocess_degradation_input = false;
  long anneal_warmup = 10000;
};

/// Linear KL warm-up: min(1, iteration / warmup).
inline double anneal_weight(long iteration, long warmup = 10000) {
  if (iteration < 0) throw std::invalid_argument("anneal_weight: iteration must be >= 0");
  if (warmup <= 0) throw std::invalid_argument("anneal_weight: warmup must be > 0");
  if (iteration >= warmup) return 1.0;
  return static_cast<double>(iteration) / static_cast<double>(warmup);
}

/// Closed-form KL(N(mu_q, diag e^{2ls_q}) || N(mu_p, diag e^{2ls_p})),
/// summed over all elements.
template <typename Scalar>
double kl_gaussian_diag(const Tensor<Scalar>& mu_q, const Tensor<Scalar>& ls_q,
                        const Tensor<Scalar>& mu_p, const Tensor<Scalar>& ls_p) {
  if (!mu_q.same_shape(ls_q) || !mu_q.same_shape(mu_p) || !mu_q.same_shape(ls_p))
    throw DimensionError("kl_gaussian_diag: shape mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < mu_q.size(); ++i) {
    const double mq = mu_q[i], sq = ls_q[i], mp = mu_p[i], sp = ls_p[i];
    if (!std::isfinite(mq) || !std::isfinite(sq) || !std::isfinite(mp) || !std::isfinite(sp))
      throw NumericError("kl_gaussian_diag: non-finite input");
    const double var_ratio = std::exp(2.0 * (sq - sp));
    const double mean_term = (mq - mp) * (mq - mp) * std::exp(-2.0 * sp);
    kl += sp - sq + 0.5 * (var_ratio + mean_term) - 0.5;
  }
  if (!std::isfinite(kl)) throw NumericError("kl_gaussian_diag: non-finite result");
  return kl;
}

/// d/d(out) of ||out - target||^2.
template <typename Scalar>
Tensor<Scalar> recon_grad(const Tensor<Scalar>& out, const Tensor<Scalar>& target) {
  if (!out.same_shape(target)) throw DimensionError("recon_grad: shape mismatch");
  Tensor<Scalar> g(out.channels(), out.height(), out.width());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = Scalar(2) * (out[i] - target[i]);
  return g;
}

template <typename Scalar>
Tensor<Scalar> apply_h(const Tensor<Scalar>& img, double sigma_255, Rng& rng) {
  Tensor<Scalar> out = img;
  const double s = sigma_255 / 255.0;
  if (s > 0.0)
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] += static_cast<Scalar>(rng.normal(0.0, s));
  return out;
}

namespace detail {

template <typename Scalar>
double sum_sq_diff(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (!a.same_shape(b)) throw DimensionError("reconstruction: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

}  // namespace detail

/// Clean-branch fragment: reconstruction of the ORIGINAL x from the content
/// code of h(x). When `grad` is given, accumulates d(weight * 0.5 * recon)
/// into it.
template <typename Scalar>
LossBreakdown elbo_clean(const Tensor<Scalar>& x, const LudVae<Scalar>& model, Rng& rng,
                         const ObjectiveOptions& opts, Scalar* grad = nullptr,
                         double weight = 1.0) {
  typename LudVae<Scalar>::ContentCache cache;
  Tensor<Scalar> hx = apply_h(x, opts.sigma_x, rng);
  model.encode_content_cached(hx, cache);
  typename LudVae<Scalar>::DecoderCache dec;
  Tensor<Scalar> out = model.decode_cached(cache.latent, nullptr, dec);
  LossBreakdown frag;
  frag.recon_clean = detail::sum_sq_diff(out, x);
  if (grad) {
    Tensor<Scalar> dout = recon_grad(out, x);
    dout.scale(static_cast<Scalar>(0.5 * weight));
    Tensor<Scalar> dzn = model.decode_backward(dec, dout, grad);
    std::vector<Tensor<Scalar>> dz(model.config().num_layers);
    dz.back() = std::move(dzn);
    model.encode_content_backward(cache, dz, grad);
  }
  return frag;
}

/// Noisy-branch fragment: reconstruction of the ORIGINAL y plus the
/// hierarchical z_n KL terms (one reparametrized draw). `kl_weight` is the
/// coefficient in front of the KL inside the scalar being differentiated
/// (anneal * weight); the recorded kl_zn_per_layer are unweighted but
/// kl_scale-adjusted.
template <typename Scalar>
LossBreakdown elbo_noisy(const Tensor<Scalar>& y, const LudVae<Scalar>& model, Rng& rng,
                         const ObjectiveOptions& opts, Scalar* grad = nullptr,
                         double weight = 1.0, double kl_weight = 0.0) {
  const int n = model.config().num_layers;
  typename LudVae<Scalar>::ContentCache ccache;
  typename LudVae<Scalar>::DegradationCache dcache;
  Tensor<Scalar> hy = apply_h(y, opts.sigma_y, rng);
  model.encode_content_cached(hy, ccache);
  const Tensor<Scalar>& degr_in = opts.preprocess_degradation_input ? hy : y;
  model.encode_degradation_cached(degr_in, rng, dcache);
  typename LudVae<Scalar>::DecoderCache dec;
  Tensor<Scalar> out = model.decode_cached(ccache.latent, &dcache.latent, dec);

  LossBreakdown frag;
  frag.recon_noisy = detail::sum_sq_diff(out, y);
  frag.kl_zn_per_layer.resize(n);
  const auto& lat = dcache.latent;
  for (int l = 0; l < n; ++l)
    frag.kl_zn_per_layer[l] =
        opts.kl_scale *
        kl_gaussian_diag(lat.mu_q[l], lat.log_sigma_q[l], lat.mu_p[l], lat.log_sigma_p[l]);

  if (grad) {
    Tensor<Scalar> dout = recon_grad(out, y);
    dout.scale(static_cast<Scalar>(0.5 * weight));
    std::vector<Tensor<Scalar>> dz_degr(n);
    Tensor<Scalar> dzn_content = model.decode_backward(dec, dout, grad, &dz_degr[n - 1]);

    // KL gradients w.r.t. the clamped per-layer statistics.
    const double wkl = kl_weight * opts.kl_scale;
    std::vector<Tensor<Scalar>> dmu_q(n), dls_q(n), dmu_p(n), dls_p(n);
    for (int l = 0; l < n; ++l) {
      const auto& mq = lat.mu_q[l];
      const auto& sq = lat.log_sigma_q[l];
      const auto& mp = lat.mu_p[l];
      const auto& sp = lat.log_sigma_p[l];
      dmu_q[l] = Tensor<Scalar>(mq.channels(), mq.height(), mq.width());
      dls_q[l] = dmu_q[l];
      if (l > 0) {
        dmu_p[l] = dmu_q[l];
        dls_p[l] = dmu_q[l];
      }
      for (std::size_t i = 0; i < mq.size(); ++i) {
        const double inv_vp = std::exp(-2.0 * static_cast<double>(sp[i]));
        const double diff = static_cast<double>(mq[i]) - static_cast<double>(mp[i]);
        const double vr = std::exp(2.0 * (static_cast<double>(sq[i]) - static_cast<double>(sp[i])));
        dmu_q[l][i] = static_cast<Scalar>(wkl * diff * inv_vp);
        dls_q[l][i] = static_cast<Scalar>(wkl * (vr - 1.0));
        if (l > 0) {
          dmu_p[l][i] = static_cast<Scalar>(-wkl * diff * inv_vp);
          dls_p[l][i] = static_cast<Scalar>(wkl * (1.0 - vr - diff * diff * inv_vp));
        }
      }
    }
    model.encode_degradation_backward(dcache, std::move(dz_degr), dmu_q, dls_q, dmu_p, dls_p,
                                      grad);
    std::vector<Tensor<Scalar>> dz(n);
    dz.back() = std::move(dzn_content);
    model.encode_content_backward(ccache, dz, grad);
  }
  return frag;
}

/// Full per-pair loss: both fragments combined under the annealed weighting.
/// x and y are read only through independent forward passes. With `grad`
/// non-null the gradient of `weight * total` is accumulated.
template <typename Scalar>
LossBreakdown total_loss(const Tensor<Scalar>& x, const Tensor<Scalar>& y,
                         const LudVae<Scalar>& model, long iteration, Rng& rng,
                         const ObjectiveOptions& opts, Scalar* grad = nullptr,
                         double weight = 1.0) {
  const double beta = anneal_weight(iteration, opts.anneal_warmup);
  LossBreakdown lb = elbo_clean(x, model, rng, opts, grad, weight);
  LossBreakdown ny = elbo_noisy(y, model, rng, opts, grad, weight, beta * weight);
  lb.recon_noisy = ny.recon_noisy;
  lb.kl_zn_per_layer = std::move(ny.kl_zn_per_layer);
  lb.anneal_weight = beta;
  lb.total = 0.5 * lb.recon_clean + 0.5 * lb.recon_noisy + beta * lb.kl_total();
  return lb;
}

}  // namespace ludvae
