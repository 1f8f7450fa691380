#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ludvae/model.hpp"
#include "ludvae/rng.hpp"
#include "ludvae/tensor.hpp"

namespace ludvae {

/// 10*log10(peak^2 / MSE); identical inputs yield +infinity.
double psnr(const Image& a, const Image& b, double peak = 1.0);

/// Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5,
/// C1=(0.01*peak)^2, C2=(0.03*peak)^2), averaged over channels.
double ssim(const Image& a, const Image& b, double peak = 1.0);

/// KL(real || synth) between smoothed histograms of noise residuals.
/// Residuals are binned over [-1, 1]; counts get Laplace smoothing 1e-8.
double akld_residuals(const std::vector<Image>& real_residuals,
                      const std::vector<Image>& synth_residuals, int num_bins = 256);

/// Average KL divergence: per image, residuals (noisy - clean) of the real
/// and synthesized sets are compared; the per-image KLs are averaged.
double akld(const std::vector<Image>& real_noisy, const std::vector<Image>& synth_noisy,
            const std::vector<Image>& clean, int num_bins = 256);

struct MmdResult {
  double value = 0.0;      // squared MMD, biased V-statistic
  double bandwidth = 0.0;  // median pairwise distance over the pooled set
  bool degenerate_bandwidth = false;
};

/// Gaussian-kernel squared MMD with the median-distance bandwidth heuristic.
/// Samples are rows of dimension `dim` flattened in row-major order.
MmdResult mmd_gaussian(const std::vector<std::vector<double>>& a,
                       const std::vector<std::vector<double>>& b);

/// Quantile of the permutation null for the MMD statistic between two sets
/// of the given sizes (labels shuffled over the pooled samples).
double mmd_permutation_threshold(const std::vector<std::vector<double>>& a,
                                 const std::vector<std::vector<double>>& b, int permutations,
                                 double quantile, Rng& rng);

struct InvarianceResult {
  double mean_mmd = 0.0;
  double mean_permutation_threshold = 0.0;  // 95% null quantile, averaged
  std::vector<double> per_image_mmd;
};

/// The latent two-sample protocol: per paired (x, y), draws content codes
/// through the pre-processor with fresh noise, then compares {z|x} and {z|y}
/// (flattened top-layer codes) with MMD. Averaged over the evaluation pairs.
InvarianceResult invariance_mmd_protocol(const LudVae<float>& model,
                                         const std::vector<Image>& clean,
                                         const std::vector<Image>& noisy, double sigma_x,
                                         double sigma_y, int crop = 128, int draws = 10,
                                         std::uint64_t seed = 0);

/// Closed-form KL( N(n, sigma_y^2 I_K) || N(0, sigma_x^2 I_K) ):
///   K*log(sx/sy) - K/2 + K*sy^2/(2 sx^2) + ||n||^2/(2 sx^2).
double inference_gap_kl(double sigma_x, double sigma_y, const std::vector<double>& n, int K);

/// sqrt(2 * log(2) * kl) — the L1 bound on the pre-processed posterior gap.
double inference_gap_l1_bound(double kl);

/// Numerically integrated L1 distance between the two 1-D Gaussians of the
/// inference gap (oracle for the bound check).
double gaussian_l1_distance_1d(double mean1, double sigma1, double mean2, double sigma2);

/// Toy instance of a two-latent flow model with an affine flow f(v) = Av + t
/// (identity by default), latent shift u ~ N(mu_u, Sigma_u).
struct DeFlowToyInstance {
  Eigen::MatrixXd flow_a;   // K x K, invertible
  Eigen::VectorXd flow_t;   // K
  Eigen::VectorXd mu_u;     // K
  Eigen::MatrixXd sigma_u;  // K x K, symmetric positive definite
  Eigen::VectorXd x, y;     // observed vectors

  static DeFlowToyInstance identity(int k);
};

struct DeFlowReport {
  double joint = 0.0;       // exact joint log-density via the 2K-dim Gaussian
  double marginal_x = 0.0;  // log p(x)
  double marginal_y = 0.0;  // log p(y)
  double cross_term = 0.0;  // f(x)^T Sigma_u^{-1} f(y) — needs the pairing
  double pairing_terms = 0.0;  // everything beyond the two marginals
  double decomposition_sum = 0.0;
  double residual = 0.0;  // |joint - decomposition_sum|
};

/// Checks that the joint log-likelihood equals the two marginal terms plus
/// the pairing-dependent remainder (which contains the cross term), i.e.
/// that a marginal-only objective drops information that requires pairs.
DeFlowReport deflow_decomposition_check(const DeFlowToyInstance& instance);

/// Pearson correlation between block-averaged clean intensity and
/// block-averaged squared residual (noisy - clean); pooled over images.
/// Detects signal-dependent noise.
double intensity_noise_correlation(const std::vector<Image>& clean,
                                   const std::vector<Image>& noisy, int block = 8);

}  // namespace ludvae
