#include "ludvae/metrics.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ludvae/errors.hpp"
#include "ludvae/objective.hpp"

namespace ludvae {

double psnr(const Image& a, const Image& b, double peak) {
  if (!a.same_shape(b)) throw DimensionError("psnr: shape mismatch");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

namespace {

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(size);
  const int half = size / 2;
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - half;
    w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += w[i];
  }
  for (auto& v : w) v /= total;
  return w;
}

}  // namespace

double ssim(const Image& a, const Image& b, double peak) {
  if (!a.same_shape(b)) throw DimensionError("ssim: shape mismatch");
  constexpr int kWin = 11;
  if (a.height() < kWin || a.width() < kWin)
    throw DimensionError("ssim: image smaller than the 11x11 window");
  const auto w = gaussian_window(kWin, 1.5);
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  const int oh = a.height() - kWin + 1, ow = a.width() - kWin + 1;

  double total = 0.0;
  for (int ch = 0; ch < a.channels(); ++ch) {
    double acc = 0.0;
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double ma = 0, mb = 0, va = 0, vb = 0, cov = 0;
        for (int i = 0; i < kWin; ++i)
          for (int j = 0; j < kWin; ++j) {
            const double wt = w[i] * w[j];
            const double pa = a.at(ch, y + i, x + j);
            const double pb = b.at(ch, y + i, x + j);
            ma += wt * pa;
            mb += wt * pb;
            va += wt * pa * pa;
            vb += wt * pb * pb;
            cov += wt * pa * pb;
          }
        va -= ma * ma;
        vb -= mb * mb;
        cov -= ma * mb;
        acc += ((2 * ma * mb + c1) * (2 * cov + c2)) /
               ((ma * ma + mb * mb + c1) * (va + vb + c2));
      }
    total += acc / (static_cast<double>(oh) * ow);
  }
  return total / a.channels();
}

namespace {

constexpr double kAkldSmoothing = 1e-8;

std::vector<double> residual_histogram(const Image& r, int bins) {
  std::vector<double> h(bins, 0.0);
  for (std::size_t i = 0; i < r.size(); ++i) {
    // residuals binned over [-1, 1]; out-of-range mass goes to the edge bins
    int b = static_cast<int>((static_cast<double>(r[i]) + 1.0) * 0.5 * bins);
    b = std::clamp(b, 0, bins - 1);
    h[b] += 1.0;
  }
  const double total = static_cast<double>(r.size());
  for (auto& v : h) v = (v + kAkldSmoothing) / (total + kAkldSmoothing * bins);
  return h;
}

double histogram_kl(const std::vector<double>& p, const std::vector<double>& q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) kl += p[i] * std::log(p[i] / q[i]);
  return kl;
}

}  // namespace

double akld_residuals(const std::vector<Image>& real_residuals,
                      const std::vector<Image>& synth_residuals, int num_bins) {
  if (real_residuals.empty() || synth_residuals.empty() ||
      real_residuals.size() != synth_residuals.size())
    throw DimensionError("akld: residual sets must be non-empty and the same size");
  double total = 0.0;
  for (std::size_t i = 0; i < real_residuals.size(); ++i) {
    const auto hr = residual_histogram(real_residuals[i], num_bins);
    const auto hs = residual_histogram(synth_residuals[i], num_bins);
    total += histogram_kl(hr, hs);
  }
  return total / static_cast<double>(real_residuals.size());
}

namespace {

Image image_diff(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw DimensionError("akld: shape mismatch inside a triple");
  Image d(a.channels(), a.height(), a.width());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

}  // namespace

double akld(const std::vector<Image>& real_noisy, const std::vector<Image>& synth_noisy,
            const std::vector<Image>& clean, int num_bins) {
  if (real_noisy.empty()) throw DimensionError("akld: empty sets");
  if (real_noisy.size() != synth_noisy.size() || real_noisy.size() != clean.size())
    throw DimensionError("akld: set sizes must match");
  std::vector<Image> rr, rs;
  rr.reserve(clean.size());
  rs.reserve(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    rr.push_back(image_diff(real_noisy[i], clean[i]));
    rs.push_back(image_diff(synth_noisy[i], clean[i]));
  }
  return akld_residuals(rr, rs, num_bins);
}

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double mmd_with_bandwidth(const std::vector<std::vector<double>>& a,
                          const std::vector<std::vector<double>>& b, double bw) {
  const double gamma = 1.0 / (2.0 * bw * bw);
  auto kernel_mean = [gamma](const std::vector<std::vector<double>>& u,
                             const std::vector<std::vector<double>>& v) {
    double s = 0.0;
    for (const auto& x : u)
      for (const auto& y : v) s += std::exp(-gamma * sq_dist(x, y));
    return s / (static_cast<double>(u.size()) * v.size());
  };
  return kernel_mean(a, a) + kernel_mean(b, b) - 2.0 * kernel_mean(a, b);
}

double median_pooled_distance(const std::vector<std::vector<double>>& a,
                              const std::vector<std::vector<double>>& b, bool* degenerate) {
  std::vector<const std::vector<double>*> all;
  for (const auto& v : a) all.push_back(&v);
  for (const auto& v : b) all.push_back(&v);
  std::vector<double> d;
  d.reserve(all.size() * (all.size() - 1) / 2);
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j)
      d.push_back(std::sqrt(sq_dist(*all[i], *all[j])));
  *degenerate = false;
  if (d.empty()) {
    *degenerate = true;
    return 1.0;
  }
  std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
  double med = d[d.size() / 2];
  if (med <= 0.0) {
    *degenerate = true;
    med = 1.0;
  }
  return med;
}

}  // namespace

MmdResult mmd_gaussian(const std::vector<std::vector<double>>& a,
                       const std::vector<std::vector<double>>& b) {
  if (a.empty() || b.empty()) throw DimensionError("mmd: sample sets must be non-empty");
  const std::size_t dim = a.front().size();
  for (const auto& v : a)
    if (v.size() != dim) throw DimensionError("mmd: inconsistent feature dims");
  for (const auto& v : b)
    if (v.size() != dim) throw DimensionError("mmd: inconsistent feature dims");
  MmdResult r;
  r.bandwidth = median_pooled_distance(a, b, &r.degenerate_bandwidth);
  r.value = mmd_with_bandwidth(a, b, r.bandwidth);
  return r;
}

double mmd_permutation_threshold(const std::vector<std::vector<double>>& a,
                                 const std::vector<std::vector<double>>& b, int permutations,
                                 double quantile, Rng& rng) {
  std::vector<std::vector<double>> pool = a;
  pool.insert(pool.end(), b.begin(), b.end());
  bool degenerate = false;
  const double bw = median_pooled_distance(a, b, &degenerate);
  std::vector<double> stats(permutations);
  std::vector<std::size_t> idx(pool.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (int p = 0; p < permutations; ++p) {
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
    std::vector<std::vector<double>> pa, pb;
    for (std::size_t i = 0; i < a.size(); ++i) pa.push_back(pool[idx[i]]);
    for (std::size_t i = a.size(); i < pool.size(); ++i) pb.push_back(pool[idx[i]]);
    stats[p] = mmd_with_bandwidth(pa, pb, bw);
  }
  std::sort(stats.begin(), stats.end());
  const auto at = static_cast<std::size_t>(quantile * (permutations - 1));
  return stats[at];
}

namespace {

Image center_crop(const Image& img, int size) {
  const int y0 = (img.height() - size) / 2;
  const int x0 = (img.width() - size) / 2;
  Image out(img.channels(), size, size);
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
  return out;
}

std::vector<double> flatten_top_layer(const LudVae<float>& model, const Image& input) {
  auto content = model.encode_content(input);
  const auto& top = content.layers.back();
  std::vector<double> v(top.size());
  for (std::size_t i = 0; i < top.size(); ++i) v[i] = top[i];
  return v;
}

}  // namespace

InvarianceResult invariance_mmd_protocol(const LudVae<float>& model,
                                         const std::vector<Image>& clean,
                                         const std::vector<Image>& noisy, double sigma_x,
                                         double sigma_y, int crop, int draws,
                                         std::uint64_t seed) {
  if (clean.empty() || clean.size() != noisy.size())
    throw DimensionError("invariance protocol: need matched non-empty pair sets");
  InvarianceResult result;
  Rng rng(Rng::mix(seed, Rng::hash("invariance_mmd")));
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const int size = std::min({crop, clean[i].height(), clean[i].width()});
    const int div = model.config().spatial_divisor();
    const int csize = (size / div) * div;
    Image x = center_crop(clean[i], csize);
    Image y = center_crop(noisy[i], csize);
    std::vector<std::vector<double>> zx, zy;
    for (int d = 0; d < draws; ++d) {
      zx.push_back(flatten_top_layer(model, apply_h(x, sigma_x, rng)));
      zy.push_back(flatten_top_layer(model, apply_h(y, sigma_y, rng)));
    }
    const MmdResult m = mmd_gaussian(zx, zy);
    result.per_image_mmd.push_back(m.value);
    result.mean_mmd += m.value;
    result.mean_permutation_threshold += mmd_permutation_threshold(zx, zy, 200, 0.95, rng);
  }
  result.mean_mmd /= static_cast<double>(clean.size());
  result.mean_permutation_threshold /= static_cast<double>(clean.size());
  return result;
}

double inference_gap_kl(double sigma_x, double sigma_y, const std::vector<double>& n, int K) {
  if (sigma_x <= 0.0 || sigma_y <= 0.0)
    throw std::invalid_argument("inference_gap_kl: sigmas must be > 0");
  if (static_cast<int>(n.size()) != K)
    throw DimensionError("inference_gap_kl: dim of n must equal K");
  double nsq = 0.0;
  for (double v : n) nsq += v * v;
  const double k = static_cast<double>(K);
  return k * std::log(sigma_x / sigma_y) - k / 2.0 +
         k * sigma_y * sigma_y / (2.0 * sigma_x * sigma_x) +
         nsq / (2.0 * sigma_x * sigma_x);
}

double inference_gap_l1_bound(double kl) {
  if (kl < 0.0) throw std::invalid_argument("inference_gap_l1_bound: kl must be >= 0");
  // The cited lemma bounds ||p-q||_1 by sqrt(2 log2 * D) with D in bits;
  // our KL is in nats, so the log2 cancels against the unit conversion.
  const double kl_bits = kl / std::numbers::ln2;
  return std::sqrt(2.0 * std::numbers::ln2 * kl_bits);
}

double gaussian_l1_distance_1d(double mean1, double sigma1, double mean2, double sigma2) {
  // Simpson quadrature over a range covering both densities.
  const double lo = std::min(mean1 - 12 * sigma1, mean2 - 12 * sigma2);
  const double hi = std::max(mean1 + 12 * sigma1, mean2 + 12 * sigma2);
  const int n = 40001;  // odd
  const double h = (hi - lo) / (n - 1);
  auto pdf = [](double x, double m, double s) {
    const double z = (x - m) / s;
    return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi));
  };
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = lo + i * h;
    const double f = std::fabs(pdf(x, mean1, sigma1) - pdf(x, mean2, sigma2));
    const double w = (i == 0 || i == n - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    acc += w * f;
  }
  return acc * h / 3.0;
}

DeFlowToyInstance DeFlowToyInstance::identity(int k) {
  DeFlowToyInstance inst;
  inst.flow_a = Eigen::MatrixXd::Identity(k, k);
  inst.flow_t = Eigen::VectorXd::Zero(k);
  inst.mu_u = Eigen::VectorXd::Zero(k);
  inst.sigma_u = Eigen::MatrixXd::Identity(k, k);
  inst.x = Eigen::VectorXd::Zero(k);
  inst.y = Eigen::VectorXd::Zero(k);
  return inst;
}

namespace {

double log_gaussian(const Eigen::VectorXd& v, const Eigen::VectorXd& mean,
                    const Eigen::MatrixXd& cov) {
  const int k = static_cast<int>(v.size());
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NumericError("deflow: covariance is not positive definite");
  const Eigen::VectorXd d = v - mean;
  const Eigen::VectorXd s = llt.solve(d);
  double logdet = 0.0;
  for (int i = 0; i < k; ++i) logdet += std::log(llt.matrixL()(i, i));
  logdet *= 2.0;
  return -0.5 * (k * std::log(2.0 * std::numbers::pi) + logdet + d.dot(s));
}

}  // namespace

DeFlowReport deflow_decomposition_check(const DeFlowToyInstance& inst) {
  const int k = static_cast<int>(inst.x.size());
  Eigen::LLT<Eigen::MatrixXd> llt(inst.sigma_u);
  if (llt.info() != Eigen::Success)
    throw NumericError("deflow: Sigma_u must be symmetric positive definite");

  const Eigen::VectorXd fx = inst.flow_a * inst.x + inst.flow_t;
  const Eigen::VectorXd fy = inst.flow_a * inst.y + inst.flow_t;
  const double logdet_flow = std::log(std::fabs(inst.flow_a.determinant()));
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(k, k);

  // Exact joint: (f(x), f(y)) is 2K-dim Gaussian, mean (0, mu_u),
  // covariance [[I, I], [I, I + Sigma_u]].
  Eigen::VectorXd v(2 * k), mean(2 * k);
  v << fx, fy;
  mean << Eigen::VectorXd::Zero(k), inst.mu_u;
  Eigen::MatrixXd cov(2 * k, 2 * k);
  cov.topLeftCorner(k, k) = id;
  cov.topRightCorner(k, k) = id;
  cov.bottomLeftCorner(k, k) = id;
  cov.bottomRightCorner(k, k) = id + inst.sigma_u;

  DeFlowReport rep;
  rep.joint = log_gaussian(v, mean, cov) + 2.0 * logdet_flow;
  rep.marginal_x = log_gaussian(fx, Eigen::VectorXd::Zero(k), id) + logdet_flow;
  rep.marginal_y = log_gaussian(fy, inst.mu_u, id + inst.sigma_u) + logdet_flow;

  // Remainder of the exact decomposition beyond the two marginals. The
  // cross term f(x)^T Sigma_u^{-1} f(y) is the part that cannot be evaluated
  // without paired samples.
  const Eigen::VectorXd siy = llt.solve(fy);
  rep.cross_term = fx.dot(siy);
  double logdet_su = 0.0;
  for (int i = 0; i < k; ++i) logdet_su += std::log(llt.matrixL()(i, i));
  logdet_su *= 2.0;
  const double nx_term = log_gaussian(fx, -inst.mu_u, inst.sigma_u);
  const double ny_sigma = log_gaussian(fy, inst.mu_u, inst.sigma_u);
  const double ny_marg = log_gaussian(fy, inst.mu_u, id + inst.sigma_u);
  const Eigen::VectorXd simu = llt.solve(inst.mu_u);
  rep.pairing_terms = nx_term + rep.cross_term +
                      0.5 * (k * std::log(2.0 * std::numbers::pi) + logdet_su) +
                      0.5 * inst.mu_u.dot(simu) + (ny_sigma - ny_marg);
  rep.decomposition_sum = rep.marginal_x + rep.marginal_y + rep.pairing_terms;
  rep.residual = std::fabs(rep.joint - rep.decomposition_sum);
  return rep;
}

double intensity_noise_correlation(const std::vector<Image>& clean,
                                   const std::vector<Image>& noisy, int block) {
  if (clean.empty() || clean.size() != noisy.size())
    throw DimensionError("intensity_noise_correlation: matched non-empty sets required");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const Image& c = clean[i];
    const Image& n = noisy[i];
    if (!c.same_shape(n)) throw DimensionError("intensity_noise_correlation: shape mismatch");
    for (int by = 0; by + block <= c.height(); by += block)
      for (int bx = 0; bx + block <= c.width(); bx += block) {
        double mi = 0.0, mr = 0.0;
        int cnt = 0;
        for (int ch = 0; ch < c.channels(); ++ch)
          for (int y = by; y < by + block; ++y)
            for (int x = bx; x < bx + block; ++x) {
              const double d = static_cast<double>(n.at(ch, y, x)) - c.at(ch, y, x);
              mi += c.at(ch, y, x);
              mr += d * d;
              ++cnt;
            }
        xs.push_back(mi / cnt);
        ys.push_back(mr / cnt);
      }
  }
  const double nn = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= nn;
  my /= nn;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace ludvae
