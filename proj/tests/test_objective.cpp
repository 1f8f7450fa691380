#include <doctest.h>

#include <cmath>

#include "ludvae/objective.hpp"
#include "test_support.hpp"

using namespace ludvae;
using test_support::random_tensor;

TEST_CASE("kl_gaussian_diag basic values") {
  TensorD z(1, 1, 1, 0.0);
  CHECK(kl_gaussian_diag(z, z, z, z) == doctest::Approx(0.0));

  TensorD mu_q(1, 1, 1, 1.0), zero(1, 1, 1, 0.0);
  // mu_q=1, sigma_q=1, mu_p=0, sigma_p=1 on one element: KL = 1/2
  CHECK(kl_gaussian_diag(mu_q, zero, zero, zero) == doctest::Approx(0.5));

  TensorD big(2, 3, 4, 0.0);
  CHECK_THROWS_AS(kl_gaussian_diag(mu_q, zero, big, big), DimensionError);
  TensorD nan_t(1, 1, 1, std::nan(""));
  CHECK_THROWS_AS(kl_gaussian_diag(nan_t, zero, zero, zero), NumericError);
}

TEST_CASE("kl_gaussian_diag is non-negative over random statistics") {
  Rng rng(70);
  for (int i = 0; i < 1000; ++i) {
    TensorD mq = random_tensor<double>(1, 2, 2, rng, 2.0);
    TensorD sq = random_tensor<double>(1, 2, 2, rng, 1.5);
    TensorD mp = random_tensor<double>(1, 2, 2, rng, 2.0);
    TensorD sp = random_tensor<double>(1, 2, 2, rng, 1.5);
    CHECK(kl_gaussian_diag(mq, sq, mp, sp) >= 0.0);
  }
}

TEST_CASE("kl_gaussian_diag agrees with a Monte-Carlo oracle") {
  Rng rng(713);
  int outside = 0;
  for (int inst = 0; inst < 30; ++inst) {
    const int k = 1 + static_cast<int>(rng.uniform_index(4));
    TensorD mq = random_tensor<double>(1, 1, k, rng, 1.0);
    TensorD sq = random_tensor<double>(1, 1, k, rng, 0.5);
    TensorD mp = random_tensor<double>(1, 1, k, rng, 1.0);
    TensorD sp = random_tensor<double>(1, 1, k, rng, 0.5);
    const double closed = kl_gaussian_diag(mq, sq, mp, sp);

    const int m = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int s = 0; s < m; ++s) {
      double logq = 0.0, logp = 0.0;
      for (int d = 0; d < k; ++d) {
        const double z = mq[d] + std::exp(sq[d]) * rng.normal();
        const double zq = (z - mq[d]) / std::exp(sq[d]);
        const double zp = (z - mp[d]) / std::exp(sp[d]);
        logq += -0.5 * zq * zq - sq[d];
        logp += -0.5 * zp * zp - sp[d];
      }
      const double v = logq - logp;
      sum += v;
      sumsq += v * v;
    }
    const double mc = sum / m;
    const double se = std::sqrt(std::max(0.0, sumsq / m - mc * mc) / m);
    if (std::fabs(mc - closed) > 3.0 * se) ++outside;
  }
  // with a fixed seed the bound holds for every instance
  CHECK(outside == 0);
}

TEST_CASE("anneal schedule") {
  CHECK(anneal_weight(0) == 0.0);
  CHECK(anneal_weight(5000, 10000) == 0.5);
  CHECK(anneal_weight(10000, 10000) == 1.0);
  CHECK(anneal_weight(1000000) == 1.0);
  CHECK_THROWS_AS(anneal_weight(-1), std::invalid_argument);
  double prev = -1.0;
  for (long i = 0; i <= 12000; i += 100) {
    const double w = anneal_weight(i, 10000);
    CHECK(w >= prev);
    prev = w;
  }
}

TEST_CASE("recon_grad is 2(out - target) elementwise") {
  Rng rng(72);
  TensorD out = random_tensor<double>(2, 3, 3, rng);
  TensorD target = random_tensor<double>(2, 3, 3, rng);
  TensorD g = recon_grad(out, target);
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(g[i] == doctest::Approx(2.0 * (out[i] - target[i])));
}

namespace {

ModelConfig micro_config(int in_ch) {
  ModelConfig cfg;
  cfg.num_layers = 2;
  cfg.base_channels = 4;
  cfg.latent_channels = {2, 2};
  cfg.convs_per_block = 1;
  cfg.input_channels = in_ch;
  return cfg;
}

}  // namespace

TEST_CASE("zero model: reconstruction sums squared pixels, KL terms vanish") {
  // All-zero parameters make the decoder output identically zero, so
  // recon_clean over a constant 0.1 image of 2x2x1 is 4 * 0.01 = 0.04.
  LudVae<double> model(micro_config(1));
  TensorD x(1, 2, 2, 0.1);
  ObjectiveOptions opts;
  opts.sigma_x = 0.0;
  opts.sigma_y = 0.0;
  Rng rng(73);
  auto frag = elbo_clean(x, model, rng, opts);
  CHECK(frag.recon_clean == doctest::Approx(0.04).epsilon(1e-12));

  auto noisy = elbo_noisy(x, model, rng, opts);
  CHECK(noisy.recon_noisy == doctest::Approx(0.04).epsilon(1e-12));
  for (double kl : noisy.kl_zn_per_layer) CHECK(kl == 0.0);  // posterior == prior exactly

  auto lb = total_loss(x, x, model, 0, rng, opts);
  CHECK(lb.total == doctest::Approx(0.04).epsilon(1e-9));  // 0.5*(rc+rn), beta=0
  CHECK(lb.content_kl_constant == 0.0);
}

TEST_CASE("zero inputs and zero model give zero total") {
  LudVae<double> model(micro_config(1));
  TensorD x(1, 2, 2, 0.0);
  ObjectiveOptions opts;
  opts.sigma_x = 0.0;
  opts.sigma_y = 0.0;
  Rng rng(74);
  auto lb = total_loss(x, x, model, 100000, rng, opts);
  CHECK(lb.total == 0.0);
  CHECK(lb.recon_clean == 0.0);
  CHECK(lb.recon_noisy == 0.0);
  CHECK(lb.kl_total() == 0.0);
}

TEST_CASE("total composes exactly from its parts") {
  LudVae<double> model(micro_config(3));
  Rng init(75);
  model.init_parameters(init);
  Rng data_rng(76);
  auto x = random_tensor<float>(3, 8, 8, data_rng, 0.1).cast<double>();
  auto y = random_tensor<float>(3, 8, 8, data_rng, 0.1).cast<double>();
  ObjectiveOptions opts;
  opts.anneal_warmup = 100;
  Rng rng(77);
  auto lb = total_loss(x, y, model, 37, rng, opts);
  CHECK(lb.anneal_weight == doctest::Approx(0.37));
  CHECK(lb.total ==
        doctest::Approx(0.5 * lb.recon_clean + 0.5 * lb.recon_noisy +
                        lb.anneal_weight * lb.kl_total())
            .epsilon(1e-12));
  for (double kl : lb.kl_zn_per_layer) CHECK(kl >= 0.0);
}

TEST_CASE("repeated noisy fragments are stable in expectation") {
  LudVae<double> model(micro_config(3));
  Rng init(78);
  model.init_parameters(init);
  Rng data_rng(79);
  auto y = random_tensor<float>(3, 8, 8, data_rng, 0.1).cast<double>();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += 0.5;
  ObjectiveOptions opts;
  double sum = 0.0, sumsq = 0.0;
  const int n = 200;
  Rng rng(80);
  for (int i = 0; i < n; ++i) {
    const double v = elbo_noisy(y, model, rng, opts).recon_noisy;
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(std::max(0.0, sumsq / n - mean * mean));
  // untrained model: just bound the single-draw jitter (the trained-model
  // 5% figure is asserted by the acceptance suite)
  CHECK(sd / mean < 0.5);
}
