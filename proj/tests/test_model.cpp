#include <doctest.h>

#include <cmath>

#include "ludvae/model.hpp"
#include "ludvae/objective.hpp"
#include "test_support.hpp"

using namespace ludvae;
using test_support::central_diff;
using test_support::random_tensor;

namespace {

ModelConfig tiny_config(int layers = 3, int base = 4, int lat = 2, int block = 2, int in_ch = 3) {
  ModelConfig cfg;
  cfg.num_layers = layers;
  cfg.base_channels = base;
  cfg.latent_channels.assign(layers, lat);
  cfg.convs_per_block = block;
  cfg.input_channels = in_ch;
  return cfg;
}

void set_param(LudVae<double>& m, const std::string& name, double v) {
  const auto* span = m.params().find(name);
  REQUIRE(span != nullptr);
  for (std::size_t i = 0; i < span->count(); ++i) m.params().values()[span->offset + i] = v;
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_THROWS_AS(LudVae<float>{tiny_config(0)}, ConfigError);
  ModelConfig bad = tiny_config();
  bad.log_sigma_min = 3.0;
  bad.log_sigma_max = -10.0;
  CHECK_THROWS_AS(LudVae<float>{bad}, ConfigError);
  bad = tiny_config();
  bad.latent_channels = {2, 2};  // wrong length for 3 layers
  CHECK_THROWS_AS(LudVae<float>{bad}, ConfigError);
}

TEST_CASE("encode_content is deterministic and layer sizes follow the resolution rule") {
  LudVae<float> model(tiny_config(3, 8, 4, 2));
  Rng rng(1);
  model.init_parameters(rng);
  Image img = random_tensor<float>(3, 64, 64, rng, 0.2);
  auto a = model.encode_content(img);
  auto b = model.encode_content(img);
  REQUIRE(a.layers.size() == 3);
  CHECK(a.layers[0].height() == 64);
  CHECK(a.layers[1].height() == 32);
  CHECK(a.layers[2].height() == 16);
  for (int l = 0; l < 3; ++l) {
    CHECK(a.layers[l].channels() == 4);
    CHECK(a.layers[l] == b.layers[l]);  // bit-identical
  }
}

TEST_CASE("indivisible input names the required divisor") {
  LudVae<float> model(tiny_config(3));
  Image img(3, 62, 64);
  try {
    model.encode_content(img);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("divisible by 4") != std::string::npos);
  }
}

TEST_CASE("zero parameters give all-zero content latents") {
  LudVae<float> model(tiny_config());
  // parameters start zeroed; every conv outputs its bias (0), ReLU keeps 0
  Rng rng(3);
  Image img = random_tensor<float>(3, 8, 8, rng, 0.3);
  auto content = model.encode_content(img);
  for (const auto& z : content.layers)
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(z[i] == 0.f);
}

TEST_CASE("encode_degradation: seeded reproducibility and recorded eps") {
  LudVae<float> model(tiny_config());
  Rng init(4);
  model.init_parameters(init);
  Image img = random_tensor<float>(3, 16, 16, init, 0.2);
  Rng r1(99), r2(99), r3(100);
  auto a = model.encode_degradation(img, r1);
  auto b = model.encode_degradation(img, r2);
  auto c = model.encode_degradation(img, r3);
  for (int l = 0; l < 3; ++l) {
    CHECK(a.sample[l] == b.sample[l]);
    CHECK(a.eps[l] == b.eps[l]);
    // sample = mu + exp(log_sigma) * eps holds exactly
    for (std::size_t i = 0; i < a.sample[l].size(); ++i)
      CHECK(a.sample[l][i] ==
            doctest::Approx(a.mu_q[l][i] + std::exp(a.log_sigma_q[l][i]) * a.eps[l][i])
                .epsilon(1e-6));
  }
  CHECK_FALSE(a.sample[0] == c.sample[0]);
}

TEST_CASE("log-sigma clamp pins samples to the mean at the lower limit") {
  LudVae<double> model(tiny_config(2, 4, 2, 1));
  set_param(model, "degr.post_mu0.bias", 0.25);
  set_param(model, "degr.post_logsigma0.bias", -1000.0);  // clamps to -10
  Rng rng(7);
  Image imgf = random_tensor<float>(3, 8, 8, rng, 0.2);
  auto img = imgf.cast<double>();
  auto lat = model.encode_degradation(img, rng);
  double max_eps = 0.0;
  for (std::size_t i = 0; i < lat.eps[0].size(); ++i)
    max_eps = std::max(max_eps, std::fabs(lat.eps[0][i]));
  for (std::size_t i = 0; i < lat.sample[0].size(); ++i) {
    CHECK(lat.log_sigma_q[0][i] == -10.0);
    CHECK(std::fabs(lat.sample[0][i] - lat.mu_q[0][i]) <= std::exp(-10.0) * max_eps * 1.0001);
  }
}

TEST_CASE("posterior sampling matches the target moments") {
  // Zero weights with fixed biases make the layer-0 statistics constant, so
  // one wide image yields 10^4 iid draws from N(0.7, 0.3^2).
  LudVae<double> model(tiny_config(1, 4, 1, 1));
  const double mu = 0.7, sigma = 0.3;
  set_param(model, "degr.post_mu0.bias", mu);
  set_param(model, "degr.post_logsigma0.bias", std::log(sigma));
  Rng rng(21);
  auto img = random_tensor<float>(3, 100, 100, rng, 0.2).cast<double>();
  auto lat = model.encode_degradation(img, rng);
  const std::size_t n = lat.sample[0].size();
  REQUIRE(n == 10000);
  double sum = 0, sumsq = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += lat.sample[0][i];
    sumsq += lat.sample[0][i] * lat.sample[0][i];
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sumsq / n - mean * mean);
  CHECK(std::fabs(mean - mu) < 3.0 * sigma / std::sqrt(static_cast<double>(n)));
  CHECK(std::fabs(sd - sigma) < 3.0 * sigma / std::sqrt(2.0 * n));
}

TEST_CASE("prior sampling: temperature zero collapses to the prior mean") {
  LudVae<float> model(tiny_config());
  Rng init(5);
  model.init_parameters(init);  // prior nets zero-initialized
  Rng rng(6);
  auto lat = model.sample_degradation_prior(16, 16, 0.0, rng);
  for (int l = 0; l < 3; ++l)
    for (std::size_t i = 0; i < lat.sample[l].size(); ++i) {
      CHECK(lat.sample[l][i] == lat.mu_p[l][i]);
      CHECK(lat.sample[l][i] == 0.f);  // zero prior nets
    }
  CHECK_THROWS_AS(model.sample_degradation_prior(16, 16, -0.1, rng), std::invalid_argument);
}

TEST_CASE("prior sampling at unit temperature is standard normal under zero prior nets") {
  LudVae<float> model(tiny_config(3, 4, 4, 1));
  Rng rng(8);
  double sum = 0, sumsq = 0;
  std::size_t n = 0;
  for (int draw = 0; draw < 2; ++draw) {
    auto lat = model.sample_degradation_prior(128, 128, 1.0, rng);
    for (int l = 0; l < 3; ++l)
      for (std::size_t i = 0; i < lat.sample[l].size(); ++i) {
        sum += lat.sample[l][i];
        sumsq += lat.sample[l][i] * lat.sample[l][i];
        ++n;
      }
  }
  REQUIRE(n > 100000);
  const double mean = sum / n;
  const double sd = std::sqrt(sumsq / n - mean * mean);
  CHECK(std::fabs(sd - 1.0) < 0.01);
  CHECK(std::fabs(mean) < 0.01);

  Rng r1(9), r2(9), r3(10);
  auto a = model.sample_degradation_prior(8, 8, 1.0, r1);
  auto b = model.sample_degradation_prior(8, 8, 1.0, r2);
  auto c = model.sample_degradation_prior(8, 8, 1.0, r3);
  CHECK(a.sample[0] == b.sample[0]);
  CHECK_FALSE(a.sample[0] == c.sample[0]);
}

TEST_CASE("decoder shapes, determinism and layer-N mismatch error") {
  LudVae<float> model(tiny_config());
  Rng rng(12);
  model.init_parameters(rng);
  for (int size : {64, 128}) {
    Image img = random_tensor<float>(3, size, size, rng, 0.2);
    auto content = model.encode_content(img);
    Image out1 = model.decode_clean(content);
    Image out2 = model.decode_clean(content);
    CHECK(out1.height() == size);
    CHECK(out1.width() == size);
    CHECK(out1.channels() == 3);
    CHECK(out1 == out2);

    Rng drng(13);
    auto degr = model.encode_degradation(img, drng);
    Image noisy1 = model.decode_noisy(content, degr);
    Image noisy2 = model.decode_noisy(content, degr);
    CHECK(noisy1 == noisy2);
    CHECK(noisy1.height() == size);
  }
  // degradation sampled at a different spatial size
  Image img = random_tensor<float>(3, 64, 64, rng, 0.2);
  auto content = model.encode_content(img);
  Rng drng(14);
  auto degr = model.sample_degradation_prior(32, 32, 1.0, drng);
  CHECK_THROWS_AS(model.decode_noisy(content, degr), DimensionError);
}

TEST_CASE("shape algebra round-trips for 1..5 layers") {
  for (int n = 1; n <= 5; ++n) {
    LudVae<float> model(tiny_config(n, 4, 2, 1));
    Rng rng(20 + n);
    model.init_parameters(rng);
    const int div = model.config().spatial_divisor();
    CHECK(div == (1 << (n - 1)));
    const int size = div * 4;
    Image img = random_tensor<float>(3, size, size * 2, rng, 0.2);
    auto content = model.encode_content(img);
    for (int l = 0; l < n; ++l) {
      CHECK(content.layers[l].height() == size >> l);
      CHECK(content.layers[l].width() == (size * 2) >> l);
    }
    Rng drng(30 + n);
    auto degr = model.encode_degradation(img, drng);
    for (int l = 0; l < n; ++l) CHECK(degr.sample[l].height() == size >> l);
    Image out = model.decode_noisy(content, degr);
    CHECK(out.height() == size);
    CHECK(out.width() == size * 2);
    auto prior = model.sample_degradation_prior(size, size * 2, 1.0, drng);
    for (int l = 0; l < n; ++l) CHECK(prior.sample[l].width() == (size * 2) >> l);
  }
}

TEST_CASE("decode_clean and decode_noisy share the trunk parameters") {
  LudVae<float> model(tiny_config());
  const auto shared = model.shared_decoder_parameter_names();
  REQUIRE_FALSE(shared.empty());
  // every shared name exists exactly once in the store
  for (const auto& name : shared) CHECK(model.params().find(name) != nullptr);
  // the adapters are branch-specific, never listed as shared
  for (const auto& name : shared) {
    CHECK(name.find("adapt_clean") == std::string::npos);
    CHECK(name.find("adapt_noisy") == std::string::npos);
  }
  // and flipping a shared trunk weight changes BOTH decode paths
  Rng rng(40);
  model.init_parameters(rng);
  Image img = random_tensor<float>(3, 16, 16, rng, 0.2);
  auto content = model.encode_content(img);
  Rng drng(41);
  auto degr = model.encode_degradation(img, drng);
  Image clean_before = model.decode_clean(content);
  Image noisy_before = model.decode_noisy(content, degr);
  const auto* span = model.params().find(shared.front());
  model.params().values()[span->offset] += 0.5f;
  CHECK_FALSE(model.decode_clean(content) == clean_before);
  CHECK_FALSE(model.decode_noisy(content, degr) == noisy_before);
}

TEST_CASE("full-model gradients match central finite differences") {
  // miniature double-precision model, every parameter checked
  LudVae<double> model(tiny_config(3, 4, 2, 2));
  Rng init(50);
  model.init_parameters(init);
  // keep posterior/prior log-sigma nets away from zero so every path carries
  // gradient (zero-init would hide sign errors behind zero factors)
  Rng jitter(51);
  for (auto& v : model.params().values()) v += jitter.normal(0.0, 0.02);

  Rng data_rng(52);
  auto x = random_tensor<float>(3, 8, 8, data_rng, 0.2).cast<double>();
  auto y = random_tensor<float>(3, 8, 8, data_rng, 0.2).cast<double>();
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = 0.5 + x[i];
    y[i] = 0.5 + y[i];
  }

  ObjectiveOptions opts;
  opts.sigma_x = 10.0;
  opts.sigma_y = 6.0;
  opts.kl_scale = 1.0;  // exercise the KL path at full strength
  opts.anneal_warmup = 10;

  const std::uint64_t eval_seed = 777;
  auto eval = [&]() {
    Rng rng(eval_seed);
    return total_loss(x, y, model, 10, rng, opts).total;
  };

  std::vector<double> grad(model.params().size(), 0.0);
  {
    Rng rng(eval_seed);
    total_loss(x, y, model, 10, rng, opts, grad.data(), 1.0);
  }

  int checked = 0, failed = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    const double fd = central_diff(eval, model.params().values()[i], 1e-6);
    const double rel = std::fabs(grad[i] - fd) / std::max({std::fabs(grad[i]), std::fabs(fd), 1e-6});
    worst = std::max(worst, rel);
    ++checked;
    if (rel >= 1e-3) ++failed;
  }
  CHECK_MESSAGE(failed == 0, "gradient mismatches: ", failed, " of ", checked, ", worst rel ",
                worst);
}

TEST_CASE("total_loss is a pure function of inputs, parameters and rng state") {
  LudVae<double> model(tiny_config(2, 4, 2, 1));
  Rng init(60);
  model.init_parameters(init);
  Rng data_rng(61);
  auto x = random_tensor<float>(3, 8, 8, data_rng, 0.1).cast<double>();
  auto y = random_tensor<float>(3, 8, 8, data_rng, 0.1).cast<double>();
  ObjectiveOptions opts;
  Rng r1(123), r2(123);
  const auto a = total_loss(x, y, model, 5, r1, opts);
  const auto b = total_loss(x, y, model, 5, r2, opts);
  CHECK(a.total == b.total);
  CHECK(a.recon_clean == b.recon_clean);
  CHECK(a.recon_noisy == b.recon_noisy);
}
