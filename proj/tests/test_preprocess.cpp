#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ludvae/image_io.hpp"
#include "ludvae/preprocess.hpp"
#include "test_support.hpp"

using namespace ludvae;
using test_support::fresh_temp_dir;
using test_support::random_tensor;

TEST_CASE("inject_gaussian basics") {
  Image img(3, 4, 4, 0.5f);
  Rng rng(1);
  CHECK(inject_gaussian(img, 0.0, rng) == img);
  CHECK_THROWS_AS(inject_gaussian(img, -1.0, rng), std::invalid_argument);

  Rng a(2), b(2);
  CHECK(inject_gaussian(img, 10.0, a) == inject_gaussian(img, 10.0, b));

  // fresh noise per call: consecutive applications differ
  Rng c(3);
  CHECK_FALSE(inject_gaussian(img, 10.0, c) == inject_gaussian(img, 10.0, c));
}

TEST_CASE("inject_gaussian noise level oracle") {
  // sigma 25.5 on the [0,255] scale is 0.1 in [0,1] units
  Image img(1, 1000, 1000, 0.5f);
  Rng rng(4);
  Image noisy = inject_gaussian(img, 25.5, rng);
  double sum = 0, sumsq = 0;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    const double d = noisy[i] - 0.5;
    sum += d;
    sumsq += d * d;
  }
  const double n = static_cast<double>(noisy.size());
  const double sd = std::sqrt(sumsq / n - (sum / n) * (sum / n));
  CHECK(sd == doctest::Approx(0.1).epsilon(0.01));
  CHECK(std::fabs(sd - 0.1) < 0.001);
}

namespace {

// Direct (non-separable) antialiased bicubic oracle: full 2-D tensor-product
// weights evaluated per output pixel, independent of the two-pass code path.
double oracle_cubic(double t) {
  const double a = -0.5;
  t = std::fabs(t);
  if (t <= 1.0) return (a + 2) * t * t * t - (a + 3) * t * t + 1;
  if (t < 2.0) return a * t * t * t - 5 * a * t * t + 8 * a * t - 4 * a;
  return 0.0;
}

int oracle_reflect(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

double oracle_pixel(const Image& img, int c, int yo, int xo, int scale) {
  const double k = scale;
  const double support = 2.0 * k;
  const int taps = static_cast<int>(std::ceil(2 * support)) + 2;
  const double cy = (yo + 0.5) * k - 0.5;
  const double cx = (xo + 0.5) * k - 0.5;
  const int y0 = static_cast<int>(std::floor(cy - support)) + 1;
  const int x0 = static_cast<int>(std::floor(cx - support)) + 1;
  double acc = 0.0, wsum = 0.0;
  for (int ty = 0; ty < taps; ++ty)
    for (int tx = 0; tx < taps; ++tx) {
      const double w = oracle_cubic((cy - (y0 + ty)) / k) * oracle_cubic((cx - (x0 + tx)) / k);
      acc += w * img.at(c, oracle_reflect(y0 + ty, img.height()), oracle_reflect(x0 + tx, img.width()));
      wsum += w;
    }
  return acc / wsum;
}

}  // namespace

TEST_CASE("bicubic downsample") {
  SUBCASE("constant image stays constant") {
    Image img(3, 16, 16, 0.37f);
    Image out = bicubic_downsample(img, 4);
    CHECK(out.height() == 4);
    CHECK(out.channels() == 3);
    for (std::size_t i = 0; i < out.size(); ++i)
      CHECK(out[i] == doctest::Approx(0.37).epsilon(1e-6));
  }
  SUBCASE("ramp matches the direct convolution oracle") {
    Image img(2, 24, 32);
    for (int c = 0; c < 2; ++c)
      for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 32; ++x)
          img.at(c, y, x) = 0.1f + 0.02f * x + 0.015f * y + 0.1f * c;
    for (int scale : {2, 4}) {
      Image out = bicubic_downsample(img, scale);
      for (int c = 0; c < 2; ++c)
        for (int y = 0; y < out.height(); ++y)
          for (int x = 0; x < out.width(); ++x)
            CHECK(std::fabs(out.at(c, y, x) - oracle_pixel(img, c, y, x, scale)) < 1e-6);
    }
  }
  SUBCASE("interior of a linear ramp is reproduced exactly") {
    Image img(1, 32, 32);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) img.at(0, y, x) = 0.01f * x;
    Image out = bicubic_downsample(img, 2);
    for (int x = 2; x < out.width() - 2; ++x) {
      const double want = 0.01 * ((x + 0.5) * 2 - 0.5);
      CHECK(out.at(0, 8, x) == doctest::Approx(want).epsilon(1e-5));
    }
  }
  SUBCASE("random image oracle agreement") {
    Rng rng(9);
    Image img = random_tensor<float>(1, 16, 16, rng, 0.25);
    Image out = bicubic_downsample(img, 2);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x)
        CHECK(std::fabs(out.at(0, y, x) - oracle_pixel(img, 0, y, x, 2)) < 1e-6);
  }
  Image odd(1, 15, 16);
  CHECK_THROWS_AS(bicubic_downsample(odd, 2), DimensionError);
}

TEST_CASE("gamma correction") {
  Image img(1, 2, 2, 0.25f);
  Image out = gamma_correct(img, 1.0, 1.0);
  CHECK(out == img);
  out = gamma_correct(img, 0.2, 2.0);
  CHECK(out.at(0, 0, 0) == doctest::Approx(0.0125));
  CHECK_THROWS_AS(gamma_correct(img, 0.0, 1.0), std::invalid_argument);
  Image bad(1, 1, 1, 1.5f);
  CHECK_THROWS_AS(gamma_correct(bad, 0.5, 2.0), std::invalid_argument);
}

TEST_CASE("channel normalization") {
  Rng rng(10);
  std::vector<Image> domain_a, domain_b;
  for (int i = 0; i < 4; ++i) {
    Image a = random_tensor<float>(3, 8, 8, rng, 0.1);
    Image b = random_tensor<float>(3, 8, 8, rng, 0.2);
    for (std::size_t j = 0; j < a.size(); ++j) {
      a[j] += 0.5f;
      b[j] += 0.3f;
    }
    domain_a.push_back(a);
    domain_b.push_back(b);
  }
  const ChannelStats sa = compute_channel_stats(domain_a);
  const ChannelStats sb = compute_channel_stats(domain_b);

  SUBCASE("identical stats give the identity map") {
    Image img = domain_a.front();
    Image out = channel_normalize(img, sa, sa);
    for (std::size_t i = 0; i < img.size(); ++i)
      CHECK(out[i] == doctest::Approx(img[i]).epsilon(1e-6));
  }
  SUBCASE("round trip is exact to 1e-12") {
    Image img = domain_b.front();
    Image back = channel_denormalize(channel_normalize(img, sb, sa), sb, sa);
    for (std::size_t i = 0; i < img.size(); ++i)
      CHECK(std::fabs(static_cast<double>(back[i]) - img[i]) < 1e-12 + 1e-6 * std::fabs(img[i]));
  }
  SUBCASE("normalized domain matches the target moments") {
    std::vector<Image> mapped;
    for (const auto& img : domain_b) mapped.push_back(channel_normalize(img, sb, sa));
    const ChannelStats sm = compute_channel_stats(mapped);
    for (int c = 0; c < 3; ++c) {
      CHECK(std::fabs(sm.mean[c] - sa.mean[c]) < 1e-6);
      CHECK(std::fabs(sm.stddev[c] - sa.stddev[c]) < 1e-6);
    }
  }
  SUBCASE("degenerate stats are rejected") {
    ChannelStats degenerate = sa;
    degenerate.stddev[1] = 0.0;
    CHECK_THROWS_AS(channel_normalize(domain_a.front(), degenerate, sa), NumericError);
  }
}

namespace {

std::string write_test_folder(const std::string& tag, int count, int size, Rng& rng) {
  const std::string dir = fresh_temp_dir(tag);
  for (int i = 0; i < count; ++i) {
    Image img = random_tensor<float>(3, size, size, rng, 0.15);
    for (std::size_t j = 0; j < img.size(); ++j)
      img[j] = std::min(0.9f, std::max(0.1f, img[j] + 0.5f));
    char name[32];
    std::snprintf(name, sizeof(name), "/img_%04d.png", i);
    write_png8(dir + name, img);
  }
  return dir;
}

}  // namespace

TEST_CASE("prepare_domains per task") {
  Rng rng(11);
  const std::string clean = write_test_folder("prep_clean", 3, 16, rng);
  const std::string noisy = write_test_folder("prep_noisy", 4, 16, rng);

  SUBCASE("denoise passes both folders through untouched") {
    TaskConfig cfg;
    cfg.task = Task::denoise;
    PreparedDomains d = prepare_domains(clean, noisy, cfg, 1);
    REQUIRE(d.source.size() == 3);
    REQUIRE(d.target.size() == 4);
    CHECK(d.source[0] == read_png(d.source_paths[0]));
  }
  SUBCASE("super-resolution downsamples the clean side") {
    TaskConfig cfg;
    cfg.task = Task::super_resolution;
    cfg.sr_scale = 4;
    PreparedDomains d = prepare_domains(clean, noisy, cfg, 1);
    CHECK(d.source[0].height() == 4);
    CHECK(d.target[0].height() == 16);
  }
  SUBCASE("low-light applies logged per-image gamma parameters") {
    TaskConfig cfg;
    cfg.task = Task::low_light;
    const std::string manifest = fresh_temp_dir("prep_manifest") + "/records.tsv";
    PreparedDomains d = prepare_domains(clean, noisy, cfg, 1, manifest);
    for (const auto& r : d.records) {
      CHECK(r.c >= cfg.c_lo);
      CHECK(r.c <= cfg.c_hi);
      CHECK(r.gamma >= cfg.gamma_lo);
      CHECK(r.gamma <= cfg.gamma_hi);
      // reproducible from the recorded seed
      Rng replay(r.seed);
      CHECK(replay.uniform(cfg.c_lo, cfg.c_hi) == doctest::Approx(r.c));
      CHECK(replay.uniform(cfg.gamma_lo, cfg.gamma_hi) == doctest::Approx(r.gamma));
    }
    std::ifstream mf(manifest);
    REQUIRE(mf.good());
    std::string line;
    int rows = 0;
    while (std::getline(mf, line)) ++rows;
    CHECK(rows == 4);  // header + 3 records
  }
  SUBCASE("channel normalization maps the corrupted domain onto the clean one") {
    TaskConfig cfg;
    cfg.task = Task::denoise;
    cfg.normalize_channels = true;
    PreparedDomains d = prepare_domains(clean, noisy, cfg, 1);
    const ChannelStats after = compute_channel_stats(d.target);
    REQUIRE(d.source_stats.has_value());
    for (int c = 0; c < 3; ++c)
      CHECK(std::fabs(after.mean[c] - d.source_stats->mean[c]) < 1e-6);
  }
}

TEST_CASE("low-light parameters are uniform by KS test") {
  Rng rng(12);
  const std::string clean = write_test_folder("ks_clean", 1000, 4, rng);
  const std::string noisy = write_test_folder("ks_noisy", 2, 4, rng);
  TaskConfig cfg;
  cfg.task = Task::low_light;
  PreparedDomains d = prepare_domains(clean, noisy, cfg, 99);
  auto ks_uniform = [](std::vector<double> v, double lo, double hi) {
    std::sort(v.begin(), v.end());
    double dmax = 0.0;
    const double n = static_cast<double>(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double cdf = (v[i] - lo) / (hi - lo);
      dmax = std::max(dmax, std::fabs(cdf - (i + 1) / n));
      dmax = std::max(dmax, std::fabs(cdf - i / n));
    }
    return dmax;
  };
  std::vector<double> cs, gs;
  for (const auto& r : d.records) {
    cs.push_back(r.c);
    gs.push_back(r.gamma);
  }
  const double crit = 1.36 / std::sqrt(1000.0);  // 5% critical value
  CHECK(ks_uniform(cs, cfg.c_lo, cfg.c_hi) < crit);
  CHECK(ks_uniform(gs, cfg.gamma_lo, cfg.gamma_hi) < crit);
}
