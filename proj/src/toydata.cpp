#include "ludvae/toydata.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "ludvae/errors.hpp"
#include "ludvae/image_io.hpp"

namespace fs = std::filesystem;

namespace ludvae {

Image make_smooth_image(int height, int width, int channels, Rng& rng) {
  constexpr int kWaves = 4;
  struct Wave {
    double fx, fy, phase, amp;
  };
  Wave waves[kWaves];
  for (auto& w : waves) {
    w.fx = rng.uniform(0.5, 3.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    w.fy = rng.uniform(0.5, 3.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    w.amp = rng.uniform(0.3, 1.0);
  }
  const double gx = rng.uniform(-1.0, 1.0), gy = rng.uniform(-1.0, 1.0);
  std::vector<double> chan_shift(channels), chan_gain(channels);
  for (int c = 0; c < channels; ++c) {
    chan_shift[c] = rng.uniform(-0.15, 0.15);
    chan_gain[c] = rng.uniform(0.8, 1.2);
  }

  Image base(1, height, width);
  double lo = 1e9, hi = -1e9;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double u = static_cast<double>(x) / width;
      const double v = static_cast<double>(y) / height;
      double s = gx * u + gy * v;
      for (const auto& w : waves)
        s += w.amp * std::cos(2.0 * std::numbers::pi * (w.fx * u + w.fy * v) + w.phase);
      base.at(0, y, x) = static_cast<float>(s);
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
  const double span = std::max(1e-9, hi - lo);

  Image img(channels, height, width);
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double unit = (base.at(0, y, x) - lo) / span;  // [0,1]
        double val = 0.2 + 0.6 * (0.5 + chan_gain[c] * (unit - 0.5) + chan_shift[c]);
        val = std::min(0.8, std::max(0.2, val));
        img.at(c, y, x) = static_cast<float>(val);
      }
  return img;
}

Image apply_toy_noise(const Image& clean, const ToyDataConfig& config, Rng& rng) {
  Image out = clean;
  if (config.noise == ToyNoise::awgn) {
    const double s = config.sigma / 255.0;
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] += static_cast<float>(rng.normal(0.0, s));
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double var255 =
          config.read_sigma * config.read_sigma + config.shot_sigma2 * clean[i];
      out[i] += static_cast<float>(rng.normal(0.0, std::sqrt(var255) / 255.0));
    }
  }
  return out;
}

void write_toy_dataset(const std::string& out_dir, const ToyDataConfig& config) {
  const fs::path root(out_dir);
  for (const char* sub : {"train_clean", "train_noisy", "eval/clean", "eval/noisy"})
    fs::create_directories(root / sub);

  Rng master(config.seed);
  auto name = [](int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05d.png", i);
    return std::string(buf);
  };

  // Source domain: clean images only.
  Rng rng_clean = master.child(1);
  for (int i = 0; i < config.num_train; ++i)
    write_png8((root / "train_clean" / name(i)).string(),
               make_smooth_image(config.size, config.size, config.channels, rng_clean));

  // Target domain: DIFFERENT clean images, degraded.
  Rng rng_noisy = master.child(2);
  for (int i = 0; i < config.num_train; ++i) {
    Image c = make_smooth_image(config.size, config.size, config.channels, rng_noisy);
    write_png8((root / "train_noisy" / name(i)).string(), apply_toy_noise(c, config, rng_noisy));
  }

  // Held-out aligned pairs for evaluation only.
  Rng rng_eval = master.child(3);
  for (int i = 0; i < config.num_eval_pairs; ++i) {
    Image c = make_smooth_image(config.size, config.size, config.channels, rng_eval);
    write_png8((root / "eval" / "clean" / name(i)).string(), c);
    write_png8((root / "eval" / "noisy" / name(i)).string(),
               apply_toy_noise(c, config, rng_eval));
  }
}

}  // namespace ludvae
