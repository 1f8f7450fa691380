#pragma once

#include <string>

#include "ludvae/rng.hpp"
#include "ludvae/tensor.hpp"

namespace ludvae {

enum class ToyNoise { awgn, poisson_gaussian };

struct ToyDataConfig {
  int num_train = 500;      // per domain
  int num_eval_pairs = 24;  // held-out aligned pairs
  int size = 64;
  int channels = 3;
  ToyNoise noise = ToyNoise::awgn;
  double sigma = 25.0;       // AWGN std, [0,255] units
  double read_sigma = 5.0;   // poisson_gaussian: sigma(x)^2 = read^2 + shot^2 * x
  double shot_sigma2 = 1200.0;  // (in [0,255]^2 units, x in [0,1])
  std::uint64_t seed = 7;
};

/// Smooth synthetic image: random low-frequency cosine mixture plus a linear
/// ramp, squashed into [0.2, 0.8] so additive noise rarely clips.
Image make_smooth_image(int height, int width, int channels, Rng& rng);

/// Per-pixel noise draw for the configured toy degradation, [0,1] units.
Image apply_toy_noise(const Image& clean, const ToyDataConfig& config, Rng& rng);

/// Writes train_clean/, train_noisy/ (from disjoint clean images) and
/// eval/{clean,noisy}/ aligned pairs under `out_dir`, all as 8-bit PNG.
void write_toy_dataset(const std::string& out_dir, const ToyDataConfig& config);

}  // namespace ludvae
