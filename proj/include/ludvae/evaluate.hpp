#pragma once

#include <string>
#include <vector>

#include "ludvae/model.hpp"
#include "ludvae/synthesis.hpp"

namespace ludvae {

struct EvalOptions {
  SynthesisConfig synthesis;  // C2N settings used for generation
  double protocol_sigma_x = 15.0;
  double protocol_sigma_y = 10.0;
  int mmd_crop = 128;
  int mmd_draws = 10;
  // Identity mode bypasses generation and scores the real pairs against
  // themselves (sanity baseline).
  bool identity = false;
};

struct EvalRow {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;  // one per evaluation pair
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  double akld = 0.0;
  double invariance_mmd = 0.0;
  double invariance_permutation_threshold = 0.0;
};

/// Loads matched pairs from <folder>/clean and <folder>/noisy (same
/// filenames; unmatched names raise an IoError that lists them), generates
/// C2N counterparts and scores them.
EvalReport evaluate_pairs(const LudVae<float>& model, const std::string& paired_folder,
                          const EvalOptions& options);

/// Per-metric scalars plus a per-image CSV table.
void write_eval_report(const std::string& path, const EvalReport& report);

}  // namespace ludvae
