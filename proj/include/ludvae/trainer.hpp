#pragma once

#include <functional>
#include <string>

#include "ludvae/config.hpp"

namespace ludvae {

struct TrainResult {
  std::string final_checkpoint;  // empty on abort before any save
  std::string last_good_checkpoint;
  long iterations_run = 0;
  bool aborted = false;
  std::string abort_reason;
};

struct TrainOptions {
  std::string out_dir;
  std::string resume_checkpoint;  // empty = fresh start
  bool strict_determinism = false;
  // Invoked after each logged iteration; return false to stop early.
  std::function<bool(long iteration, double total)> progress;
};

/// Runs the sample -> preprocess -> loss -> Adam loop. Emits metrics.csv
/// (one row per iteration), ingestion/domain manifests and periodic
/// checkpoints under out_dir. Deterministic given the config seed: every
/// random draw derives from (seed, iteration).
TrainResult train(const RunConfig& config, const TrainOptions& options);

}  // namespace ludvae
