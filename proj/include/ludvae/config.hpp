#pragma once

#include <nlohmann/json_fwd.hpp>
#include <string>

#include "ludvae/model.hpp"
#include "ludvae/preprocess.hpp"

namespace ludvae {

struct DataConfig {
  std::string clean_dir;
  std::string noisy_dir;
  int crop = 64;
  int batch = 16;
};

struct OptimizerConfig {
  double lr = 1e-4;
  long halve_at = 100000;  // learning rate is halved once at this iteration
  long total_iters = 200000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  double lr_at(long iteration) const { return iteration >= halve_at ? lr * 0.5 : lr; }
};

struct ObjectiveConfig {
  double kl_scale = 1.0 / (255.0 * 255.0);
  long anneal_warmup = 10000;
  bool preprocess_degradation_input = false;
};

struct RunConfig {
  ModelConfig model;
  TaskConfig task;
  DataConfig data;
  OptimizerConfig optimizer;
  ObjectiveConfig objective;
  std::uint64_t seed = 0;
  long checkpoint_every = 10000;
  long eval_every = 1000;

  void validate(bool check_folders) const;
};

/// Strict parse: unknown keys anywhere in the tree are rejected. Relative
/// data folders are resolved against $LUDVAE_DATA_ROOT when it is set.
RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& c);

}  // namespace ludvae
