#include "ludvae/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "ludvae/errors.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace ludvae {

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw ConfigError("unknown config key '" + it.key() + "' in " + where);
}

template <typename T>
void get_to(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

SigmaSpec sigma_from_json(const json& j) {
  if (j.is_number()) return SigmaSpec(j.get<double>());
  if (j.is_array() && j.size() == 2)
    return SigmaSpec(j.at(0).get<double>(), j.at(1).get<double>());
  throw ConfigError("sigma must be a number or a [lo, hi] pair");
}

json sigma_to_json(const SigmaSpec& s) {
  if (s.is_range()) return json::array({s.lo, s.hi});
  return json(s.lo);
}

std::string resolve_dir(const std::string& dir) {
  if (dir.empty() || fs::path(dir).is_absolute()) return dir;
  if (const char* root = std::getenv("LUDVAE_DATA_ROOT"))
    return (fs::path(root) / dir).string();
  return dir;
}

}  // namespace

void RunConfig::validate(bool check_folders) const {
  model.validate();
  task.validate();
  if (optimizer.lr <= 0.0) throw ConfigError("optimizer.lr must be > 0");
  if (optimizer.total_iters <= 0) throw ConfigError("optimizer.total_iters must be > 0");
  if (optimizer.halve_at <= 0) throw ConfigError("optimizer.halve_at must be > 0");
  if (objective.kl_scale <= 0.0) throw ConfigError("objective.kl_scale must be > 0");
  if (objective.anneal_warmup <= 0) throw ConfigError("objective.anneal_warmup must be > 0");
  if (data.crop < 1 || data.crop % model.spatial_divisor() != 0)
    throw ConfigError("data.crop must be a positive multiple of " +
                      std::to_string(model.spatial_divisor()));
  if (data.batch < 1) throw ConfigError("data.batch must be >= 1");
  if (checkpoint_every <= 0) throw ConfigError("checkpoint_every must be > 0");
  if (check_folders) {
    if (!fs::is_directory(data.clean_dir))
      throw ConfigError("data.clean_dir does not exist: " + data.clean_dir);
    if (!fs::is_directory(data.noisy_dir))
      throw ConfigError("data.noisy_dir does not exist: " + data.noisy_dir);
  }
}

RunConfig run_config_from_json(const json& j) {
  reject_unknown(j, {"model", "task", "data", "optimizer", "objective", "seed",
                     "checkpoint_every", "eval_every"},
                 "top level");
  RunConfig c;
  if (j.contains("model")) {
    const json& m = j.at("model");
    reject_unknown(m,
                   {"num_layers", "base_channels", "latent_channels", "convs_per_block",
                    "log_sigma_clamp", "input_channels"},
                   "model");
    get_to(m, "num_layers", c.model.num_layers);
    get_to(m, "base_channels", c.model.base_channels);
    get_to(m, "latent_channels", c.model.latent_channels);
    get_to(m, "convs_per_block", c.model.convs_per_block);
    get_to(m, "input_channels", c.model.input_channels);
    if (m.contains("log_sigma_clamp")) {
      const json& cl = m.at("log_sigma_clamp");
      if (!cl.is_array() || cl.size() != 2)
        throw ConfigError("model.log_sigma_clamp must be [min, max]");
      c.model.log_sigma_min = cl.at(0).get<double>();
      c.model.log_sigma_max = cl.at(1).get<double>();
    }
  }
  if (j.contains("task")) {
    const json& t = j.at("task");
    reject_unknown(
        t, {"task", "sigma_x", "sigma_y", "sr_scale", "gamma_range", "c_range",
            "normalize_channels"},
        "task");
    if (t.contains("task")) c.task.task = task_from_string(t.at("task").get<std::string>());
    if (t.contains("sigma_x")) c.task.sigma_x = sigma_from_json(t.at("sigma_x"));
    get_to(t, "sigma_y", c.task.sigma_y);
    get_to(t, "sr_scale", c.task.sr_scale);
    get_to(t, "normalize_channels", c.task.normalize_channels);
    if (t.contains("gamma_range")) {
      c.task.gamma_lo = t.at("gamma_range").at(0).get<double>();
      c.task.gamma_hi = t.at("gamma_range").at(1).get<double>();
    }
    if (t.contains("c_range")) {
      c.task.c_lo = t.at("c_range").at(0).get<double>();
      c.task.c_hi = t.at("c_range").at(1).get<double>();
    }
  }
  if (j.contains("data")) {
    const json& d = j.at("data");
    reject_unknown(d, {"clean_dir", "noisy_dir", "crop", "batch"}, "data");
    get_to(d, "clean_dir", c.data.clean_dir);
    get_to(d, "noisy_dir", c.data.noisy_dir);
    get_to(d, "crop", c.data.crop);
    get_to(d, "batch", c.data.batch);
    c.data.clean_dir = resolve_dir(c.data.clean_dir);
    c.data.noisy_dir = resolve_dir(c.data.noisy_dir);
  }
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    reject_unknown(o, {"name", "lr", "halve_at", "total_iters", "beta1", "beta2", "eps"},
                   "optimizer");
    if (o.contains("name") && o.at("name").get<std::string>() != "adam")
      throw ConfigError("optimizer.name: only 'adam' is supported");
    get_to(o, "lr", c.optimizer.lr);
    get_to(o, "halve_at", c.optimizer.halve_at);
    get_to(o, "total_iters", c.optimizer.total_iters);
    get_to(o, "beta1", c.optimizer.beta1);
    get_to(o, "beta2", c.optimizer.beta2);
    get_to(o, "eps", c.optimizer.eps);
  }
  if (j.contains("objective")) {
    const json& o = j.at("objective");
    reject_unknown(o, {"kl_scale", "anneal_warmup", "preprocess_degradation_input"}, "objective");
    get_to(o, "kl_scale", c.objective.kl_scale);
    get_to(o, "anneal_warmup", c.objective.anneal_warmup);
    get_to(o, "preprocess_degradation_input", c.objective.preprocess_degradation_input);
  }
  get_to(j, "seed", c.seed);
  get_to(j, "checkpoint_every", c.checkpoint_every);
  get_to(j, "eval_every", c.eval_every);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

json run_config_to_json(const RunConfig& c) {
  json j;
  j["model"] = {{"num_layers", c.model.num_layers},
                {"base_channels", c.model.base_channels},
                {"latent_channels", c.model.resolved_latent_channels()},
                {"convs_per_block", c.model.convs_per_block},
                {"log_sigma_clamp", {c.model.log_sigma_min, c.model.log_sigma_max}},
                {"input_channels", c.model.input_channels}};
  j["task"] = {{"task", to_string(c.task.task)},
               {"sigma_x", sigma_to_json(c.task.sigma_x)},
               {"sigma_y", c.task.sigma_y},
               {"sr_scale", c.task.sr_scale},
               {"gamma_range", {c.task.gamma_lo, c.task.gamma_hi}},
               {"c_range", {c.task.c_lo, c.task.c_hi}},
               {"normalize_channels", c.task.normalize_channels}};
  j["data"] = {{"clean_dir", c.data.clean_dir},
               {"noisy_dir", c.data.noisy_dir},
               {"crop", c.data.crop},
               {"batch", c.data.batch}};
  j["optimizer"] = {{"name", "adam"},
                    {"lr", c.optimizer.lr},
                    {"halve_at", c.optimizer.halve_at},
                    {"total_iters", c.optimizer.total_iters},
                    {"beta1", c.optimizer.beta1},
                    {"beta2", c.optimizer.beta2},
                    {"eps", c.optimizer.eps}};
  j["objective"] = {{"kl_scale", c.objective.kl_scale},
                    {"anneal_warmup", c.objective.anneal_warmup},
                    {"preprocess_degradation_input", c.objective.preprocess_degradation_input}};
  j["seed"] = c.seed;
  j["checkpoint_every"] = c.checkpoint_every;
  j["eval_every"] = c.eval_every;
  return j;
}

}  // namespace ludvae
