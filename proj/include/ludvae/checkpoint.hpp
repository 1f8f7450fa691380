#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "ludvae/model.hpp"
#include "ludvae/optimizer.hpp"

namespace ludvae {

struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> data;
};

/// Versioned single-file bundle: parameters, optimizer state, iteration
/// counter, RNG seed and a config snapshot, protected by a SHA-256 trailer.
struct CheckpointData {
  std::uint32_t format_version = 1;
  long iteration = 0;
  std::uint64_t master_seed = 0;
  long adam_step = 0;
  nlohmann::json config;
  std::vector<NamedTensor> tensors;
};

void save_checkpoint(const std::string& path, const CheckpointData& data);

/// Verifies the content hash and format version before returning; throws
/// CheckpointError otherwise.
CheckpointData load_checkpoint(const std::string& path);

CheckpointData snapshot_checkpoint(const LudVae<float>& model, const Adam<float>& adam,
                                   long iteration, std::uint64_t master_seed,
                                   const nlohmann::json& config);

/// Restores parameters (and optimizer state when `adam` is non-null) into an
/// already-built model; parameter names and shapes must match exactly.
void restore_checkpoint(const CheckpointData& data, LudVae<float>& model, Adam<float>* adam);

}  // namespace ludvae
