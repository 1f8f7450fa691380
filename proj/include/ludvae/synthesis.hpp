#pragma once

#include <string>
#include <vector>

#include "ludvae/model.hpp"
#include "ludvae/preprocess.hpp"
#include "ludvae/rng.hpp"

namespace ludvae {

enum class GenerationMethod { C2N, N2C };

std::string to_string(GenerationMethod m);
GenerationMethod generation_method_from_string(const std::string& s);

enum class OutputFormat { png8, float32 };

struct SynthesisConfig {
  GenerationMethod method = GenerationMethod::C2N;
  double temperature = 1.0;
  SigmaSpec sigma_x{15.0};  // pre-process level at generation time
  double sigma_y = 10.0;    // used by the N2C content path
  OutputFormat format = OutputFormat::png8;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Clean-to-noisy: content code of h(x) combined with a fresh prior draw of
/// the degradation code. Output is unclamped; clamping happens at export.
Image generate_c2n(const Image& x, const LudVae<float>& model, const SynthesisConfig& config,
                   Rng& rng);

/// Noisy-to-clean: decode the content code of h(y).
Image generate_n2c(const Image& y, const LudVae<float>& model, const SynthesisConfig& config,
                   Rng& rng);

struct PairRecord {
  std::string filename;
  double sigma_x = 0.0;
  double temperature = 0.0;
  std::uint64_t seed = 0;
  std::string method;
};

struct SynthesisManifest {
  std::string path;  // manifest file location
  std::vector<PairRecord> records;
};

/// Writes out_dir/{clean,degraded}/<same-filename> for every image in
/// clean_folder, plus a line-delimited manifest. Per-file randomness derives
/// from (config.seed, filename hash), so outputs are order- and
/// parallelism-independent and reruns are byte-identical.
SynthesisManifest build_paired_dataset(const std::string& clean_folder,
                                       const std::string& out_dir, const LudVae<float>& model,
                                       const SynthesisConfig& config);

}  // namespace ludvae
