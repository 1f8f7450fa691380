#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ludvae/rng.hpp"
#include "ludvae/tensor.hpp"

namespace ludvae {

enum class Task { denoise, super_resolution, low_light };

std::string to_string(Task t);
Task task_from_string(const std::string& s);

/// A noise level that is either fixed or drawn uniformly per image.
/// Values are in [0,255] pixel units (divided by 255 when applied to [0,1]
/// images).
struct SigmaSpec {
  double lo = 0.0;
  double hi = 0.0;

  SigmaSpec() = default;
  explicit SigmaSpec(double fixed) : lo(fixed), hi(fixed) {}
  SigmaSpec(double lo_, double hi_) : lo(lo_), hi(hi_) {}

  bool is_range() const { return hi > lo; }
  double draw(Rng& rng) const { return is_range() ? rng.uniform(lo, hi) : lo; }
  void validate(const char* name) const;
};

struct TaskConfig {
  Task task = Task::denoise;
  SigmaSpec sigma_x{15.0};
  double sigma_y = 10.0;
  int sr_scale = 4;                       // super_resolution only
  double gamma_lo = 1.5, gamma_hi = 2.5;  // low_light only
  double c_lo = 0.15, c_hi = 0.4;
  bool normalize_channels = false;

  void validate() const;
};

/// h: image + N(0, (sigma/255)^2) i.i.d. per element. Not clamped — the
/// model sees the raw sum.
Image inject_gaussian(const Image& image, double sigma, Rng& rng);

/// Antialiased bicubic downsampling (a = -0.5, kernel width scaled by the
/// factor, symmetric boundary). Integer factor; dims must divide.
Image bicubic_downsample(const Image& image, int scale);

/// c * image^gamma elementwise; image must lie in [0,1].
Image gamma_correct(const Image& image, double c, double gamma);

struct ChannelStats {
  std::vector<double> mean, stddev;
};

ChannelStats compute_channel_stats(const std::vector<Image>& images);

/// Per-channel affine map taking `from`-distributed data to `to` statistics.
Image channel_normalize(const Image& image, const ChannelStats& from, const ChannelStats& to);
/// Exact inverse of channel_normalize with the same argument order.
Image channel_denormalize(const Image& image, const ChannelStats& from, const ChannelStats& to);

/// Per-image degradation parameters recorded while constructing domains.
struct DomainRecord {
  std::string path;      // produced (or referenced) file
  std::string source;    // original file
  double c = 0.0, gamma = 0.0;
  std::uint64_t seed = 0;
};

struct PreparedDomains {
  std::vector<Image> source;  // clean-side training domain
  std::vector<Image> target;  // corrupted-side training domain
  std::vector<std::string> source_paths, target_paths;
  std::vector<DomainRecord> records;  // sidecar manifest content
  std::optional<ChannelStats> source_stats, target_stats;  // set when normalizing
};

/// Builds the two unpaired training domains for a task:
///   denoise          — both folders as-is;
///   super_resolution — clean side bicubic-downsampled by sr_scale;
///   low_light        — clean side gamma-corrected with per-image (c, gamma).
/// Channel normalization (when configured) maps the corrupted domain onto the
/// clean domain's per-channel statistics. A manifest of per-image parameters
/// is written to `manifest_path` when non-empty.
PreparedDomains prepare_domains(const std::string& clean_folder,
                                const std::string& corrupted_folder, const TaskConfig& config,
                                std::uint64_t seed, const std::string& manifest_path = "");

}  // namespace ludvae
