#include "ludvae/preprocess.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ludvae/data.hpp"
#include "ludvae/errors.hpp"

namespace ludvae {

std::string to_string(Task t) {
  switch (t) {
    case Task::denoise: return "denoise";
    case Task::super_resolution: return "super_resolution";
    case Task::low_light: return "low_light";
  }
  return "?";
}

Task task_from_string(const std::string& s) {
  if (s == "denoise") return Task::denoise;
  if (s == "super_resolution") return Task::super_resolution;
  if (s == "low_light") return Task::low_light;
  throw ConfigError("unknown task: " + s);
}

void SigmaSpec::validate(const char* name) const {
  if (lo < 0.0 || hi < lo)
    throw ConfigError(std::string(name) + ": need 0 <= lo <= hi, got [" + std::to_string(lo) +
                      ", " + std::to_string(hi) + "]");
}

void TaskConfig::validate() const {
  sigma_x.validate("task.sigma_x");
  if (sigma_y < 0.0) throw ConfigError("task.sigma_y must be >= 0");
  if (task == Task::super_resolution && sr_scale < 2)
    throw ConfigError("task.sr_scale must be >= 2 for super_resolution");
  if (task == Task::low_light) {
    if (!(gamma_lo <= gamma_hi) || gamma_lo <= 0.0)
      throw ConfigError("task.gamma range invalid");
    if (!(c_lo <= c_hi) || c_lo <= 0.0) throw ConfigError("task.c range invalid");
  }
}

Image inject_gaussian(const Image& image, double sigma, Rng& rng) {
  if (sigma < 0.0) throw std::invalid_argument("inject_gaussian: sigma must be >= 0");
  Image out = image;
  if (sigma == 0.0) return out;
  const double s = sigma / 255.0;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] += static_cast<float>(rng.normal(0.0, s));
  return out;
}

namespace {

// Cubic convolution kernel, a = -0.5.
double cubic(double t) {
  const double a = -0.5;
  t = std::fabs(t);
  if (t <= 1.0) return (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0;
  if (t < 2.0) return a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a;
  return 0.0;
}

// Symmetric (mirror-with-edge) boundary index.
int reflect(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

struct ResampleTaps {
  std::vector<int> first;        // first source index per output position
  std::vector<double> weights;   // taps per output position, row-major
  int taps = 0;
};

// Antialiased taps for integer downsampling by `scale`: the kernel is
// stretched by the factor, support 4*scale, weights normalized.
ResampleTaps make_taps(int out_n, int scale) {
  ResampleTaps r;
  const double k = static_cast<double>(scale);
  const double support = 2.0 * k;
  r.taps = static_cast<int>(std::ceil(2.0 * support)) + 2;
  r.first.resize(out_n);
  r.weights.resize(static_cast<std::size_t>(out_n) * r.taps);
  for (int i = 0; i < out_n; ++i) {
    const double center = (i + 0.5) * k - 0.5;
    const int left = static_cast<int>(std::floor(center - support)) + 1;
    r.first[i] = left;
    double total = 0.0;
    for (int t = 0; t < r.taps; ++t) {
      const double w = cubic((center - (left + t)) / k) / k;
      r.weights[static_cast<std::size_t>(i) * r.taps + t] = w;
      total += w;
    }
    for (int t = 0; t < r.taps; ++t)
      r.weights[static_cast<std::size_t>(i) * r.taps + t] /= total;
  }
  return r;
}

}  // namespace

Image bicubic_downsample(const Image& image, int scale) {
  if (scale < 2) throw std::invalid_argument("bicubic_downsample: scale must be >= 2");
  if (image.height() % scale != 0 || image.width() % scale != 0)
    throw DimensionError("bicubic_downsample: dims " + image.shape_str() +
                         " must be divisible by scale " + std::to_string(scale));
  const int oh = image.height() / scale, ow = image.width() / scale;
  const ResampleTaps col_taps = make_taps(ow, scale);
  const ResampleTaps row_taps = make_taps(oh, scale);

  // Horizontal pass, then vertical.
  Image mid(image.channels(), image.height(), ow);
  for (int c = 0; c < image.channels(); ++c)
    for (int y = 0; y < image.height(); ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (int t = 0; t < col_taps.taps; ++t) {
          const int sx = reflect(col_taps.first[x] + t, image.width());
          acc += col_taps.weights[static_cast<std::size_t>(x) * col_taps.taps + t] *
                 image.at(c, y, sx);
        }
        mid.at(c, y, x) = static_cast<float>(acc);
      }
  Image out(image.channels(), oh, ow);
  for (int c = 0; c < image.channels(); ++c)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (int t = 0; t < row_taps.taps; ++t) {
          const int sy = reflect(row_taps.first[y] + t, image.height());
          acc += row_taps.weights[static_cast<std::size_t>(y) * row_taps.taps + t] *
                 mid.at(c, sy, x);
        }
        out.at(c, y, x) = static_cast<float>(acc);
      }
  return out;
}

Image gamma_correct(const Image& image, double c, double gamma) {
  if (c <= 0.0 || gamma <= 0.0)
    throw std::invalid_argument("gamma_correct: c and gamma must be > 0");
  Image out(image.channels(), image.height(), image.width());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const float v = image[i];
    if (v < 0.f || v > 1.f)
      throw std::invalid_argument("gamma_correct: image values must lie in [0,1]");
    out[i] = static_cast<float>(c * std::pow(static_cast<double>(v), gamma));
  }
  return out;
}

ChannelStats compute_channel_stats(const std::vector<Image>& images) {
  if (images.empty()) throw std::invalid_argument("compute_channel_stats: empty set");
  const int ch = images.front().channels();
  ChannelStats s;
  s.mean.assign(ch, 0.0);
  s.stddev.assign(ch, 0.0);
  std::vector<double> sum(ch, 0.0), sumsq(ch, 0.0);
  std::vector<std::size_t> count(ch, 0);
  for (const auto& img : images) {
    if (img.channels() != ch)
      throw DimensionError("compute_channel_stats: mixed channel counts");
    for (int c = 0; c < ch; ++c) {
      const float* p = img.plane(c);
      const std::size_t n = static_cast<std::size_t>(img.height()) * img.width();
      for (std::size_t i = 0; i < n; ++i) {
        sum[c] += p[i];
        sumsq[c] += static_cast<double>(p[i]) * p[i];
      }
      count[c] += n;
    }
  }
  for (int c = 0; c < ch; ++c) {
    s.mean[c] = sum[c] / static_cast<double>(count[c]);
    const double var = sumsq[c] / static_cast<double>(count[c]) - s.mean[c] * s.mean[c];
    s.stddev[c] = std::sqrt(std::max(0.0, var));
  }
  return s;
}

namespace {

void check_stats(const ChannelStats& st, const char* which) {
  for (double sd : st.stddev)
    if (sd <= 0.0)
      throw NumericError(std::string("channel_normalize: degenerate (zero std) channel in ") +
                         which + " statistics");
}

}  // namespace

Image channel_normalize(const Image& image, const ChannelStats& from, const ChannelStats& to) {
  check_stats(from, "source");
  check_stats(to, "destination");
  if (static_cast<int>(from.mean.size()) != image.channels())
    throw DimensionError("channel_normalize: channel count mismatch");
  Image out = image;
  for (int c = 0; c < image.channels(); ++c) {
    const double scale = to.stddev[c] / from.stddev[c];
    const double shift = to.mean[c] - from.mean[c] * scale;
    float* p = out.plane(c);
    const std::size_t n = static_cast<std::size_t>(image.height()) * image.width();
    for (std::size_t i = 0; i < n; ++i)
      p[i] = static_cast<float>(p[i] * scale + shift);
  }
  return out;
}

Image channel_denormalize(const Image& image, const ChannelStats& from, const ChannelStats& to) {
  return channel_normalize(image, to, from);
}

PreparedDomains prepare_domains(const std::string& clean_folder,
                                const std::string& corrupted_folder, const TaskConfig& config,
                                std::uint64_t seed, const std::string& manifest_path) {
  config.validate();
  IngestionResult clean = ingest_folder(clean_folder);
  IngestionResult corrupted = ingest_folder(corrupted_folder);

  PreparedDomains out;
  out.target = std::move(corrupted.images);
  out.target_paths = std::move(corrupted.paths);

  for (std::size_t i = 0; i < clean.images.size(); ++i) {
    DomainRecord rec;
    rec.source = clean.paths[i];
    rec.path = clean.paths[i];
    switch (config.task) {
      case Task::denoise:
        out.source.push_back(std::move(clean.images[i]));
        break;
      case Task::super_resolution:
        out.source.push_back(bicubic_downsample(clean.images[i], config.sr_scale));
        break;
      case Task::low_light: {
        rec.seed = Rng::mix(seed, Rng::hash(clean.paths[i]));
        Rng r(rec.seed);
        rec.c = r.uniform(config.c_lo, config.c_hi);
        rec.gamma = r.uniform(config.gamma_lo, config.gamma_hi);
        out.source.push_back(gamma_correct(clean.images[i], rec.c, rec.gamma));
        break;
      }
    }
    out.source_paths.push_back(clean.paths[i]);
    out.records.push_back(std::move(rec));
  }

  if (config.normalize_channels) {
    // Statistics are computed on the raw domains; the corrupted domain is
    // mapped onto the clean domain's per-channel moments.
    out.source_stats = compute_channel_stats(out.source);
    out.target_stats = compute_channel_stats(out.target);
    for (auto& img : out.target)
      img = channel_normalize(img, *out.target_stats, *out.source_stats);
  }

  if (!manifest_path.empty()) {
    std::ofstream f(manifest_path);
    if (!f) throw IoError("cannot write manifest: " + manifest_path);
    f << "path\tsource\tc\tgamma\tseed\n";
    for (const auto& r : out.records)
      f << r.path << '\t' << r.source << '\t' << r.c << '\t' << r.gamma << '\t' << r.seed << '\n';
  }
  return out;
}

}  // namespace ludvae
