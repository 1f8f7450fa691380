#include "ludvae/synthesis.hpp"

#include <filesystem>
#include <fstream>

#include "ludvae/data.hpp"
#include "ludvae/errors.hpp"
#include "ludvae/image_io.hpp"
#include "ludvae/objective.hpp"

namespace fs = std::filesystem;

namespace ludvae {

std::string to_string(GenerationMethod m) {
  return m == GenerationMethod::C2N ? "C2N" : "N2C";
}

GenerationMethod generation_method_from_string(const std::string& s) {
  if (s == "C2N" || s == "c2n") return GenerationMethod::C2N;
  if (s == "N2C" || s == "n2c") return GenerationMethod::N2C;
  throw ConfigError("unknown generation method: " + s + " (expected C2N or N2C)");
}

void SynthesisConfig::validate() const {
  if (temperature < 0.0) throw ConfigError("synthesis.temperature must be >= 0");
  sigma_x.validate("synthesis.sigma_x");
  if (sigma_y < 0.0) throw ConfigError("synthesis.sigma_y must be >= 0");
}

namespace {

void check_model_state(const LudVae<float>& model) {
  for (float v : model.params().values())
    if (!std::isfinite(v)) throw NumericError("model parameters contain non-finite values");
}

}  // namespace

Image generate_c2n(const Image& x, const LudVae<float>& model, const SynthesisConfig& config,
                   Rng& rng) {
  config.validate();
  check_model_state(model);
  const double sx = config.sigma_x.draw(rng);
  Image hx = apply_h(x, sx, rng);
  auto content = model.encode_content(hx);
  auto degradation =
      model.sample_degradation_prior(x.height(), x.width(), config.temperature, rng);
  return model.decode_noisy(content, degradation);
}

Image generate_n2c(const Image& y, const LudVae<float>& model, const SynthesisConfig& config,
                   Rng& rng) {
  config.validate();
  check_model_state(model);
  Image hy = apply_h(y, config.sigma_y, rng);
  return model.decode_clean(model.encode_content(hy));
}

SynthesisManifest build_paired_dataset(const std::string& clean_folder,
                                       const std::string& out_dir, const LudVae<float>& model,
                                       const SynthesisConfig& config) {
  config.validate();
  IngestionResult input = ingest_folder(clean_folder);
  fs::create_directories(fs::path(out_dir) / "clean");
  fs::create_directories(fs::path(out_dir) / "degraded");

  SynthesisManifest manifest;
  manifest.path = (fs::path(out_dir) / "manifest.tsv").string();
  std::ofstream mf(manifest.path);
  if (!mf) throw IoError("cannot write manifest: " + manifest.path);
  mf << "filename\tsigma_x\ttemperature\tseed\tmethod\n";

  const std::string ext = config.format == OutputFormat::png8 ? ".png" : ".npy";
  for (std::size_t i = 0; i < input.images.size(); ++i) {
    const std::string stem = fs::path(input.paths[i]).stem().string();
    const std::string filename = stem + ext;
    const fs::path clean_path = fs::path(out_dir) / "clean" / filename;
    const fs::path degraded_path = fs::path(out_dir) / "degraded" / filename;
    if (fs::exists(clean_path) || fs::exists(degraded_path))
      throw IoError("filename collision in output: " + filename);

    PairRecord rec;
    rec.filename = filename;
    rec.temperature = config.temperature;
    rec.seed = Rng::mix(config.seed, Rng::hash(filename));
    rec.method = to_string(config.method);
    Rng rng(rec.seed);
    rec.sigma_x = config.sigma_x.draw(rng);

    SynthesisConfig per_file = config;
    per_file.sigma_x = SigmaSpec(rec.sigma_x);
    Image clean_out, degraded_out;
    if (config.method == GenerationMethod::C2N) {
      clean_out = input.images[i];
      degraded_out = generate_c2n(input.images[i], model, per_file, rng);
    } else {
      // N2C pairs: the ingested image plays the noisy side and the estimated
      // clean counterpart is generated.
      degraded_out = input.images[i];
      clean_out = generate_n2c(input.images[i], model, per_file, rng);
    }
    if (config.format == OutputFormat::png8) {
      write_png8(clean_path.string(), clean_out);
      write_png8(degraded_path.string(), degraded_out);
    } else {
      write_npy_float32(clean_path.string(), clean_out);
      write_npy_float32(degraded_path.string(), degraded_out);
    }
    mf << rec.filename << '\t' << rec.sigma_x << '\t' << rec.temperature << '\t' << rec.seed
       << '\t' << rec.method << '\n';
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

}  // namespace ludvae
