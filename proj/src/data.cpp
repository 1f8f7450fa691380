#include "ludvae/data.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "ludvae/errors.hpp"
#include "ludvae/image_io.hpp"

namespace fs = std::filesystem;

namespace ludvae {

namespace {

bool has_image_extension(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e == ".png" || e == ".jpg" || e == ".jpeg" || e == ".tif" || e == ".tiff";
}

}  // namespace

IngestionResult ingest_folder(const std::string& folder) {
  if (!fs::is_directory(folder)) throw IoError("not a directory: " + folder);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(folder))
    if (entry.is_regular_file() && has_image_extension(entry.path())) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no images found in " + folder);

  IngestionResult result;
  for (const auto& f : files) {
    IngestionEntry e;
    e.path = f.string();
    if (f.extension() != ".png" && f.extension() != ".PNG") {
      e.reason = "unsupported format (only PNG is decoded)";
      result.manifest.push_back(std::move(e));
      continue;
    }
    try {
      Image img = read_png(f.string());
      e.width = img.width();
      e.height = img.height();
      e.channels = img.channels();
      e.accepted = true;
      result.images.push_back(std::move(img));
      result.paths.push_back(f.string());
    } catch (const std::exception& ex) {
      e.reason = ex.what();
    }
    result.manifest.push_back(std::move(e));
  }
  if (result.images.empty()) throw IoError("no decodable images in " + folder);
  return result;
}

void write_ingestion_manifest(const std::string& path,
                              const std::vector<IngestionEntry>& entries) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write manifest: " + path);
  f << "path\twidth\theight\tchannels\tstatus\treason\n";
  for (const auto& e : entries)
    f << e.path << '\t' << e.width << '\t' << e.height << '\t' << e.channels << '\t'
      << (e.accepted ? "accepted" : "rejected") << '\t' << e.reason << '\n';
}

void UnpairedDataset::validate(int spatial_divisor) const {
  if (source.empty() || target.empty())
    throw ConfigError("unpaired dataset: both domains must be non-empty");
  if (crop_size < 1 || crop_size % spatial_divisor != 0)
    throw ConfigError("crop_size " + std::to_string(crop_size) + " must be divisible by " +
                      std::to_string(spatial_divisor));
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  for (const auto* domain : {&source, &target})
    for (const auto& img : *domain)
      if (img.height() < crop_size || img.width() < crop_size)
        throw DimensionError(
            "dataset holds an image smaller than crop_size; undersized images "
            "must be rejected at ingestion");
}

Image apply_dihedral(const Image& img, int k) {
  if (img.height() != img.width())
    throw std::invalid_argument("apply_dihedral: crop must be square, got " + img.shape_str());
  const int n = img.height();
  const bool flip = (k & 4) != 0;
  const int rot = k & 3;
  Image out(img.channels(), n, n);
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        int sx = flip ? (n - 1 - x) : x;
        int sy = y;
        for (int r = 0; r < rot; ++r) {
          // one ccw quarter turn: out(y, x) = in(x, n-1-y)
          const int ty = sx, tx = n - 1 - sy;
          sy = ty;
          sx = tx;
        }
        out.at(c, y, x) = img.at(c, sy, sx);
      }
  return out;
}

Augmented augment(const Image& crop, Rng& rng) {
  const int k = static_cast<int>(rng.uniform_index(8));
  return Augmented{apply_dihedral(crop, k), k};
}

namespace {

Image extract_crop(const Image& img, int y0, int x0, int size) {
  Image out(img.channels(), size, size);
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
  return out;
}

void sample_domain(const std::vector<Image>& pool, int crop, int batch, Rng& rng,
                   std::vector<Image>& out) {
  out.reserve(batch);
  for (int b = 0; b < batch; ++b) {
    const auto& img = pool[rng.uniform_index(pool.size())];
    const int y0 = static_cast<int>(rng.uniform_index(img.height() - crop + 1));
    const int x0 = static_cast<int>(rng.uniform_index(img.width() - crop + 1));
    const int k = static_cast<int>(rng.uniform_index(8));
    out.push_back(apply_dihedral(extract_crop(img, y0, x0, crop), k));
  }
}

}  // namespace

Batch sample_batch(const UnpairedDataset& dataset, Rng& rng) {
  Batch batch;
  sample_domain(dataset.source, dataset.crop_size, dataset.batch_size, rng, batch.clean);
  sample_domain(dataset.target, dataset.crop_size, dataset.batch_size, rng, batch.corrupted);
  return batch;
}

}  // namespace ludvae
