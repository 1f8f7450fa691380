#pragma once

#include <string>
#include <vector>

#include "ludvae/rng.hpp"
#include "ludvae/tensor.hpp"

namespace ludvae {

struct IngestionEntry {
  std::string path;
  int width = 0, height = 0, channels = 0;
  bool accepted = false;
  std::string reason;  // empty when accepted
};

struct IngestionResult {
  std::vector<Image> images;
  std::vector<std::string> paths;
  std::vector<IngestionEntry> manifest;
};

/// Globs {png,jpg,tif} in `folder` (sorted by name), decodes what it can and
/// lists the rest as rejected. Throws IoError when the folder is missing or
/// contributes no files at all.
IngestionResult ingest_folder(const std::string& folder);

void write_ingestion_manifest(const std::string& path, const std::vector<IngestionEntry>& entries);

/// Two independent image collections with balanced sampling. Sampling never
/// associates a source index with a target index.
struct UnpairedDataset {
  std::vector<Image> source, target;
  std::vector<std::string> source_paths, target_paths;
  int crop_size = 64;
  int batch_size = 16;

  void validate(int spatial_divisor) const;
};

struct Batch {
  std::vector<Image> clean, corrupted;
};

/// One of the 8 dihedral transforms of a square image: k & 3 counter-clockwise
/// quarter turns, preceded by a horizontal flip when k >= 4.
Image apply_dihedral(const Image& img, int k);

struct Augmented {
  Image image;
  int transform = 0;
};

/// Uniformly drawn dihedral transform; the index is recorded. Non-square
/// input is an argument error.
Augmented augment(const Image& crop, Rng& rng);

/// `batch_size` random crops per domain, uniformly with replacement,
/// independently flipped/rotated. All randomness comes from `rng` in a fixed
/// order (source crops first), so a seed pins the full batch sequence.
Batch sample_batch(const UnpairedDataset& dataset, Rng& rng);

}  // namespace ludvae
