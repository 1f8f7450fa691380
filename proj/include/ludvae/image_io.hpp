#pragma once

#include <string>

#include "ludvae/tensor.hpp"

namespace ludvae {

/// Decodes an 8- or 16-bit PNG (gray or RGB, alpha stripped, palette
/// expanded) to a float tensor in [0,1]. Throws IoError with the path on
/// failure.
Image read_png(const std::string& path);

/// Clamps to [0,1], quantizes to 8 bits (round half up) and writes a PNG.
/// Output bytes are deterministic: fixed compression level, no filtering.
void write_png8(const std::string& path, const Image& img);

/// 16-bit variant for near-lossless intermediates.
void write_png16(const std::string& path, const Image& img);

/// float32 container (NumPy .npy, shape H x W x C, little-endian).
void write_npy_float32(const std::string& path, const Image& img);
Image read_npy_float32(const std::string& path);

/// Round-half-up quantization used by the 8-bit export path.
inline unsigned char quantize8(float v) {
  float c = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
  return static_cast<unsigned char>(c * 255.f + 0.5f);
}

}  // namespace ludvae
