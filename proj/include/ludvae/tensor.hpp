#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ludvae/errors.hpp"

namespace ludvae {

/// Dense image-shaped array with channel/height/width semantics.
/// Storage is planar (channel-major), value type is the template scalar.
/// Pixel values follow the [0,1] convention at module boundaries; internal
/// feature maps are unbounded.
template <typename Scalar>
class Tensor {
 public:
  Tensor() = default;
  Tensor(int channels, int height, int width, Scalar fill = Scalar(0))
      : channels_(channels), height_(height), width_(width) {
    if (channels < 0 || height < 0 || width < 0)
      throw DimensionError("tensor dimensions must be non-negative");
    data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
  }

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator[](std::size_t i) { return data_[i]; }
  Scalar operator[](std::size_t i) const { return data_[i]; }

  Scalar& at(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  Scalar at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }

  /// Pointer to the start of one channel plane.
  Scalar* plane(int c) { return data_.data() + static_cast<std::size_t>(c) * height_ * width_; }
  const Scalar* plane(int c) const {
    return data_.data() + static_cast<std::size_t>(c) * height_ * width_;
  }

  bool same_shape(const Tensor& o) const {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }

  std::string shape_str() const {
    return std::to_string(height_) + "x" + std::to_string(width_) + "x" + std::to_string(channels_);
  }

  void fill(Scalar v) { std::fill(data_.begin(), data_.end(), v); }

  void add(const Tensor& o) {
    check_same_shape(o, "add");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  }

  void scale(Scalar s) {
    for (auto& v : data_) v *= s;
  }

  bool all_finite() const {
    for (Scalar v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  double sum() const {
    double s = 0.0;
    for (Scalar v : data_) s += static_cast<double>(v);
    return s;
  }

  double sum_squares() const {
    double s = 0.0;
    for (Scalar v : data_) s += static_cast<double>(v) * static_cast<double>(v);
    return s;
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(channels_, height_, width_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<Other>(data_[i]);
    return out;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.channels_ == b.channels_ && a.height_ == b.height_ && a.width_ == b.width_ &&
           a.data_ == b.data_;
  }

 private:
  void check_same_shape(const Tensor& o, const char* op) const {
    if (!same_shape(o))
      throw DimensionError(std::string(op) + ": shape mismatch " + shape_str() + " vs " +
                           o.shape_str());
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<Scalar> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

/// Images move through the pipeline as float tensors in [0,1].
using Image = Tensor<float>;

}  // namespace ludvae
