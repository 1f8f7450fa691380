#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <string>
#include <vector>

#include "ludvae/rng.hpp"
#include "ludvae/tensor.hpp"

namespace ludvae::nn {

/// One named parameter block inside a flat arena. Convolution weights are
/// stored row-major as [out_c, in_c * k * k], biases as [out_c].
struct ParamSpan {
  std::string name;
  std::size_t offset = 0;
  std::vector<int> shape;
  std::size_t count() const {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
  }
};

/// Flat parameter arena. All model parameters (and their gradients, Adam
/// slots, finite-difference perturbations) are indexed through one vector,
/// which keeps the optimizer, checkpointing and gradient checks trivial.
template <typename Scalar>
class ParamStore {
 public:
  std::size_t add(const std::string& name, std::vector<int> shape) {
    ParamSpan s;
    s.name = name;
    s.offset = values_.size();
    s.shape = std::move(shape);
    values_.resize(s.offset + s.count(), Scalar(0));
    spans_.push_back(std::move(s));
    return spans_.size() - 1;
  }

  std::size_t size() const { return values_.size(); }
  const std::vector<ParamSpan>& spans() const { return spans_; }
  std::vector<Scalar>& values() { return values_; }
  const std::vector<Scalar>& values() const { return values_; }
  Scalar* data() { return values_.data(); }
  const Scalar* data() const { return values_.data(); }

  const ParamSpan* find(const std::string& name) const {
    for (const auto& s : spans_)
      if (s.name == name) return &s;
    return nullptr;
  }

 private:
  std::vector<ParamSpan> spans_;
  std::vector<Scalar> values_;
};

template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using MapMat = Eigen::Map<RowMat<Scalar>>;
template <typename Scalar>
using ConstMapMat = Eigen::Map<const RowMat<Scalar>>;

/// Square stride-1 convolution with zero padding k/2 (so spatial size is
/// preserved). Parameters live in an external ParamStore.
struct ConvSpec {
  int in_c = 0;
  int out_c = 0;
  int k = 3;
  std::size_t w_off = 0;
  std::size_t b_off = 0;
  std::string name;

  std::size_t weight_count() const {
    return static_cast<std::size_t>(out_c) * in_c * k * k;
  }
};

template <typename Scalar>
ConvSpec make_conv(ParamStore<Scalar>& store, const std::string& name, int in_c, int out_c,
                   int k) {
  ConvSpec c;
  c.in_c = in_c;
  c.out_c = out_c;
  c.k = k;
  c.name = name;
  store.add(name + ".weight", {out_c, in_c, k, k});
  c.w_off = store.spans().back().offset;
  store.add(name + ".bias", {out_c});
  c.b_off = store.spans().back().offset;
  return c;
}

namespace detail {

template <typename Scalar>
std::vector<Scalar>& scratch_buffer() {
  thread_local std::vector<Scalar> buf;
  return buf;
}

// col layout: (in_c * k * k) rows by (H * W) columns, row-major.
template <typename Scalar>
void im2col(const Tensor<Scalar>& x, int k, Scalar* col) {
  const int h = x.height(), w = x.width(), c = x.channels();
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  std::size_t row = 0;
  for (int ic = 0; ic < c; ++ic) {
    const Scalar* plane = x.plane(ic);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++row) {
        Scalar* dst = col + row * hw;
        const int dy = ky - pad, dx = kx - pad;
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) {
            std::fill(dst + static_cast<std::size_t>(y) * w,
                      dst + static_cast<std::size_t>(y + 1) * w, Scalar(0));
            continue;
          }
          const Scalar* src = plane + static_cast<std::size_t>(sy) * w;
          Scalar* out = dst + static_cast<std::size_t>(y) * w;
          const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
          for (int xx = 0; xx < x0; ++xx) out[xx] = Scalar(0);
          for (int xx = x0; xx < x1; ++xx) out[xx] = src[xx + dx];
          for (int xx = x1; xx < w; ++xx) out[xx] = Scalar(0);
        }
      }
    }
  }
}

template <typename Scalar>
void col2im_add(const Scalar* col, int c, int h, int w, int k, Tensor<Scalar>& dx) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  std::size_t row = 0;
  for (int ic = 0; ic < c; ++ic) {
    Scalar* plane = dx.plane(ic);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++row) {
        const Scalar* src = col + row * hw;
        const int dy = ky - pad, dx_ = kx - pad;
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          Scalar* out = plane + static_cast<std::size_t>(sy) * w;
          const Scalar* in = src + static_cast<std::size_t>(y) * w;
          const int x0 = std::max(0, -dx_), x1 = std::min(w, w - dx_);
          for (int xx = x0; xx < x1; ++xx) out[xx + dx_] += in[xx];
        }
      }
    }
  }
}

}  // namespace detail

template <typename Scalar>
Tensor<Scalar> conv_forward(const ConvSpec& c, const Scalar* params, const Tensor<Scalar>& x) {
  if (x.channels() != c.in_c)
    throw DimensionError(c.name + ": expected " + std::to_string(c.in_c) + " input channels, got " +
                         std::to_string(x.channels()));
  const int h = x.height(), w = x.width();
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  Tensor<Scalar> y(c.out_c, h, w);
  ConstMapMat<Scalar> wm(params + c.w_off, c.out_c, static_cast<std::size_t>(c.in_c) * c.k * c.k);
  MapMat<Scalar> ym(y.data(), c.out_c, hw);
  if (c.k == 1) {
    ConstMapMat<Scalar> xm(x.data(), c.in_c, hw);
    ym.noalias() = wm * xm;
  } else {
    auto& buf = detail::scratch_buffer<Scalar>();
    buf.resize(static_cast<std::size_t>(c.in_c) * c.k * c.k * hw);
    detail::im2col(x, c.k, buf.data());
    ConstMapMat<Scalar> colm(buf.data(), static_cast<std::size_t>(c.in_c) * c.k * c.k, hw);
    ym.noalias() = wm * colm;
  }
  const Scalar* b = params + c.b_off;
  for (int oc = 0; oc < c.out_c; ++oc) ym.row(oc).array() += b[oc];
  return y;
}

/// Accumulates parameter gradients into `grad` (same layout as the store) and,
/// when `dx` is non-null, input gradients into `*dx` (must be zero-initialised
/// or hold a partial accumulation of the right shape).
template <typename Scalar>
void conv_backward(const ConvSpec& c, const Scalar* params, const Tensor<Scalar>& x,
                   const Tensor<Scalar>& dy, Tensor<Scalar>* dx, Scalar* grad) {
  const int h = x.height(), w = x.width();
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  const std::size_t kk = static_cast<std::size_t>(c.in_c) * c.k * c.k;
  ConstMapMat<Scalar> dym(dy.data(), c.out_c, hw);
  MapMat<Scalar> dwm(grad + c.w_off, c.out_c, kk);
  Scalar* db = grad + c.b_off;
  for (int oc = 0; oc < c.out_c; ++oc) db[oc] += dym.row(oc).sum();

  if (c.k == 1) {
    ConstMapMat<Scalar> xm(x.data(), c.in_c, hw);
    dwm.noalias() += dym * xm.transpose();
    if (dx) {
      ConstMapMat<Scalar> wm(params + c.w_off, c.out_c, kk);
      MapMat<Scalar> dxm(dx->data(), c.in_c, hw);
      dxm.noalias() += wm.transpose() * dym;
    }
    return;
  }

  auto& buf = detail::scratch_buffer<Scalar>();
  buf.resize(kk * hw);
  detail::im2col(x, c.k, buf.data());
  ConstMapMat<Scalar> colm(buf.data(), kk, hw);
  dwm.noalias() += dym * colm.transpose();
  if (dx) {
    // Reuse the scratch for dcol; the GEMM result overwrites it afterwards.
    thread_local std::vector<Scalar> dcol;
    dcol.resize(kk * hw);
    MapMat<Scalar> dcolm(dcol.data(), kk, hw);
    ConstMapMat<Scalar> wm(params + c.w_off, c.out_c, kk);
    dcolm.noalias() = wm.transpose() * dym;
    detail::col2im_add(dcol.data(), c.in_c, h, w, c.k, *dx);
  }
}

template <typename Scalar>
void relu_inplace(Tensor<Scalar>& x) {
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] < Scalar(0)) x[i] = Scalar(0);
}

/// dy is masked in place using the post-activation output.
template <typename Scalar>
void relu_backward_inplace(const Tensor<Scalar>& y, Tensor<Scalar>& dy) {
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] <= Scalar(0)) dy[i] = Scalar(0);
}

/// 2x2 mean pooling, stride 2. Input dims must be even.
template <typename Scalar>
Tensor<Scalar> avgpool2(const Tensor<Scalar>& x) {
  if (x.height() % 2 != 0 || x.width() % 2 != 0)
    throw DimensionError("avgpool2: spatial dims must be even, got " + x.shape_str());
  const int h = x.height() / 2, w = x.width() / 2;
  Tensor<Scalar> y(x.channels(), h, w);
  for (int c = 0; c < x.channels(); ++c)
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx)
        y.at(c, yy, xx) = (x.at(c, 2 * yy, 2 * xx) + x.at(c, 2 * yy, 2 * xx + 1) +
                           x.at(c, 2 * yy + 1, 2 * xx) + x.at(c, 2 * yy + 1, 2 * xx + 1)) /
                          Scalar(4);
  return y;
}

template <typename Scalar>
void avgpool2_backward(const Tensor<Scalar>& dy, Tensor<Scalar>& dx) {
  const int h = dy.height(), w = dy.width();
  for (int c = 0; c < dy.channels(); ++c)
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx) {
        const Scalar g = dy.at(c, yy, xx) / Scalar(4);
        dx.at(c, 2 * yy, 2 * xx) += g;
        dx.at(c, 2 * yy, 2 * xx + 1) += g;
        dx.at(c, 2 * yy + 1, 2 * xx) += g;
        dx.at(c, 2 * yy + 1, 2 * xx + 1) += g;
      }
}

/// Repeated 2x2 mean pooling (`times` >= 0).
template <typename Scalar>
Tensor<Scalar> avgpool2_n(const Tensor<Scalar>& x, int times) {
  Tensor<Scalar> t = x;
  for (int i = 0; i < times; ++i) t = avgpool2(t);
  return t;
}

template <typename Scalar>
Tensor<Scalar> upsample_nearest2(const Tensor<Scalar>& x) {
  Tensor<Scalar> y(x.channels(), x.height() * 2, x.width() * 2);
  for (int c = 0; c < x.channels(); ++c)
    for (int yy = 0; yy < y.height(); ++yy)
      for (int xx = 0; xx < y.width(); ++xx) y.at(c, yy, xx) = x.at(c, yy / 2, xx / 2);
  return y;
}

template <typename Scalar>
void upsample_nearest2_backward(const Tensor<Scalar>& dy, Tensor<Scalar>& dx) {
  for (int c = 0; c < dy.channels(); ++c)
    for (int yy = 0; yy < dy.height(); ++yy)
      for (int xx = 0; xx < dy.width(); ++xx) dx.at(c, yy / 2, xx / 2) += dy.at(c, yy, xx);
}

template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.height() != b.height() || a.width() != b.width())
    throw DimensionError("concat: spatial mismatch " + a.shape_str() + " vs " + b.shape_str());
  Tensor<Scalar> y(a.channels() + b.channels(), a.height(), a.width());
  std::copy(a.data(), a.data() + a.size(), y.data());
  std::copy(b.data(), b.data() + b.size(), y.data() + a.size());
  return y;
}

template <typename Scalar>
void split_channels_backward(const Tensor<Scalar>& dy, Tensor<Scalar>& da, Tensor<Scalar>& db) {
  for (std::size_t i = 0; i < da.size(); ++i) da[i] += dy[i];
  for (std::size_t i = 0; i < db.size(); ++i) db[i] += dy[i + da.size()];
}

template <typename Scalar>
void fill_normal(Scalar* p, std::size_t n, double stddev, Rng& rng) {
  for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<Scalar>(rng.normal(0.0, stddev));
}

}  // namespace ludvae::nn
