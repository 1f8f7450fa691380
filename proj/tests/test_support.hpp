#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>

#include "ludvae/rng.hpp"
#include "ludvae/tensor.hpp"

namespace test_support {

/// Relative agreement check that stays meaningful near zero.
inline bool close_rel(double a, double b, double rel, double floor = 1e-9) {
  return std::fabs(a - b) <= rel * std::max({std::fabs(a), std::fabs(b), floor});
}

/// Central finite difference of a scalar function with respect to one slot.
template <typename Scalar, typename F>
double central_diff(F&& eval, Scalar& slot, double h) {
  const Scalar saved = slot;
  slot = static_cast<Scalar>(saved + h);
  const double fp = eval();
  slot = static_cast<Scalar>(saved - h);
  const double fm = eval();
  slot = saved;
  return (fp - fm) / (2.0 * h);
}

/// Direct zero-padded stride-1 convolution (independent oracle for the
/// im2col/GEMM path).
template <typename Scalar>
ludvae::Tensor<Scalar> naive_conv(const ludvae::Tensor<Scalar>& x, const Scalar* w,
                                  const Scalar* b, int out_c, int k) {
  const int pad = k / 2;
  ludvae::Tensor<Scalar> y(out_c, x.height(), x.width());
  for (int oc = 0; oc < out_c; ++oc)
    for (int yy = 0; yy < x.height(); ++yy)
      for (int xx = 0; xx < x.width(); ++xx) {
        double acc = b[oc];
        for (int ic = 0; ic < x.channels(); ++ic)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const int sy = yy + ky - pad, sx = xx + kx - pad;
              if (sy < 0 || sy >= x.height() || sx < 0 || sx >= x.width()) continue;
              acc += static_cast<double>(w[((oc * x.channels() + ic) * k + ky) * k + kx]) *
                     x.at(ic, sy, sx);
            }
        y.at(oc, yy, xx) = static_cast<Scalar>(acc);
      }
  return y;
}

template <typename Scalar>
ludvae::Tensor<Scalar> random_tensor(int c, int h, int w, ludvae::Rng& rng, double scale = 1.0) {
  ludvae::Tensor<Scalar> t(c, h, w);
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<Scalar>(rng.normal(0.0, scale));
  return t;
}

/// Unique scratch directory under the system temp root.
inline std::string fresh_temp_dir(const std::string& tag) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("ludvae_test_" + tag + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace test_support
