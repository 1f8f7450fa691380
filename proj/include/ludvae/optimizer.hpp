#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "ludvae/errors.hpp"

namespace ludvae {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment slots are kept in double regardless of
/// the parameter scalar type.
template <typename Scalar>
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, AdamConfig cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

  const AdamConfig& config() const { return cfg_; }
  long step_count() const { return t_; }
  std::vector<double>& moment1() { return m_; }
  std::vector<double>& moment2() { return v_; }
  void set_step_count(long t) { t_ = t; }

  void step(std::vector<Scalar>& params, const std::vector<Scalar>& grads, double lr) {
    if (params.size() != m_.size() || grads.size() != m_.size())
      throw DimensionError("adam: parameter/gradient size mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = static_cast<double>(grads[i]);
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m_[i] / bc1;
      const double vhat = v_[i] / bc2;
      params[i] -= static_cast<Scalar>(lr * mhat / (std::sqrt(vhat) + cfg_.eps));
    }
  }

 private:
  AdamConfig cfg_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

}  // namespace ludvae
