// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "deepptych/error.hpp"

namespace deepptych {

struct AdamParams {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

enum class OptimizerKind { adam, gradient_descent };

/// Adam with bias correction. One instance per parameter block.
class Adam {
 public:
  Adam(std::size_t size, AdamParams params) : params_(params), m_(size, 0.0), v_(size, 0.0) {
    if (!(params.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(params.beta1 > 0.0 && params.beta1 < 1.0 && params.beta2 > 0.0 && params.beta2 < 1.0)) {
      throw ConfigError("Adam betas must lie in (0, 1)");
    }
  }

  void step(std::span<double> x, std::span<const double> grad) {
    ++t_;
    beta1_t_ *= params_.beta1;
    beta2_t_ *= params_.beta2;
    const double c1 = 1.0 - beta1_t_;
    const double c2 = 1.0 - beta2_t_;
    for (std::size_t i = 0; i < x.size(); ++i) {
      m_[i] = params_.beta1 * m_[i] + (1.0 - params_.beta1) * grad[i];
      v_[i] = params_.beta2 * v_[i] + (1.0 - params_.beta2) * grad[i] * grad[i];
      const double m_hat = m_[i] / c1;
      const double v_hat = v_[i] / c2;
      x[i] -= params_.learning_rate * m_hat / (std::sqrt(v_hat) + params_.epsilon);
    }
  }

  [[nodiscard]] std::size_t steps() const noexcept { return t_; }

 private:
  AdamParams params_;
  std::vector<double> m_;
  std::vector<double> v_;
  double beta1_t_ = 1.0;
  double beta2_t_ = 1.0;
  std::size_t t_ = 0;
};

/// Adam or plain gradient descent behind one interface.
class Stepper {
 public:
  Stepper(std::size_t size, OptimizerKind kind, AdamParams params)
      : kind_(kind), rate_(params.learning_rate), adam_(size, params) {}

  void step(std::span<double> x, std::span<const double> grad) {
    if (kind_ == OptimizerKind::adam) {
      adam_.step(x, grad);
      return;
    }
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= rate_ * grad[i];
  }

 private:
  OptimizerKind kind_;
  double rate_;
  Adam adam_;
};

}  // namespace deepptych
