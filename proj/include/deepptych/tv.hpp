// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include "deepptych/error.hpp"
#include "deepptych/tensor.hpp"

namespace deepptych {

struct TvValueGrad {
  double value = 0.0;
  RealImage grad;
};

/// Anisotropic Charbonnier total variation
///   sum_{r,c} (sqrt(dh^2 + eps^2) - eps) + (sqrt(dv^2 + eps^2) - eps)
/// over forward differences with a replicated border (the last row and
/// column contribute zero differences), together with its exact gradient.
inline TvValueGrad tv_value_grad(const RealImage& x, double eps) {
  if (!(eps > 0.0)) throw ConfigError("TV smoothing epsilon must be positive");
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  TvValueGrad out{0.0, RealImage(rows, cols, 0.0)};
  const double eps2 = eps * eps;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c + 1 < cols) {
        const double d = x(r, c + 1) - x(r, c);
        const double s = std::sqrt(d * d + eps2);
        out.value += s - eps;
        const double slope = d / s;
        out.grad(r, c + 1) += slope;
        out.grad(r, c) -= slope;
      }
      if (r + 1 < rows) {
        const double d = x(r + 1, c) - x(r, c);
        const double s = std::sqrt(d * d + eps2);
        out.value += s - eps;
        const double slope = d / s;
        out.grad(r + 1, c) += slope;
        out.grad(r, c) -= slope;
      }
    }
  }
  return out;
}

}  // namespace deepptych
