// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "deepptych/tensor.hpp"

namespace deepptych {

namespace detail {

/// Bit-reversal permutation and forward twiddles for one radix-2 length.
struct FftPlan {
  std::size_t n = 0;
  std::vector<std::size_t> bit_reverse;
  std::vector<Complex> twiddles;  // exp(-2 pi i k / n), k < n/2
  double scale = 1.0;             // 1/sqrt(n)

  explicit FftPlan(std::size_t length) : n(length), bit_reverse(length), twiddles(length / 2) {
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t rev = 0;
      for (std::size_t b = 0; b < bits; ++b) rev |= ((i >> b) & 1U) << (bits - 1 - b);
      bit_reverse[i] = rev;
    }
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddles[k] = std::polar(1.0, angle);
    }
    scale = 1.0 / std::sqrt(static_cast<double>(n));
  }
};

// Plans are immutable once built; the per-thread cache keeps lookups lock free.
inline const FftPlan& plan_for(std::size_t n) {
  thread_local std::unordered_map<std::size_t, FftPlan> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, FftPlan(n)).first;
  return it->second;
}

/// In-place unitary radix-2 transform of a contiguous sequence.
inline void fft_inplace(std::span<Complex> a, const FftPlan& plan, bool inverse) {
  const std::size_t n = plan.n;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = plan.bit_reverse[i];
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        Complex w = plan.twiddles[k * stride];
        if (inverse) w = std::conj(w);
        const Complex t = w * a[start + k + half];
        a[start + k + half] = a[start + k] - t;
        a[start + k] += t;
      }
    }
  }
  for (auto& v : a) v *= plan.scale;
}

inline ComplexImage transform2d(const ComplexImage& img, bool inverse, const char* name) {
  if (!is_power_of_two(img.rows()) || !is_power_of_two(img.cols())) {
    throw DimensionError(std::string(name) + ": dimensions " + std::to_string(img.rows()) + "x" +
                         std::to_string(img.cols()) + " are not powers of two");
  }
  ComplexImage out = img;
  const FftPlan& row_plan = plan_for(img.cols());
  for (std::size_t r = 0; r < out.rows(); ++r) {
    fft_inplace(out.values().subspan(r * out.cols(), out.cols()), row_plan, inverse);
  }
  const FftPlan& col_plan = plan_for(img.rows());
  std::vector<Complex> column(img.rows());
  for (std::size_t c = 0; c < out.cols(); ++c) {
    for (std::size_t r = 0; r < out.rows(); ++r) column[r] = out(r, c);
    fft_inplace(column, col_plan, inverse);
    for (std::size_t r = 0; r < out.rows(); ++r) out(r, c) = column[r];
  }
  return out;
}

}  // namespace detail

/// Unitary 2D DFT (each 1D pass scaled by 1/sqrt(N)).
inline ComplexImage fft2(const ComplexImage& img) { return detail::transform2d(img, false, "fft2"); }

/// Inverse of fft2.
inline ComplexImage ifft2(const ComplexImage& img) { return detail::transform2d(img, true, "ifft2"); }

}  // namespace deepptych
