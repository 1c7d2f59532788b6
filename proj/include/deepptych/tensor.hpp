// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "deepptych/error.hpp"

namespace deepptych {

using Complex = std::complex<double>;

/// Dense row-major 2D array. `Image<double>` holds intensities and
/// magnitudes, `Image<Complex>` holds fields and spectra.
template <typename T>
class Image {
 public:
  using value_type = T;

  Image() = default;

  Image(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) throw DimensionError("image dimensions must be positive");
  }

  Image(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows == 0 || cols == 0) throw DimensionError("image dimensions must be positive");
    if (data_.size() != rows * cols) {
      throw DimensionError("image data length " + std::to_string(data_.size()) +
                           " does not match " + std::to_string(rows) + "x" +
                           std::to_string(cols));
    }
  }

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  [[nodiscard]] bool same_shape(const Image& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  template <typename U>
  [[nodiscard]] bool same_shape(const Image<U>& other) const noexcept {
    return rows_ == other.rows() && cols_ == other.cols();
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using RealImage = Image<double>;
using ComplexImage = Image<Complex>;

constexpr bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

template <typename A, typename B>
void require_same_shape(const Image<A>& a, const Image<B>& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) +
                         "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                         "x" + std::to_string(b.cols()));
  }
}

/// Elementwise complex product.
inline ComplexImage hadamard(const ComplexImage& a, const ComplexImage& b) {
  require_same_shape(a, b, "hadamard");
  ComplexImage out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

/// Swap quadrants so the zero-frequency sample moves to (rows/2, cols/2).
template <typename T>
Image<T> fftshift(const Image<T>& img) {
  const std::size_t rows = img.rows();
  const std::size_t cols = img.cols();
  const std::size_t dr = rows / 2;
  const std::size_t dc = cols / 2;
  Image<T> out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t rr = (r + dr) % rows;
    for (std::size_t c = 0; c < cols; ++c) out(rr, (c + dc) % cols) = img(r, c);
  }
  return out;
}

/// Inverse of fftshift (differs from it only for odd dimensions).
template <typename T>
Image<T> ifftshift(const Image<T>& img) {
  const std::size_t rows = img.rows();
  const std::size_t cols = img.cols();
  const std::size_t dr = rows - rows / 2;
  const std::size_t dc = cols - cols / 2;
  Image<T> out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t rr = (r + dr) % rows;
    for (std::size_t c = 0; c < cols; ++c) out(rr, (c + dc) % cols) = img(r, c);
  }
  return out;
}

inline ComplexImage to_complex(const RealImage& img) {
  ComplexImage out(img.rows(), img.cols());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = Complex(img[i], 0.0);
  return out;
}

inline RealImage real_part(const ComplexImage& img) {
  RealImage out(img.rows(), img.cols());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = img[i].real();
  return out;
}

inline RealImage magnitude(const ComplexImage& img) {
  RealImage out(img.rows(), img.cols());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = std::abs(img[i]);
  return out;
}

/// u/|u| with phase(0) := 0.
inline Complex unit_phase(Complex u) noexcept {
  const double mag = std::abs(u);
  return mag > 0.0 ? u / mag : Complex(0.0, 0.0);
}

/// <a, b> = sum conj(a_i) b_i.
inline Complex inner(const ComplexImage& a, const ComplexImage& b) {
  require_same_shape(a, b, "inner");
  Complex acc(0.0, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
  return acc;
}

template <typename T>
double norm2(const Image<T>& img) {
  double acc = 0.0;
  for (const auto& v : img) acc += std::norm(v);
  return std::sqrt(acc);
}

inline RealImage clamp01(RealImage img) {
  for (auto& v : img) v = std::clamp(v, 0.0, 1.0);
  return img;
}

inline RealImage from_span(std::size_t rows, std::size_t cols, std::span<const double> values) {
  return RealImage(rows, cols, std::vector<double>(values.begin(), values.end()));
}

}  // namespace deepptych
