// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "deepptych/error.hpp"
#include "deepptych/ptyt.hpp"
#include "deepptych/rng.hpp"
#include "deepptych/tensor.hpp"

namespace deepptych {

namespace detail {

// Length of [px, px + 1) covered by [lo, hi).
inline double overlap_1d(double px, double lo, double hi) noexcept {
  return std::clamp(std::min(px + 1.0, hi) - std::max(px, lo), 0.0, 1.0);
}

}  // namespace detail

/// Images of 1-3 axis-aligned rectangles and discs with random placement,
/// size and intensity on a black background. Image i depends only on
/// (seed, i), so a shorter dataset is a prefix of a longer one.
inline std::vector<RealImage> synth_dataset(std::size_t count, std::size_t size, std::uint64_t seed) {
  if (!is_power_of_two(size)) throw ConfigError("synthetic image size must be a power of two");
  if (count == 0) throw ConfigError("synthetic dataset needs at least one image");
  std::vector<RealImage> images;
  images.reserve(count);
  const double s = static_cast<double>(size);
  for (std::size_t idx = 0; idx < count; ++idx) {
    SplitMix64 rng(derive_seed(seed, idx));
    RealImage img(size, size, 0.0);
    const auto shapes = 1 + static_cast<std::size_t>(rng.below(3));
    for (std::size_t k = 0; k < shapes; ++k) {
      const bool disc = rng.uniform() < 0.5;
      const double intensity = rng.uniform(0.25, 0.75);
      if (disc) {
        const double radius = rng.uniform(s / 10.0, s / 4.0);
        const double cr = rng.uniform(radius, s - radius);
        const double cc = rng.uniform(radius, s - radius);
        for (std::size_t r = 0; r < size; ++r) {
          for (std::size_t c = 0; c < size; ++c) {
            const double dr = static_cast<double>(r) + 0.5 - cr;
            const double dc = static_cast<double>(c) + 0.5 - cc;
            const double cover = std::clamp(radius - std::sqrt(dr * dr + dc * dc) + 0.5, 0.0, 1.0);
            img(r, c) = std::max(img(r, c), intensity * cover);
          }
        }
      } else {
        const double h = rng.uniform(s / 8.0, s / 2.0);
        const double w = rng.uniform(s / 8.0, s / 2.0);
        const double r0 = rng.uniform(0.0, s - h);
        const double c0 = rng.uniform(0.0, s - w);
        for (std::size_t r = 0; r < size; ++r) {
          const double rc = detail::overlap_1d(static_cast<double>(r), r0, r0 + h);
          if (rc == 0.0) continue;
          for (std::size_t c = 0; c < size; ++c) {
            const double cover = rc * detail::overlap_1d(static_cast<double>(c), c0, c0 + w);
            img(r, c) = std::max(img(r, c), intensity * cover);
          }
        }
      }
    }
    images.push_back(std::move(img));
  }
  return images;
}

/// Zero-pads (centered) a square image up to `size`.
inline RealImage pad_to(const RealImage& img, std::size_t size) {
  if (img.rows() > size || img.cols() > size) throw DimensionError("image larger than pad target");
  RealImage out(size, size, 0.0);
  const std::size_t r0 = (size - img.rows()) / 2;
  const std::size_t c0 = (size - img.cols()) / 2;
  for (std::size_t r = 0; r < img.rows(); ++r) {
    for (std::size_t c = 0; c < img.cols(); ++c) out(r0 + r, c0 + c) = img(r, c);
  }
  return out;
}

namespace detail {

inline std::uint32_t read_be32(std::istream& is, const char* what) {
  std::array<unsigned char, 4> b{};
  is.read(reinterpret_cast<char*>(b.data()), 4);
  if (is.gcount() != 4) throw FormatError(std::string("IDX: truncated ") + what);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

}  // namespace detail

/// Reads an IDX3 u8 image file of 28x28 digits, scales pixels to [0, 1]
/// and zero-pads each image to 32x32.
inline std::vector<RealImage> read_idx(std::istream& is, std::size_t max_count = 0) {
  const auto magic = detail::read_be32(is, "magic");
  if (magic != 0x00000803U) throw FormatError("IDX: bad magic (expected 0x00000803)");
  const auto count = detail::read_be32(is, "image count");
  const auto rows = detail::read_be32(is, "row count");
  const auto cols = detail::read_be32(is, "column count");
  if (rows != 28 || cols != 28) {
    throw FormatError("IDX: expected 28x28 images, got " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  const std::size_t take = max_count == 0 ? count : std::min<std::size_t>(count, max_count);
  std::vector<RealImage> images;
  images.reserve(take);
  std::vector<unsigned char> pixels(std::size_t{rows} * cols);
  for (std::size_t i = 0; i < take; ++i) {
    is.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (is.gcount() != static_cast<std::streamsize>(pixels.size())) {
      throw FormatError("IDX: truncated at image " + std::to_string(i));
    }
    RealImage img(rows, cols);
    for (std::size_t p = 0; p < pixels.size(); ++p) img[p] = pixels[p] / 255.0;
    images.push_back(pad_to(img, 32));
  }
  return images;
}

inline std::vector<RealImage> load_idx(const std::filesystem::path& path, std::size_t max_count = 0) {
  auto is = io::open_input(path);
  return read_idx(is, max_count);
}

/// 8-bit binary PGM for viewing; values are clamped to [0, 1].
inline void save_pgm(const std::filesystem::path& path, const RealImage& img) {
  auto os = io::open_output(path);
  os << "P5\n" << img.cols() << ' ' << img.rows() << "\n255\n";
  for (double v : img) {
    os.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  }
  if (!os) throw FormatError("failed writing " + path.string());
}

}  // namespace deepptych
