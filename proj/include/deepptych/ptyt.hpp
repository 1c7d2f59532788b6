// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "deepptych/error.hpp"
#include "deepptych/tensor.hpp"

namespace deepptych {

namespace io {

// Little-endian scalar codecs, independent of host byte order.

template <typename U>
void write_le(std::ostream& os, U value) {
  static_assert(std::is_unsigned_v<U>);
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFFU);
  os.write(bytes.data(), bytes.size());
}

inline void write_u8(std::ostream& os, std::uint8_t v) { os.put(static_cast<char>(v)); }
inline void write_u32(std::ostream& os, std::uint32_t v) { write_le(os, v); }
inline void write_u64(std::ostream& os, std::uint64_t v) { write_le(os, v); }
inline void write_f64(std::ostream& os, double v) { write_le(os, std::bit_cast<std::uint64_t>(v)); }

template <typename U>
U read_le(std::istream& is, const char* what) {
  std::array<unsigned char, sizeof(U)> bytes{};
  is.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (is.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw FormatError(std::string("truncated input while reading ") + what);
  }
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

inline std::uint8_t read_u8(std::istream& is, const char* what) { return read_le<std::uint8_t>(is, what); }
inline std::uint32_t read_u32(std::istream& is, const char* what) { return read_le<std::uint32_t>(is, what); }
inline std::uint64_t read_u64(std::istream& is, const char* what) { return read_le<std::uint64_t>(is, what); }
inline double read_f64(std::istream& is, const char* what) {
  return std::bit_cast<double>(read_le<std::uint64_t>(is, what));
}

inline void expect_magic(std::istream& is, std::array<char, 4> magic, const char* format) {
  std::array<char, 4> got{};
  is.read(got.data(), got.size());
  if (is.gcount() != 4 || got != magic) throw FormatError(std::string("bad ") + format + " magic");
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  return os;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string() + " for reading");
  return is;
}

}  // namespace io

enum class PtytDtype : std::uint8_t { real64 = 0, complex64_pair = 1 };

inline constexpr std::array<char, 4> kPtytMagic{'P', 'T', 'Y', 'T'};

/// N-dimensional tensor as stored in a PTYT record. Complex values are kept
/// interleaved (re, im) in `values`.
struct PtytTensor {
  PtytDtype dtype = PtytDtype::real64;
  std::vector<std::uint32_t> dims;
  std::vector<double> values;

  [[nodiscard]] std::size_t element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

inline void write_ptyt(std::ostream& os, const PtytTensor& t) {
  const std::size_t per = t.dtype == PtytDtype::complex64_pair ? 2 : 1;
  if (t.values.size() != t.element_count() * per) throw DimensionError("PTYT tensor length mismatch");
  if (t.dims.size() > 255) throw DimensionError("PTYT supports at most 255 dimensions");
  os.write(kPtytMagic.data(), kPtytMagic.size());
  io::write_u8(os, static_cast<std::uint8_t>(t.dtype));
  io::write_u8(os, static_cast<std::uint8_t>(t.dims.size()));
  for (auto d : t.dims) io::write_u32(os, d);
  for (double v : t.values) io::write_f64(os, v);
}

inline PtytTensor read_ptyt(std::istream& is) {
  io::expect_magic(is, kPtytMagic, "PTYT");
  PtytTensor t;
  const auto dtype = io::read_u8(is, "PTYT dtype");
  if (dtype > 1) throw FormatError("unknown PTYT dtype " + std::to_string(dtype));
  t.dtype = static_cast<PtytDtype>(dtype);
  const auto ndim = io::read_u8(is, "PTYT ndim");
  t.dims.resize(ndim);
  for (auto& d : t.dims) d = io::read_u32(is, "PTYT dims");
  const std::size_t per = t.dtype == PtytDtype::complex64_pair ? 2 : 1;
  t.values.resize(t.element_count() * per);
  for (auto& v : t.values) v = io::read_f64(is, "PTYT data");
  return t;
}

inline PtytTensor to_tensor(const RealImage& img) {
  return {PtytDtype::real64,
          {static_cast<std::uint32_t>(img.rows()), static_cast<std::uint32_t>(img.cols())},
          img.storage()};
}

inline PtytTensor to_tensor(const ComplexImage& img) {
  PtytTensor t{PtytDtype::complex64_pair,
               {static_cast<std::uint32_t>(img.rows()), static_cast<std::uint32_t>(img.cols())},
               {}};
  t.values.reserve(img.size() * 2);
  for (const auto& v : img) {
    t.values.push_back(v.real());
    t.values.push_back(v.imag());
  }
  return t;
}

/// Stack of equally sized real images as a 3D tensor [count, rows, cols].
inline PtytTensor to_tensor(const std::vector<RealImage>& images) {
  if (images.empty()) throw DimensionError("cannot store an empty image stack");
  PtytTensor t{PtytDtype::real64,
               {static_cast<std::uint32_t>(images.size()), static_cast<std::uint32_t>(images[0].rows()),
                static_cast<std::uint32_t>(images[0].cols())},
               {}};
  t.values.reserve(images.size() * images[0].size());
  for (const auto& img : images) {
    require_same_shape(img, images[0], "image stack");
    t.values.insert(t.values.end(), img.begin(), img.end());
  }
  return t;
}

inline RealImage real_image_from(const PtytTensor& t) {
  if (t.dtype != PtytDtype::real64 || t.dims.size() != 2) throw FormatError("expected a 2D real64 PTYT tensor");
  return RealImage(t.dims[0], t.dims[1], t.values);
}

inline ComplexImage complex_image_from(const PtytTensor& t) {
  if (t.dims.size() != 2) throw FormatError("expected a 2D PTYT tensor");
  if (t.dtype == PtytDtype::real64) return to_complex(real_image_from(t));
  ComplexImage img(t.dims[0], t.dims[1]);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = Complex(t.values[2 * i], t.values[2 * i + 1]);
  return img;
}

/// Accepts a 2D image (one element) or a 3D stack.
inline std::vector<RealImage> image_stack_from(const PtytTensor& t) {
  if (t.dtype != PtytDtype::real64) throw FormatError("expected real64 PTYT data");
  if (t.dims.size() == 2) return {real_image_from(t)};
  if (t.dims.size() != 3) throw FormatError("expected a 2D or 3D PTYT tensor");
  const std::size_t plane = std::size_t{t.dims[1]} * t.dims[2];
  std::vector<RealImage> out;
  out.reserve(t.dims[0]);
  for (std::size_t i = 0; i < t.dims[0]; ++i) {
    out.emplace_back(t.dims[1], t.dims[2],
                     std::vector<double>(t.values.begin() + static_cast<std::ptrdiff_t>(i * plane),
                                         t.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * plane)));
  }
  return out;
}

inline void save_ptyt(const std::filesystem::path& path, const PtytTensor& t) {
  auto os = io::open_output(path);
  write_ptyt(os, t);
  if (!os) throw FormatError("failed writing " + path.string());
}

inline PtytTensor load_ptyt(const std::filesystem::path& path) {
  auto is = io::open_input(path);
  return read_ptyt(is);
}

}  // namespace deepptych
