// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace deepptych {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape mismatch or unsupported (non power-of-two) dimension.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Camera layout that does not fit in the Fourier plane, or a bad camera index.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, rank deficiency and similar numerical breakdowns.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid user configuration or argument.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace deepptych
