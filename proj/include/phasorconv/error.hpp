#pragma once

#include <stdexcept>
#include <string>

namespace phasorconv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or spectrum dimensions do not agree with the geometry in use.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// The layer geometry is outside what the spectral engine handles
/// (stride, dilation or groups other than 1, kernel larger than image).
/// Callers are expected to fall back to a generic implementation.
class UnsupportedGeometry : public Error {
 public:
  using Error::Error;
};

class NonFiniteInput : public Error {
 public:
  using Error::Error;
};

/// Malformed tensor fixture file.
class FixtureError : public Error {
 public:
  using Error::Error;
};

}  // namespace phasorconv
