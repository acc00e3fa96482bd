#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "phasorconv/error.hpp"

namespace phasorconv {

/// Read-only row-major 2-D view.
template <std::floating_point T>
struct PlaneView {
  std::span<const T> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  T operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// Owning row-major 2-D plane.
template <std::floating_point T>
struct Plane {
  std::vector<T> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  Plane() = default;
  Plane(std::size_t r, std::size_t c) : data(r * c, T(0)), rows(r), cols(c) {}
  Plane(std::size_t r, std::size_t c, std::vector<T> values)
      : data(std::move(values)), rows(r), cols(c) {
    if (data.size() != r * c) throw ShapeError("plane data length does not match dims");
  }

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  T operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  PlaneView<T> view() const { return {data, rows, cols}; }
  operator PlaneView<T>() const { return view(); }
};

using Dims4 = std::array<std::size_t, 4>;

inline std::string dims_string(const Dims4& d) {
  return "[" + std::to_string(d[0]) + "," + std::to_string(d[1]) + "," + std::to_string(d[2]) +
         "," + std::to_string(d[3]) + "]";
}

/// Rank-4 real tensor (batch, channel, rows, cols), row-major, cols fastest.
template <std::floating_point T>
class RealTensor4 {
 public:
  RealTensor4() = default;
  explicit RealTensor4(Dims4 dims)
      : dims_(dims), data_(dims[0] * dims[1] * dims[2] * dims[3], T(0)) {}
  RealTensor4(Dims4 dims, std::vector<T> data) : dims_(dims), data_(std::move(data)) {
    if (data_.size() != dims[0] * dims[1] * dims[2] * dims[3])
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match dims " + dims_string(dims));
  }

  const Dims4& dims() const { return dims_; }
  std::size_t dim(std::size_t i) const { return dims_[i]; }
  std::size_t size() const { return data_.size(); }
  std::size_t plane_size() const { return dims_[2] * dims_[3]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator()(std::size_t b, std::size_t c, std::size_t h, std::size_t w) {
    return data_[offset(b, c) + h * dims_[3] + w];
  }
  T operator()(std::size_t b, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[offset(b, c) + h * dims_[3] + w];
  }

  std::span<T> plane(std::size_t b, std::size_t c) {
    return std::span<T>(data_).subspan(offset(b, c), plane_size());
  }
  PlaneView<T> plane(std::size_t b, std::size_t c) const {
    return {std::span<const T>(data_).subspan(offset(b, c), plane_size()), dims_[2], dims_[3]};
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  friend bool operator==(const RealTensor4&, const RealTensor4&) = default;

 private:
  std::size_t offset(std::size_t b, std::size_t c) const {
    return (b * dims_[1] + c) * plane_size();
  }

  Dims4 dims_{0, 0, 0, 0};
  std::vector<T> data_;
};

/// Largest absolute elementwise difference. Shapes must agree.
template <std::floating_point T>
T max_abs_diff(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw ShapeError("max_abs_diff: length mismatch");
  T m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <std::floating_point T>
T max_abs_diff(const RealTensor4<T>& a, const RealTensor4<T>& b) {
  if (a.dims() != b.dims())
    throw ShapeError("max_abs_diff: " + dims_string(a.dims()) + " vs " + dims_string(b.dims()));
  return max_abs_diff(a.data(), b.data());
}

template <std::floating_point T>
T max_abs(std::span<const T> a) {
  T m = 0;
  for (T v : a) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace phasorconv
