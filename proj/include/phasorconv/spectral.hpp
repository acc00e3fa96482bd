#pragma once

// Discrete Fourier machinery: an O(n²) DFT used as a test oracle, an
// iterative radix-2 FFT, and 2-D real-input transforms that keep only the
// non-redundant half of the Hermitian spectrum.
//
// Conventions: forward transforms are unnormalized, inverse transforms carry
// 1/n (1/L² in 2-D) so that inverse(forward(x)) == x.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "phasorconv/error.hpp"
#include "phasorconv/geometry.hpp"
#include "phasorconv/tensor.hpp"

namespace phasorconv {

enum class Direction { Forward, Inverse };

template <std::floating_point T>
std::vector<std::complex<T>> dft_1d_naive(std::span<const std::complex<T>> x, Direction dir) {
  const std::size_t n = x.size();
  if (n == 0) throw ShapeError("dft_1d_naive: empty input");
  const double sign = dir == Direction::Forward ? -1.0 : 1.0;
  std::vector<std::complex<T>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      // Reduce k·i mod n before scaling so the angle stays exact-ish for large n.
      const double theta = sign * 2.0 * std::numbers::pi * static_cast<double>((k * i) % n) /
                           static_cast<double>(n);
      acc += std::complex<double>(x[i]) * std::complex<double>(std::cos(theta), std::sin(theta));
    }
    if (dir == Direction::Inverse) acc /= static_cast<double>(n);
    out[k] = std::complex<T>(acc);
  }
  return out;
}

namespace detail {

// e^{-j2πm/len} for m < len/2, computed in double then narrowed.
template <std::floating_point T>
std::vector<std::complex<T>> make_twiddles(std::size_t len) {
  std::vector<std::complex<T>> tw(len / 2);
  for (std::size_t m = 0; m < tw.size(); ++m) {
    const double theta = -2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(len);
    tw[m] = std::complex<T>(static_cast<T>(std::cos(theta)), static_cast<T>(std::sin(theta)));
  }
  return tw;
}

inline std::vector<std::uint32_t> make_bit_reversal(std::size_t len) {
  std::vector<std::uint32_t> rev(len, 0);
  const int bits = std::countr_zero(len);
  for (std::size_t i = 0; i < len; ++i) {
    std::uint32_t r = 0;
    for (int b = 0; b < bits; ++b)
      if (i & (std::size_t{1} << b)) r |= 1u << (bits - 1 - b);
    rev[i] = r;
  }
  return rev;
}

// Unnormalized in-place radix-2 transform of a length-len sequence.
template <std::floating_point T>
void radix2_inplace(std::span<std::complex<T>> a, std::span<const std::complex<T>> twiddles,
                    std::span<const std::uint32_t> bitrev, Direction dir) {
  const std::size_t len = a.size();
  for (std::size_t i = 0; i < len; ++i) {
    const std::size_t j = bitrev[i];
    if (i < j) std::swap(a[i], a[j]);
  }
  const bool inverse = dir == Direction::Inverse;
  for (std::size_t half = 1; half < len; half *= 2) {
    const std::size_t step = len / (2 * half);
    for (std::size_t base = 0; base < len; base += 2 * half) {
      for (std::size_t j = 0; j < half; ++j) {
        const std::complex<T> w = twiddles[j * step];
        const T wr = w.real();
        const T wi = inverse ? -w.imag() : w.imag();
        const std::complex<T> u = a[base + j];
        const std::complex<T> v = a[base + j + half];
        const T vr = v.real() * wr - v.imag() * wi;
        const T vi = v.real() * wi + v.imag() * wr;
        a[base + j] = {u.real() + vr, u.imag() + vi};
        a[base + j + half] = {u.real() - vr, u.imag() - vi};
      }
    }
  }
}

}  // namespace detail

/// Radix-2 FFT of a power-of-two-length sequence. The inverse carries 1/n.
template <std::floating_point T>
std::vector<std::complex<T>> fft_1d(std::span<const std::complex<T>> x, Direction dir) {
  const std::size_t n = x.size();
  if (n == 0 || !std::has_single_bit(n))
    throw ShapeError("fft_1d: length " + std::to_string(n) + " is not a power of two");
  std::vector<std::complex<T>> a(x.begin(), x.end());
  const auto tw = detail::make_twiddles<T>(n);
  const auto rev = detail::make_bit_reversal(n);
  detail::radix2_inplace<T>(a, tw, rev, dir);
  if (dir == Direction::Inverse)
    for (auto& v : a) v /= static_cast<T>(n);
  return a;
}

/// Sizing plus the shared twiddle and bit-reversal tables for length L.
/// Immutable after construction.
template <std::floating_point T>
class FftPlan {
 public:
  explicit FftPlan(FftSizes sizes)
      : sizes_(sizes),
        twiddles_(detail::make_twiddles<T>(sizes.fft_len)),
        bitrev_(detail::make_bit_reversal(sizes.fft_len)) {
    if (!std::has_single_bit(sizes.fft_len)) throw ShapeError("FftPlan: fft_len must be a power of two");
  }

  const FftSizes& sizes() const { return sizes_; }
  std::size_t fft_len() const { return sizes_.fft_len; }
  std::size_t half_cols() const { return sizes_.half_cols(); }
  std::size_t slab_elements() const { return sizes_.slab_elements(); }
  std::span<const std::complex<T>> twiddles() const { return twiddles_; }

  /// Unnormalized in-place transform of one length-L line.
  void transform(std::span<std::complex<T>> line, Direction dir) const {
    detail::radix2_inplace<T>(line, twiddles_, bitrev_, dir);
  }

 private:
  FftSizes sizes_;
  std::vector<std::complex<T>> twiddles_;
  std::vector<std::uint32_t> bitrev_;
};

template <std::floating_point T>
FftPlan<T> plan_fft(std::size_t n, std::size_t k, std::size_t p) {
  return FftPlan<T>(plan_sizes(n, k, p));
}

// ---------------------------------------------------------------------------
// Half-spectrum storage. Planes are kept separate (structure of arrays) so the
// rectangular re/im and phasor mag/ang layouts are identical.

template <std::floating_point T>
struct RectSlabView {
  std::span<const T> re;
  std::span<const T> im;
};

template <std::floating_point T>
struct RectSlabSpan {
  std::span<T> re;
  std::span<T> im;
  operator RectSlabView<T>() const { return {re, im}; }
};

template <std::floating_point T>
struct PhasorSlabView {
  std::span<const T> mag;
  std::span<const T> ang;
};

template <std::floating_point T>
struct PhasorSlabSpan {
  std::span<T> mag;
  std::span<T> ang;
  operator PhasorSlabView<T>() const { return {mag, ang}; }
};

namespace detail {

/// Two equally shaped planes per slab over an (outer1 × outer2) grid of slabs.
template <std::floating_point T>
struct SlabGrid {
  std::size_t outer1 = 0;
  std::size_t outer2 = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> first;
  std::vector<T> second;

  SlabGrid() = default;
  SlabGrid(std::size_t o1, std::size_t o2, std::size_t r, std::size_t c)
      : outer1(o1), outer2(o2), rows(r), cols(c), first(o1 * o2 * r * c), second(o1 * o2 * r * c) {}

  std::size_t slab_size() const { return rows * cols; }
  std::size_t offset(std::size_t i, std::size_t j) const { return (i * outer2 + j) * slab_size(); }
  bool same_layout(const SlabGrid& o) const {
    return outer1 == o.outer1 && outer2 == o.outer2 && rows == o.rows && cols == o.cols;
  }
  std::span<const T> first_of(std::size_t i, std::size_t j) const {
    return std::span<const T>(first).subspan(offset(i, j), slab_size());
  }
  std::span<const T> second_of(std::size_t i, std::size_t j) const {
    return std::span<const T>(second).subspan(offset(i, j), slab_size());
  }
  std::span<T> first_of(std::size_t i, std::size_t j) {
    return std::span<T>(first).subspan(offset(i, j), slab_size());
  }
  std::span<T> second_of(std::size_t i, std::size_t j) {
    return std::span<T>(second).subspan(offset(i, j), slab_size());
  }
};

}  // namespace detail

/// Rectangular half-spectra: slab (i, j) holds L × (L/2+1) bins.
template <std::floating_point T>
struct SpectrumRect {
  detail::SlabGrid<T> grid;

  SpectrumRect() = default;
  SpectrumRect(std::size_t o1, std::size_t o2, std::size_t rows, std::size_t cols)
      : grid(o1, o2, rows, cols) {}

  std::size_t outer1() const { return grid.outer1; }
  std::size_t outer2() const { return grid.outer2; }
  std::size_t rows() const { return grid.rows; }
  std::size_t cols() const { return grid.cols; }
  std::vector<T>& re() { return grid.first; }
  std::vector<T>& im() { return grid.second; }
  const std::vector<T>& re() const { return grid.first; }
  const std::vector<T>& im() const { return grid.second; }

  RectSlabView<T> slab(std::size_t i, std::size_t j) const {
    return {grid.first_of(i, j), grid.second_of(i, j)};
  }
  RectSlabSpan<T> slab(std::size_t i, std::size_t j) {
    return {grid.first_of(i, j), grid.second_of(i, j)};
  }
};

/// Phasor half-spectra with the same layout as SpectrumRect.
template <std::floating_point T>
struct SpectrumPhasor {
  detail::SlabGrid<T> grid;

  SpectrumPhasor() = default;
  SpectrumPhasor(std::size_t o1, std::size_t o2, std::size_t rows, std::size_t cols)
      : grid(o1, o2, rows, cols) {}

  std::size_t outer1() const { return grid.outer1; }
  std::size_t outer2() const { return grid.outer2; }
  std::size_t rows() const { return grid.rows; }
  std::size_t cols() const { return grid.cols; }
  std::vector<T>& mag() { return grid.first; }
  std::vector<T>& ang() { return grid.second; }
  const std::vector<T>& mag() const { return grid.first; }
  const std::vector<T>& ang() const { return grid.second; }

  PhasorSlabView<T> slab(std::size_t i, std::size_t j) const {
    return {grid.first_of(i, j), grid.second_of(i, j)};
  }
  PhasorSlabSpan<T> slab(std::size_t i, std::size_t j) {
    return {grid.first_of(i, j), grid.second_of(i, j)};
  }
};

/// Scratch space for 2-D transforms; one per worker.
template <std::floating_point T>
struct FftWorkspace {
  std::vector<std::complex<T>> half;  // L × (L/2+1)
  std::vector<std::complex<T>> line;  // L

  explicit FftWorkspace(const FftPlan<T>& plan)
      : half(plan.slab_elements()), line(plan.fft_len()) {}
};

namespace detail {

template <std::floating_point T>
void column_transforms(std::vector<std::complex<T>>& half, std::vector<std::complex<T>>& line,
                       const FftPlan<T>& plan, Direction dir) {
  const std::size_t len = plan.fft_len();
  const std::size_t cols = plan.half_cols();
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < len; ++r) line[r] = half[r * cols + c];
    plan.transform(line, dir);
    for (std::size_t r = 0; r < len; ++r) half[r * cols + c] = line[r];
  }
}

}  // namespace detail

/// Real L×L plane -> rectangular half-spectrum slab (L × L/2+1).
/// Row FFTs first, then column FFTs over the retained columns.
template <std::floating_point T>
void rfft2(PlaneView<T> x, const FftPlan<T>& plan, RectSlabSpan<T> out, FftWorkspace<T>& ws) {
  const std::size_t len = plan.fft_len();
  const std::size_t cols = plan.half_cols();
  if (x.rows != len || x.cols != len)
    throw ShapeError("rfft2: plane is " + std::to_string(x.rows) + "x" + std::to_string(x.cols) +
                     ", plan expects " + std::to_string(len) + "x" + std::to_string(len));
  if (out.re.size() != len * cols || out.im.size() != len * cols)
    throw ShapeError("rfft2: output slab size mismatch");
  for (std::size_t r = 0; r < len; ++r) {
    for (std::size_t c = 0; c < len; ++c) ws.line[c] = {x(r, c), T(0)};
    plan.transform(ws.line, Direction::Forward);
    for (std::size_t c = 0; c < cols; ++c) ws.half[r * cols + c] = ws.line[c];
  }
  detail::column_transforms(ws.half, ws.line, plan, Direction::Forward);
  for (std::size_t i = 0; i < len * cols; ++i) {
    out.re[i] = ws.half[i].real();
    out.im[i] = ws.half[i].imag();
  }
}

template <std::floating_point T>
SpectrumRect<T> rfft2(PlaneView<T> x, const FftPlan<T>& plan) {
  SpectrumRect<T> s(1, 1, plan.fft_len(), plan.half_cols());
  FftWorkspace<T> ws(plan);
  rfft2(x, plan, s.slab(0, 0), ws);
  return s;
}

/// Half-spectrum slab -> real L×L plane. Column inverse transforms, then each
/// row is completed from Hermitian symmetry X[L-k] = conj(X[k]) and inverse
/// transformed; the real part is kept and scaled by 1/L².
template <std::floating_point T>
void irfft2(RectSlabView<T> spec, const FftPlan<T>& plan, std::span<T> out, FftWorkspace<T>& ws) {
  const std::size_t len = plan.fft_len();
  const std::size_t cols = plan.half_cols();
  if (spec.re.size() != len * cols || spec.im.size() != len * cols)
    throw ShapeError("irfft2: slab size does not match plan");
  if (out.size() != len * len) throw ShapeError("irfft2: output plane size mismatch");
  for (std::size_t i = 0; i < len * cols; ++i) ws.half[i] = {spec.re[i], spec.im[i]};
  detail::column_transforms(ws.half, ws.line, plan, Direction::Inverse);
  const T scale = T(1) / static_cast<T>(len * len);
  for (std::size_t r = 0; r < len; ++r) {
    const std::complex<T>* row = &ws.half[r * cols];
    for (std::size_t c = 0; c < cols; ++c) ws.line[c] = row[c];
    for (std::size_t c = 1; c + 1 < cols; ++c) ws.line[len - c] = std::conj(row[c]);
    plan.transform(ws.line, Direction::Inverse);
    for (std::size_t c = 0; c < len; ++c) out[r * len + c] = ws.line[c].real() * scale;
  }
}

template <std::floating_point T>
Plane<T> irfft2(RectSlabView<T> spec, const FftPlan<T>& plan) {
  Plane<T> out(plan.fft_len(), plan.fft_len());
  FftWorkspace<T> ws(plan);
  irfft2(spec, plan, std::span<T>(out.data), ws);
  return out;
}

template <std::floating_point T>
void irfft2(RectSlabSpan<T> spec, const FftPlan<T>& plan, std::span<T> out, FftWorkspace<T>& ws) {
  irfft2(RectSlabView<T>(spec), plan, out, ws);
}

template <std::floating_point T>
Plane<T> irfft2(RectSlabSpan<T> spec, const FftPlan<T>& plan) {
  return irfft2(RectSlabView<T>(spec), plan);
}

// ---------------------------------------------------------------------------
// Embedding and cropping.

/// Copies `x` into a zeroed len×len plane at (row0, col0).
template <std::floating_point T>
void embed_at(PlaneView<T> x, std::size_t len, std::size_t row0, std::size_t col0,
              std::span<T> out) {
  if (out.size() != len * len) throw ShapeError("embed_at: output size mismatch");
  if (row0 + x.rows > len || col0 + x.cols > len)
    throw ShapeError("embed_at: " + std::to_string(x.rows) + "x" + std::to_string(x.cols) +
                     " plane at offset does not fit in " + std::to_string(len));
  std::fill(out.begin(), out.end(), T(0));
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t c = 0; c < x.cols; ++c) out[(row0 + r) * len + col0 + c] = x(r, c);
}

/// Copies the size×size window at (row0, col0) of a len×len plane.
template <std::floating_point T>
void crop_at(std::span<const T> y, std::size_t len, std::size_t row0, std::size_t col0,
             std::size_t size, std::span<T> out) {
  if (y.size() != len * len) throw ShapeError("crop_at: input size mismatch");
  if (row0 + size > len || col0 + size > len) throw ShapeError("crop_at: window out of range");
  if (out.size() != size * size) throw ShapeError("crop_at: output size mismatch");
  for (std::size_t r = 0; r < size; ++r)
    for (std::size_t c = 0; c < size; ++c) out[r * size + c] = y[(row0 + r) * len + col0 + c];
}

/// Image placed at (p, p) of a zero L×L plane, realising the symmetric
/// spatial padding inside the transform frame.
template <std::floating_point T>
Plane<T> pad_embed(PlaneView<T> x, const FftPlan<T>& plan) {
  const auto& s = plan.sizes();
  if (x.rows != s.image_len || x.cols != s.image_len)
    throw ShapeError("pad_embed: plane is " + std::to_string(x.rows) + "x" +
                     std::to_string(x.cols) + ", plan image side is " +
                     std::to_string(s.image_len));
  Plane<T> out(s.fft_len, s.fft_len);
  embed_at(x, s.fft_len, s.padding, s.padding, std::span<T>(out.data));
  return out;
}

/// Valid cross-correlation region of a circular result: rows/cols
/// [0, valid_out_len). The L ≥ N+2P+K-1 headroom guarantees no wrap there.
template <std::floating_point T>
Plane<T> crop_valid(PlaneView<T> y, const FftPlan<T>& plan) {
  const auto& s = plan.sizes();
  if (y.rows != s.fft_len || y.cols != s.fft_len) throw ShapeError("crop_valid: plane is not L×L");
  Plane<T> out(s.valid_out_len, s.valid_out_len);
  crop_at(y.data, s.fft_len, 0, 0, s.valid_out_len, std::span<T>(out.data));
  return out;
}

}  // namespace phasorconv
