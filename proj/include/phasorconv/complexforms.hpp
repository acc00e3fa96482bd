#pragma once

// Rectangular and phasor (polar) complex values, conversions between the two
// forms, and the product rule of each form with exact real-arithmetic costs.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <numbers>

namespace phasorconv {

/// Real-arithmetic operation counts. `trig` covers sin, cos, atan2 and any
/// other transcendental evaluation.
struct OpCost {
  std::uint64_t mul = 0;
  std::uint64_t add = 0;
  std::uint64_t div = 0;
  std::uint64_t sqrt = 0;
  std::uint64_t trig = 0;

  constexpr OpCost& operator+=(const OpCost& o) {
    mul += o.mul;
    add += o.add;
    div += o.div;
    sqrt += o.sqrt;
    trig += o.trig;
    return *this;
  }
  friend constexpr OpCost operator+(OpCost a, const OpCost& b) { return a += b; }
  /// Cost of `n` repetitions.
  friend constexpr OpCost operator*(OpCost a, std::uint64_t n) {
    return {a.mul * n, a.add * n, a.div * n, a.sqrt * n, a.trig * n};
  }
  friend constexpr bool operator==(const OpCost&, const OpCost&) = default;

  constexpr std::uint64_t mul_add() const { return mul + add; }
  constexpr std::uint64_t total() const { return mul + add + div + sqrt + trig; }
};

inline constexpr OpCost kToPhasorCost{.mul = 2, .add = 1, .sqrt = 1, .trig = 1};
inline constexpr OpCost kToRectangularCost{.mul = 2, .trig = 2};
inline constexpr OpCost kMulRectCost{.mul = 4, .add = 2};
// Angle wrapping is not part of the product's arithmetic cost.
inline constexpr OpCost kMulPhasorCost{.mul = 1, .add = 1};
inline constexpr OpCost kAccumulateRectCost{.add = 2};

template <std::floating_point T>
struct CRect {
  T re{0};
  T im{0};
  friend constexpr bool operator==(const CRect&, const CRect&) = default;
};

/// Magnitude/angle pair. Invariants: mag >= 0, ang in (-pi, pi], and a zero
/// magnitude always carries a zero angle.
template <std::floating_point T>
struct CPhasor {
  T mag{0};
  T ang{0};
  friend constexpr bool operator==(const CPhasor&, const CPhasor&) = default;
};

/// Wraps any finite angle into (-pi, pi].
template <std::floating_point T>
T normalize_angle(T ang) {
  constexpr T pi = std::numbers::pi_v<T>;
  constexpr T two_pi = 2 * std::numbers::pi_v<T>;
  if (ang > -pi && ang <= pi) return ang;
  T r = std::remainder(ang, two_pi);
  if (r <= -pi) r += two_pi;
  if (r > pi) r -= two_pi;
  return r;
}

template <std::floating_point T>
CPhasor<T> to_phasor(CRect<T> z) {
  const T mag = std::sqrt(z.re * z.re + z.im * z.im);
  if (mag == T(0)) return {T(0), T(0)};
  T ang = std::atan2(z.im, z.re);
  // atan2(-0, x<0) yields -pi, which sits outside the half-open range.
  if (ang <= -std::numbers::pi_v<T>) ang = std::numbers::pi_v<T>;
  return {mag, ang};
}

template <std::floating_point T>
CPhasor<T> to_phasor(CRect<T> z, OpCost& tally) {
  tally += kToPhasorCost;
  return to_phasor(z);
}

template <std::floating_point T>
CRect<T> to_rectangular(CPhasor<T> z) {
  return {z.mag * std::cos(z.ang), z.mag * std::sin(z.ang)};
}

template <std::floating_point T>
CRect<T> to_rectangular(CPhasor<T> z, OpCost& tally) {
  tally += kToRectangularCost;
  return to_rectangular(z);
}

template <std::floating_point T>
constexpr CRect<T> mul_rect(CRect<T> a, CRect<T> b) {
  return {a.re * b.re - a.im * b.im, a.re * b.im + b.re * a.im};
}

template <std::floating_point T>
constexpr CRect<T> mul_rect(CRect<T> a, CRect<T> b, OpCost& tally) {
  tally += kMulRectCost;
  return mul_rect(a, b);
}

template <std::floating_point T>
CPhasor<T> mul_phasor(CPhasor<T> a, CPhasor<T> b) {
  const T mag = a.mag * b.mag;
  if (mag == T(0)) return {T(0), T(0)};
  return {mag, normalize_angle(a.ang + b.ang)};
}

template <std::floating_point T>
CPhasor<T> mul_phasor(CPhasor<T> a, CPhasor<T> b, OpCost& tally) {
  tally += kMulPhasorCost;
  return mul_phasor(a, b);
}

template <std::floating_point T>
constexpr CRect<T> conj_rect(CRect<T> z) {
  return {z.re, -z.im};
}

template <std::floating_point T>
CPhasor<T> conj_phasor(CPhasor<T> z) {
  if (z.mag == T(0)) return {T(0), T(0)};
  return {z.mag, normalize_angle(-z.ang)};
}

}  // namespace phasorconv
