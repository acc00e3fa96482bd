#pragma once

#include <bit>
#include <cstddef>
#include <string>

#include "phasorconv/error.hpp"

namespace phasorconv {

/// Transform sizing for linear (non-wrapping) correlation of an n x n image,
/// zero padded by p on each side, with a k x k kernel.
struct FftSizes {
  std::size_t image_len = 0;      // n
  std::size_t padding = 0;        // p
  std::size_t spatial_len = 0;    // n + 2p
  std::size_t kernel_len = 0;     // k
  std::size_t fft_len = 0;        // power of two >= n + 2p + k - 1
  std::size_t valid_out_len = 0;  // n + 2p - k + 1

  /// Columns kept by a real-input transform of side fft_len.
  std::size_t half_cols() const { return fft_len / 2 + 1; }
  /// Complex bins in one half-spectrum slab.
  std::size_t slab_elements() const { return fft_len * half_cols(); }

  friend bool operator==(const FftSizes&, const FftSizes&) = default;
};

inline FftSizes plan_sizes(std::size_t n, std::size_t k, std::size_t p) {
  if (k < 1) throw UnsupportedGeometry("kernel side must be at least 1");
  if (k > n) {
    throw UnsupportedGeometry("kernel side " + std::to_string(k) +
                              " exceeds image side " + std::to_string(n));
  }
  FftSizes s;
  s.image_len = n;
  s.padding = p;
  s.spatial_len = n + 2 * p;
  s.kernel_len = k;
  s.fft_len = std::bit_ceil(s.spatial_len + k - 1);
  s.valid_out_len = s.spatial_len - k + 1;
  return s;
}

}  // namespace phasorconv
