#pragma once

// Binary tensor fixtures.
//
//   offset  size        field
//   0       4           magic "PHCT"
//   4       1           version (1)
//   5       1           dtype (0 = f32, 1 = f64)
//   6       1           rank
//   7       8·rank      dims, u64 little-endian
//   ...     prod·width  row-major scalars, little-endian
//
// Encoding is byte-explicit and does not depend on host endianness.

#include <algorithm>
#include <array>
#include <bit>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "phasorconv/error.hpp"
#include "phasorconv/tensor.hpp"

namespace phasorconv {

inline constexpr std::array<char, 4> kFixtureMagic = {'P', 'H', 'C', 'T'};
inline constexpr std::uint8_t kFixtureVersion = 1;
inline constexpr std::size_t kFixtureMaxRank = 4;

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

template <std::floating_point T>
constexpr DType dtype_of() {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8, "only 32- and 64-bit floats are supported");
  return sizeof(T) == 4 ? DType::F32 : DType::F64;
}

inline constexpr std::string_view to_string(DType d) { return d == DType::F32 ? "f32" : "f64"; }

namespace detail {

template <class U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <class U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

template <std::floating_point T>
using BitsOf = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;

}  // namespace detail

template <std::floating_point T>
std::vector<std::uint8_t> encode_fixture(const RealTensor4<T>& t) {
  using Bits = detail::BitsOf<T>;
  std::vector<std::uint8_t> out;
  out.reserve(7 + 8 * kFixtureMaxRank + t.size() * sizeof(T));
  out.insert(out.end(), kFixtureMagic.begin(), kFixtureMagic.end());
  out.push_back(kFixtureVersion);
  out.push_back(static_cast<std::uint8_t>(dtype_of<T>()));
  out.push_back(static_cast<std::uint8_t>(kFixtureMaxRank));
  for (std::size_t d : t.dims()) detail::put_le<std::uint64_t>(out, d);
  for (T v : t.data()) detail::put_le<Bits>(out, std::bit_cast<Bits>(v));
  return out;
}

/// Parses a fixture whose dtype matches T. Ranks below 4 are read with
/// leading unit dimensions.
template <std::floating_point T>
RealTensor4<T> decode_fixture(std::span<const std::uint8_t> bytes) {
  using Bits = detail::BitsOf<T>;
  if (bytes.size() < 7) throw FixtureError("fixture header truncated: " + std::to_string(bytes.size()) + " bytes");
  if (!std::equal(kFixtureMagic.begin(), kFixtureMagic.end(), bytes.begin()))
    throw FixtureError("bad magic, expected \"PHCT\"");
  if (bytes[4] != kFixtureVersion)
    throw FixtureError("unsupported fixture version " + std::to_string(bytes[4]));
  const std::uint8_t dtype = bytes[5];
  if (dtype > static_cast<std::uint8_t>(DType::F64))
    throw FixtureError("unknown dtype " + std::to_string(dtype));
  if (static_cast<DType>(dtype) != dtype_of<T>())
    throw FixtureError("dtype mismatch: file holds " + std::string(to_string(static_cast<DType>(dtype))) +
                       ", reader expects " + std::string(to_string(dtype_of<T>())));
  const std::size_t rank = bytes[6];
  if (rank > kFixtureMaxRank) throw FixtureError("rank " + std::to_string(rank) + " exceeds 4");
  const std::size_t header = 7 + 8 * rank;
  if (bytes.size() < header) throw FixtureError("fixture dims truncated");

  Dims4 dims{1, 1, 1, 1};
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    const std::uint64_t d = detail::get_le<std::uint64_t>(bytes.data() + 7 + 8 * i);
    if (d != 0 && count > std::numeric_limits<std::uint64_t>::max() / sizeof(T) / d)
      throw FixtureError("fixture dims overflow");
    count *= d;
    dims[kFixtureMaxRank - rank + i] = static_cast<std::size_t>(d);
  }
  const std::uint64_t payload = bytes.size() - header;
  if (payload != count * sizeof(T))
    throw FixtureError("payload length mismatch: " + std::to_string(payload) + " bytes, dims need " +
                       std::to_string(count * sizeof(T)));

  RealTensor4<T> t(dims);
  const std::uint8_t* p = bytes.data() + header;
  for (T& v : t.data()) {
    v = std::bit_cast<T>(detail::get_le<Bits>(p));
    p += sizeof(T);
  }
  return t;
}

template <std::floating_point T>
void write_fixture(const std::string& path, const RealTensor4<T>& t) {
  const auto bytes = encode_fixture(t);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FixtureError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FixtureError("write failed: " + path);
}

template <std::floating_point T>
RealTensor4<T> read_fixture(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FixtureError("cannot open " + path);
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_fixture<T>(bytes);
}

}  // namespace phasorconv
