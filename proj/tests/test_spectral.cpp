#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "phasorconv/spectral.hpp"
#include "test_util.hpp"

namespace pc = phasorconv;
using cd = std::complex<double>;

namespace {

// Full 2-D DFT by row-then-column naive 1-D DFTs.
std::vector<cd> naive_dft2(const std::vector<double>& x, std::size_t len) {
  std::vector<cd> a(x.begin(), x.end());
  std::vector<cd> line(len);
  for (std::size_t r = 0; r < len; ++r) {
    for (std::size_t c = 0; c < len; ++c) line[c] = a[r * len + c];
    const auto t = pc::dft_1d_naive<double>(line, pc::Direction::Forward);
    for (std::size_t c = 0; c < len; ++c) a[r * len + c] = t[c];
  }
  for (std::size_t c = 0; c < len; ++c) {
    for (std::size_t r = 0; r < len; ++r) line[r] = a[r * len + c];
    const auto t = pc::dft_1d_naive<double>(line, pc::Direction::Forward);
    for (std::size_t r = 0; r < len; ++r) a[r * len + c] = t[r];
  }
  return a;
}

std::vector<cd> random_complex(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<cd> v(n);
  for (auto& z : v) z = {u(rng), u(rng)};
  return v;
}

double max_abs(const std::vector<cd>& v) {
  double m = 0;
  for (const auto& z : v) m = std::max(m, std::abs(z));
  return m;
}

double max_diff(const std::vector<cd>& a, const std::vector<cd>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST(DftNaive, ConstantAndImpulse) {
  const std::vector<cd> ones(4, cd{1, 0});
  const auto dc = pc::dft_1d_naive<double>(ones, pc::Direction::Forward);
  EXPECT_NEAR(std::abs(dc[0] - cd{4, 0}), 0.0, 1e-15);
  for (int k = 1; k < 4; ++k) EXPECT_NEAR(std::abs(dc[k]), 0.0, 1e-15);

  const std::vector<cd> impulse{{1, 0}, {0, 0}, {0, 0}, {0, 0}};
  for (const auto& z : pc::dft_1d_naive<double>(impulse, pc::Direction::Forward))
    EXPECT_NEAR(std::abs(z - cd{1, 0}), 0.0, 1e-15);
}

TEST(DftNaive, RoundTrip) {
  for (std::size_t n : {1u, 3u, 7u, 16u, 33u}) {
    const auto x = random_complex(n, n);
    const auto back = pc::dft_1d_naive<double>(
        pc::dft_1d_naive<double>(x, pc::Direction::Forward), pc::Direction::Inverse);
    EXPECT_LE(max_diff(x, back), 1e-12) << n;
  }
}

TEST(DftNaive, RejectsEmpty) {
  EXPECT_THROW(pc::dft_1d_naive<double>(std::vector<cd>{}, pc::Direction::Forward), pc::ShapeError);
}

TEST(Fft1d, MatchesNaiveLength16) {
  const auto x = random_complex(16, 99);
  const auto fast = pc::fft_1d<double>(x, pc::Direction::Forward);
  const auto slow = pc::dft_1d_naive<double>(x, pc::Direction::Forward);
  EXPECT_LE(max_diff(fast, slow) / max_abs(slow), 1e-12);
}

TEST(Fft1d, MatchesNaiveAllPowersOfTwo) {
  for (std::size_t n = 1; n <= 256; n *= 2) {
    const auto x = random_complex(n, 1000 + n);
    for (auto dir : {pc::Direction::Forward, pc::Direction::Inverse}) {
      const auto fast = pc::fft_1d<double>(x, dir);
      const auto slow = pc::dft_1d_naive<double>(x, dir);
      EXPECT_LE(max_diff(fast, slow) / max_abs(slow), 1e-10) << n;
    }
  }
}

TEST(Fft1d, ImpulseGivesAllOnes) {
  std::vector<cd> x(8, cd{0, 0});
  x[0] = 1;
  for (const auto& z : pc::fft_1d<double>(x, pc::Direction::Forward)) EXPECT_EQ(z, cd(1, 0));
}

TEST(Fft1d, Linearity) {
  const auto x = random_complex(64, 5);
  const auto y = random_complex(64, 6);
  const cd alpha{0.7, -0.2}, beta{-1.3, 0.4};
  std::vector<cd> mix(64);
  for (std::size_t i = 0; i < 64; ++i) mix[i] = alpha * x[i] + beta * y[i];
  const auto fx = pc::fft_1d<double>(x, pc::Direction::Forward);
  const auto fy = pc::fft_1d<double>(y, pc::Direction::Forward);
  const auto fm = pc::fft_1d<double>(mix, pc::Direction::Forward);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_LE(std::abs(fm[i] - (alpha * fx[i] + beta * fy[i])), 1e-12);
}

TEST(Fft1d, RejectsNonPowerOfTwo) {
  EXPECT_THROW(pc::fft_1d<double>(random_complex(12, 1), pc::Direction::Forward), pc::ShapeError);
  EXPECT_THROW(pc::fft_1d<double>(std::vector<cd>{}, pc::Direction::Forward), pc::ShapeError);
}

TEST(PlanFft, Sizing) {
  auto s = pc::plan_sizes(16, 3, 1);
  EXPECT_EQ(s.fft_len, 32u);
  EXPECT_EQ(s.valid_out_len, 16u);
  s = pc::plan_sizes(4, 1, 0);
  EXPECT_EQ(s.fft_len, 4u);
  EXPECT_EQ(s.valid_out_len, 4u);
  s = pc::plan_sizes(8, 8, 0);
  EXPECT_EQ(s.fft_len, 16u);
  EXPECT_EQ(s.valid_out_len, 1u);
  EXPECT_THROW(pc::plan_sizes(3, 4, 0), pc::UnsupportedGeometry);
  EXPECT_THROW(pc::plan_sizes(3, 0, 0), pc::UnsupportedGeometry);

  const auto plan = pc::plan_fft<double>(16, 3, 1);
  ASSERT_EQ(plan.twiddles().size(), 16u);
  for (std::size_t m = 0; m < 16; ++m) {
    const cd expect = std::polar(1.0, -2.0 * std::numbers::pi * m / 32.0);
    EXPECT_LE(std::abs(plan.twiddles()[m] - expect), 1e-15);
  }
}

TEST(Rfft2, ZeroAndConstantPlanes) {
  const auto plan = pc::FftPlan<double>(pc::plan_sizes(5, 4, 0));  // L = 8
  ASSERT_EQ(plan.fft_len(), 8u);
  pc::Plane<double> zero(8, 8);
  const auto zs = pc::rfft2(zero.view(), plan);
  for (double v : zs.re()) EXPECT_EQ(v, 0.0);
  for (double v : zs.im()) EXPECT_EQ(v, 0.0);

  pc::Plane<double> c(8, 8, std::vector<double>(64, 1.5));
  const auto cs = pc::rfft2(c.view(), plan);
  EXPECT_NEAR(cs.re()[0], 1.5 * 64, 1e-12);
  for (std::size_t i = 1; i < cs.re().size(); ++i) {
    EXPECT_NEAR(cs.re()[i], 0.0, 1e-12);
    EXPECT_NEAR(cs.im()[i], 0.0, 1e-12);
  }
}

TEST(Rfft2, MatchesNaiveHalfSpectrumAndHermitian) {
  const std::size_t len = 8;
  const auto plan = pc::FftPlan<double>(pc::plan_sizes(5, 4, 0));
  const auto x = test::random_vector<double>(len * len, 17);
  const auto s = pc::rfft2(pc::PlaneView<double>{x, len, len}, plan);
  const auto full = naive_dft2(x, len);
  const std::size_t cols = len / 2 + 1;
  double err = 0;
  for (std::size_t r = 0; r < len; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      err = std::max(err, std::abs(cd(s.re()[r * cols + c], s.im()[r * cols + c]) - full[r * len + c]));
  EXPECT_LE(err, 1e-10);
  // Full transform of real input is Hermitian; discarded half recoverable.
  for (std::size_t r = 0; r < len; ++r) {
    for (std::size_t c = 0; c < len; ++c) {
      const cd mirrored = std::conj(full[((len - r) % len) * len + (len - c) % len]);
      EXPECT_LE(std::abs(full[r * len + c] - mirrored), 1e-10);
    }
    for (std::size_t c = 1; c < cols; ++c) {
      const cd kept{s.re()[((len - r) % len) * cols + c], s.im()[((len - r) % len) * cols + c]};
      EXPECT_LE(std::abs(full[r * len + (len - c)] - std::conj(kept)), 1e-10);
    }
  }
}

TEST(Rfft2, DimensionMismatchThrows) {
  const auto plan = pc::FftPlan<double>(pc::plan_sizes(5, 4, 0));
  pc::Plane<double> wrong(4, 4);
  EXPECT_THROW(pc::rfft2(wrong.view(), plan), pc::ShapeError);
  pc::SpectrumRect<double> small(1, 1, 4, 3);
  EXPECT_THROW(pc::irfft2(small.slab(0, 0), plan), pc::ShapeError);
}

TEST(Irfft2, RoundTripAndDc) {
  for (std::size_t len : {16u, 32u}) {
    const auto plan = pc::FftPlan<double>(pc::plan_sizes(len / 2 + 1, len / 2, 0));
    ASSERT_EQ(plan.fft_len(), len);
    const auto x = test::random_vector<double>(len * len, len);
    const auto back = pc::irfft2(pc::rfft2(pc::PlaneView<double>{x, len, len}, plan).slab(0, 0), plan);
    EXPECT_LE(pc::max_abs_diff<double>(x, back.data), 1e-12);
  }
  const auto plan = pc::FftPlan<double>(pc::plan_sizes(5, 4, 0));
  pc::SpectrumRect<double> dc(1, 1, 8, 5);
  dc.re()[0] = 2.5 * 64;
  for (double v : pc::irfft2(dc.slab(0, 0), plan).data) EXPECT_NEAR(v, 2.5, 1e-14);
  pc::SpectrumRect<double> zero(1, 1, 8, 5);
  for (double v : pc::irfft2(zero.slab(0, 0), plan).data) EXPECT_EQ(v, 0.0);
}

TEST(Irfft2, MatchesFullComplexInverseWithSmallImaginaryResidue) {
  // Oracle: complete the Hermitian spectrum and run the naive inverse DFT in
  // both axes; the imaginary part must vanish.
  const std::size_t len = 8;
  const auto plan = pc::FftPlan<double>(pc::plan_sizes(5, 4, 0));
  const auto x = test::random_vector<double>(len * len, 4);
  const auto full = naive_dft2(x, len);
  std::vector<cd> a = full;
  std::vector<cd> line(len);
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t j = 0; j < len; ++j) line[j] = pass == 0 ? a[i * len + j] : a[j * len + i];
      const auto t = pc::dft_1d_naive<double>(line, pc::Direction::Inverse);
      for (std::size_t j = 0; j < len; ++j) (pass == 0 ? a[i * len + j] : a[j * len + i]) = t[j];
    }
  }
  double residue = 0;
  for (const auto& z : a) residue = std::max(residue, std::abs(z.imag()));
  EXPECT_LE(residue, 1e-10 * max_abs(full));
  const auto s = pc::rfft2(pc::PlaneView<double>{x, len, len}, plan);
  const auto y = pc::irfft2(s.slab(0, 0), plan);
  for (std::size_t i = 0; i < len * len; ++i) EXPECT_NEAR(y.data[i], a[i].real(), 1e-12);
}

TEST(SpectralProperty, Parseval) {
  for (std::size_t len : {8u, 16u, 32u}) {
    const auto plan = pc::FftPlan<double>(pc::plan_sizes(len / 2 + 1, len / 2, 0));
    const auto x = test::random_vector<double>(len * len, 77 + len);
    const auto s = pc::rfft2(pc::PlaneView<double>{x, len, len}, plan);
    double energy = 0;
    for (double v : x) energy += v * v;
    const std::size_t cols = len / 2 + 1;
    double spec = 0;
    for (std::size_t r = 0; r < len; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const double e = s.re()[r * cols + c] * s.re()[r * cols + c] + s.im()[r * cols + c] * s.im()[r * cols + c];
        // Columns 1..L/2-1 stand for themselves and their mirror.
        spec += (c == 0 || c == len / 2) ? e : 2 * e;
      }
    }
    EXPECT_NEAR(spec / double(len * len), energy, 1e-9 * energy);
  }
}

TEST(SpectralProperty, ConvolutionTheorem) {
  // Linear convolution of a 9×9 image with a 4×4 kernel fits in L = 16.
  const std::size_t n = 9, k = 4, len = 16;
  const auto plan = pc::FftPlan<double>(pc::plan_sizes(n, k, 0));
  ASSERT_EQ(plan.fft_len(), len);
  const auto x = test::random_vector<double>(n * n, 8);
  const auto w = test::random_vector<double>(k * k, 9);
  std::vector<double> xf(len * len), wf(len * len);
  pc::embed_at(pc::PlaneView<double>{x, n, n}, len, 0, 0, std::span<double>(xf));
  pc::embed_at(pc::PlaneView<double>{w, k, k}, len, 0, 0, std::span<double>(wf));
  const auto xs = pc::rfft2(pc::PlaneView<double>{xf, len, len}, plan);
  const auto ws = pc::rfft2(pc::PlaneView<double>{wf, len, len}, plan);
  pc::SpectrumRect<double> prod(1, 1, len, len / 2 + 1);
  for (std::size_t i = 0; i < prod.re().size(); ++i) {
    const cd z = cd(xs.re()[i], xs.im()[i]) * cd(ws.re()[i], ws.im()[i]);
    prod.re()[i] = z.real();
    prod.im()[i] = z.imag();
  }
  const auto y = pc::irfft2(prod.slab(0, 0), plan);
  double err = 0;
  for (std::size_t i = 0; i < n + k - 1; ++i) {
    for (std::size_t j = 0; j < n + k - 1; ++j) {
      double ref = 0;
      for (std::size_t u = 0; u < k; ++u)
        for (std::size_t v = 0; v < k; ++v)
          if (i >= u && j >= v && i - u < n && j - v < n) ref += x[(i - u) * n + (j - v)] * w[u * k + v];
      err = std::max(err, std::abs(y(i, j) - ref));
    }
  }
  EXPECT_LE(err, 1e-9);
}

TEST(PadEmbed, CountsAndCropInverse) {
  const auto plan = pc::FftPlan<double>(pc::FftSizes{2, 0, 2, 1, 8, 2});
  pc::Plane<double> x(2, 2, {1, 2, 3, 4});
  const auto e = pc::pad_embed(x.view(), plan);
  EXPECT_EQ(std::count(e.data.begin(), e.data.end(), 0.0), 60);
  EXPECT_EQ(pc::crop_valid(e.view(), plan).data, x.data);

  const auto padded = pc::pad_embed(x.view(), pc::plan_fft<double>(2, 1, 1));
  EXPECT_EQ(padded(1, 1), 1.0);
  EXPECT_EQ(padded(2, 2), 4.0);
  EXPECT_EQ(padded(0, 0), 0.0);

  pc::Plane<double> wrong(3, 3);
  EXPECT_THROW(pc::pad_embed(wrong.view(), plan), pc::ShapeError);
}

TEST(PadEmbed, ImpulseKernelPipelineReturnsInput) {
  const std::size_t n = 6;
  const auto plan = pc::plan_fft<double>(n, 3, 0);
  const auto x = test::random_vector<double>(n * n, 31);
  pc::Plane<double> impulse(plan.fft_len(), plan.fft_len());
  impulse(0, 0) = 1.0;
  const auto xs = pc::rfft2(pc::pad_embed(pc::PlaneView<double>{x, n, n}, plan).view(), plan);
  const auto ks = pc::rfft2(impulse.view(), plan);
  pc::SpectrumRect<double> prod(1, 1, plan.fft_len(), plan.half_cols());
  for (std::size_t i = 0; i < prod.re().size(); ++i) {
    const cd z = cd(xs.re()[i], xs.im()[i]) * cd(ks.re()[i], ks.im()[i]);
    prod.re()[i] = z.real();
    prod.im()[i] = z.imag();
  }
  const auto y = pc::irfft2(prod.slab(0, 0), plan);
  pc::Plane<double> top(n, n);
  pc::crop_at<double>(y.data, plan.fft_len(), 0, 0, n, std::span<double>(top.data));
  EXPECT_LE(pc::max_abs_diff<double>(top.data, x), 1e-12);
}

TEST(Spectral, FloatTransformsRoundTrip) {
  const auto plan = pc::plan_fft<float>(10, 3, 1);
  const std::size_t len = plan.fft_len();
  const auto x = test::random_vector<float>(len * len, 3);
  const auto back = pc::irfft2(pc::rfft2(pc::PlaneView<float>{x, len, len}, plan).slab(0, 0), plan);
  EXPECT_LE(pc::max_abs_diff<float>(x, back.data), 1e-5f);
}
