#pragma once

// Self-check suite: every numerical invariant of the library evaluated
// against an oracle, reported as (measured, tolerance) pairs.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "phasorconv/complexforms.hpp"
#include "phasorconv/convengine.hpp"
#include "phasorconv/fixture.hpp"
#include "phasorconv/flops.hpp"
#include "phasorconv/nn.hpp"
#include "phasorconv/spectral.hpp"

namespace phasorconv {

enum class VerifyScale { Small, FullDesk };

inline constexpr std::string_view to_string(VerifyScale s) {
  return s == VerifyScale::Small ? "small" : "full-desk";
}

struct VerifyOptions {
  VerifyScale scale = VerifyScale::Small;
  /// Flips the conjugation convention of every spectral engine; the
  /// equivalence checks must then fail.
  bool sabotage_conj = false;
  unsigned threads = 1;
  std::uint64_t seed = 2024;
};

struct Check {
  std::string name;
  double measured = 0;
  double tolerance = 0;
  bool passed = false;
};

struct VerifyReport {
  VerifyScale scale = VerifyScale::Small;
  bool sabotage_conj = false;
  std::vector<Check> checks;
  std::int64_t elapsed_ns = 0;

  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return !checks.empty();
  }
};

/// Random geometry within the bounds B <= 4, channels <= 8, N <= 32,
/// K in {1, 2, 3, 5, 7}, P in {0, 1, 2}.
inline ConvParams random_geometry(std::mt19937_64& rng, std::size_t max_n = 32) {
  constexpr std::size_t kernels[] = {1, 2, 3, 5, 7};
  std::size_t k = kernels[rng() % 5];
  while (k > max_n) k = kernels[rng() % 5];
  const std::size_t n = k + rng() % (max_n - k + 1);
  return ConvParams::make(1 + rng() % 4, 1 + rng() % 8, 1 + rng() % 8, n, k, rng() % 3);
}

namespace detail {

inline RealTensor4<double> uniform_tensor(Dims4 d, std::mt19937_64& rng) {
  RealTensor4<double> t(d);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& v : t.data()) v = u(rng);
  return t;
}

inline double rel_max(std::span<const double> got, std::span<const double> want) {
  return max_abs_diff(got, want) / std::max(max_abs(want), std::numeric_limits<double>::min());
}

class CheckList {
 public:
  void add(std::string name, double measured, double tolerance) {
    const bool ok = std::isfinite(measured) && measured <= tolerance;
    checks_.push_back({std::move(name), measured, tolerance, ok});
  }
  std::vector<Check> take() { return std::move(checks_); }

 private:
  std::vector<Check> checks_;
};

constexpr Backend kVerifyBackends[] = {Backend::DirectSpatial, Backend::SpectralRect,
                                       Backend::SpectralPhasor};

inline void check_backend_equivalence(CheckList& out, const VerifyOptions& opt, std::mt19937_64& rng) {
  const std::size_t count = opt.scale == VerifyScale::Small ? 40 : 200;
  const EngineOptions eng{.threads = opt.threads, .flip_conjugation = opt.sabotage_conj};
  double fwd = 0, bin = 0, bker = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const ConvParams p = random_geometry(rng);
    const auto x = uniform_tensor(p.input_dims(), rng);
    const auto w = uniform_tensor(p.kernel_dims(), rng);
    const auto gy = uniform_tensor(p.output_dims(), rng);
    std::vector<RealTensor4<double>> ys, dxs, dws;
    for (Backend b : kVerifyBackends) {
      const ConvEngine<double> e(p, b, eng);
      FlopLedger l;
      ys.push_back(e.forward(x, w, l));
      dxs.push_back(e.backward_input(gy, w, l));
      dws.push_back(e.backward_kernel(gy, x, l));
    }
    for (std::size_t a = 0; a < ys.size(); ++a)
      for (std::size_t b = a + 1; b < ys.size(); ++b) {
        fwd = std::max(fwd, max_abs_diff(ys[a], ys[b]));
        bin = std::max(bin, max_abs_diff(dxs[a], dxs[b]));
        bker = std::max(bker, max_abs_diff(dws[a], dws[b]));
      }
  }
  out.add("forward_equivalence", fwd, 1e-9);
  out.add("backward_input_equivalence", bin, 1e-9);
  out.add("backward_kernel_equivalence", bker, 1e-9);
}

// Central differences of L = sum(y^2)/2 through the direct backend; the
// analytic gradients of each backend are compared against them.
inline void check_gradients(CheckList& out, const VerifyOptions& opt, std::mt19937_64& rng) {
  const std::size_t count = opt.scale == VerifyScale::Small ? 6 : 20;
  const double h = 1e-6;
  const EngineOptions eng{.threads = opt.threads, .flip_conjugation = opt.sabotage_conj};
  double gx_err = 0, gw_err = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const ConvParams p = random_geometry(rng, 6);
    auto x = uniform_tensor(p.input_dims(), rng);
    auto w = uniform_tensor(p.kernel_dims(), rng);
    const ConvEngine<double> oracle(p, Backend::DirectSpatial);
    auto loss = [&] {
      FlopLedger l;
      const auto y = oracle.forward(x, w, l);
      double s = 0;
      for (double v : y.data()) s += v * v;
      return 0.5 * s;
    };
    auto differences = [&](std::span<double> t) {
      std::vector<double> g(t.size());
      for (std::size_t j = 0; j < t.size(); ++j) {
        const double keep = t[j];
        t[j] = keep + h;
        const double up = loss();
        t[j] = keep - h;
        const double down = loss();
        t[j] = keep;
        g[j] = (up - down) / (2 * h);
      }
      return g;
    };
    const auto fd_x = differences(x.data());
    const auto fd_w = differences(w.data());
    for (Backend b : kVerifyBackends) {
      const ConvEngine<double> e(p, b, eng);
      FlopLedger l;
      const auto y = e.forward(x, w, l);
      gx_err = std::max(gx_err, rel_max(e.backward_input(y, w, l).data(), fd_x));
      gw_err = std::max(gw_err, rel_max(e.backward_kernel(y, x, l).data(), fd_w));
    }
  }
  out.add("gradient_input_finite_difference", gx_err, 1e-6);
  out.add("gradient_kernel_finite_difference", gw_err, 1e-6);
}

inline void check_transforms(CheckList& out, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double fft_err = 0;
  for (std::size_t n = 2; n <= 256; n *= 2) {
    std::vector<std::complex<double>> v(n);
    for (auto& z : v) z = {u(rng), u(rng)};
    const auto ref = dft_1d_naive<double>(v, Direction::Forward);
    const auto got = fft_1d<double>(v, Direction::Forward);
    double diff = 0, scale = 0;
    for (std::size_t i = 0; i < n; ++i) {
      diff = std::max(diff, std::abs(got[i] - ref[i]));
      scale = std::max(scale, std::abs(ref[i]));
    }
    fft_err = std::max(fft_err, diff / scale);
  }
  out.add("fft_matches_naive_dft", fft_err, 1e-10);

  double round_trip = 0, parseval = 0;
  for (std::size_t len : {16u, 32u}) {
    const auto plan = plan_fft<double>(len, 1, 0);
    std::vector<double> x(len * len);
    for (double& v : x) v = u(rng);
    const auto spec = rfft2<double>(PlaneView<double>{x, len, len}, plan);
    const auto back = irfft2<double>(spec.slab(0, 0), plan);
    round_trip = std::max(round_trip, max_abs_diff<double>(back.data, x));
    // Hermitian half-spectrum energy: interior columns count twice.
    double e_space = 0, e_freq = 0;
    for (double v : x) e_space += v * v;
    const std::size_t half = plan.half_cols();
    const auto s = spec.slab(0, 0);
    for (std::size_t r = 0; r < len; ++r)
      for (std::size_t c = 0; c < half; ++c) {
        const double w = (c == 0 || c == len / 2) ? 1.0 : 2.0;
        const std::size_t i = r * half + c;
        e_freq += w * (s.re[i] * s.re[i] + s.im[i] * s.im[i]);
      }
    e_freq /= static_cast<double>(len * len);
    parseval = std::max(parseval, std::abs(e_freq - e_space) / e_space);
  }
  out.add("rfft2_irfft2_round_trip", round_trip, 1e-12);
  out.add("parseval", parseval, 1e-9);
}

inline void check_complex_forms(CheckList& out, std::mt19937_64& rng) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  double round_trip = 0, product = 0;
  for (int i = 0; i < 20000; ++i) {
    const CRect<double> a{u(rng), u(rng)}, b{u(rng), u(rng)};
    const double ma = std::hypot(a.re, a.im), mb = std::hypot(b.re, b.im);
    const auto back = to_rectangular(to_phasor(a));
    round_trip = std::max(round_trip, std::max(std::abs(back.re - a.re), std::abs(back.im - a.im)) / (eps * ma));
    const auto r = mul_rect(a, b);
    const auto p = to_rectangular(mul_phasor(to_phasor(a), to_phasor(b)));
    product = std::max(product, std::max(std::abs(r.re - p.re), std::abs(r.im - p.im)) / (eps * ma * mb));
  }
  // Measured in units of machine epsilon times the magnitude.
  out.add("phasor_round_trip_eps_units", round_trip, 8);
  out.add("phasor_product_equivalence_eps_units", product, 16);
}

inline void check_flop_counts(CheckList& out, const VerifyOptions& opt, std::mt19937_64& rng) {
  const std::size_t count = opt.scale == VerifyScale::Small ? 10 : 25;
  double mul_ratio_dev = 0, mul_add_ratio_dev = 0, mismatched_stages = 0;
  std::vector<ConvParams> geometries{ConvParams::make(2, 3, 4, 16, 3, 1)};
  for (std::size_t i = 1; i < count; ++i) geometries.push_back(random_geometry(rng, 16));
  double worked_example = -1;
  for (const ConvParams& p : geometries) {
    const auto x = uniform_tensor(p.input_dims(), rng);
    const auto w = uniform_tensor(p.kernel_dims(), rng);
    const auto gy = uniform_tensor(p.output_dims(), rng);
    for (ConvOp op : {ConvOp::Forward, ConvOp::BackwardInput, ConvOp::BackwardKernel}) {
      std::array<FlopLedger, 2> ledgers;
      for (std::size_t f = 0; f < 2; ++f) {
        const ConvEngine<double> e(p, f == 0 ? Backend::SpectralRect : Backend::SpectralPhasor,
                                   {.threads = opt.threads});
        switch (op) {
          case ConvOp::Forward: (void)e.forward(x, w, ledgers[f]); break;
          case ConvOp::BackwardInput: (void)e.backward_input(gy, w, ledgers[f]); break;
          case ConvOp::BackwardKernel: (void)e.backward_kernel(gy, x, ledgers[f]); break;
        }
        const auto report = reconcile(ledgers[f], p.cost_model(f == 0 ? Form::Rect : Form::Phasor, op));
        for (const auto& row : report.rows) mismatched_stages += row.exact_required && !row.match;
      }
      const OpCost& r = ledgers[0].cost(Stage::SpectralProduct);
      const OpCost& ph = ledgers[1].cost(Stage::SpectralProduct);
      mul_ratio_dev = std::max(mul_ratio_dev, static_cast<double>(r.mul > 4 * ph.mul ? r.mul - 4 * ph.mul : 4 * ph.mul - r.mul));
      mul_add_ratio_dev = std::max(mul_add_ratio_dev, static_cast<double>(r.mul_add() > 3 * ph.mul_add() ? r.mul_add() - 3 * ph.mul_add() : 3 * ph.mul_add() - r.mul_add()));
      if (worked_example < 0 && op == ConvOp::Forward)
        worked_example = std::abs(static_cast<double>(r.mul) - 52224.0);
    }
  }
  out.add("product_multiplies_rect_eq_4x_phasor", mul_ratio_dev, 0);
  out.add("product_mul_add_rect_eq_3x_phasor", mul_add_ratio_dev, 0);
  out.add("reconcile_exact_stage_mismatches", mismatched_stages, 0);
  out.add("reconcile_worked_example_52224", worked_example, 0);
}

inline void check_fixture(CheckList& out, std::mt19937_64& rng) {
  const auto t = uniform_tensor({2, 3, 4, 5}, rng);
  const auto bytes = encode_fixture(t);
  const auto back = decode_fixture<double>(bytes);
  double mismatches = back.dims() == t.dims() ? 0 : 1;
  for (std::size_t i = 0; i < t.size() && mismatches == 0; ++i)
    mismatches += std::bit_cast<std::uint64_t>(t.data()[i]) != std::bit_cast<std::uint64_t>(back.data()[i]);
  out.add("fixture_round_trip_bitwise", mismatches, 0);
}

inline void check_determinism(CheckList& out, const VerifyOptions& opt, std::mt19937_64& rng) {
  const ConvParams p = ConvParams::make(3, 4, 5, 12, 3, 1);
  const auto x = uniform_tensor(p.input_dims(), rng);
  const auto w = uniform_tensor(p.kernel_dims(), rng);
  double diff = 0;
  for (Backend b : {Backend::SpectralRect, Backend::SpectralPhasor}) {
    FlopLedger l1, l2;
    const auto y1 = ConvEngine<double>(p, b, {.threads = 1}).forward(x, w, l1);
    const auto y2 = ConvEngine<double>(p, b, {.threads = std::max(2u, opt.threads)}).forward(x, w, l2);
    diff = std::max(diff, max_abs_diff(y1, y2));
    diff += l1 == l2 ? 0 : 1;
  }
  out.add("thread_count_bitwise_determinism", diff, 0);
}

inline void check_training(CheckList& out, const VerifyOptions& opt) {
  TrainConfig cfg;
  cfg.threads = opt.threads;
  if (opt.scale == VerifyScale::Small) cfg.steps = 100;
  auto run = [&](Backend b) {
    cfg.backend = b;
    return train<double>(cfg);
  };
  const auto rect = run(Backend::SpectralRect);
  const auto phasor = run(Backend::SpectralPhasor);
  const auto direct = run(Backend::DirectSpatial);
  const auto again = run(Backend::SpectralPhasor);
  double gap = 0, direct_gap = 0, repeat = 0;
  for (std::size_t t = 0; t < rect.entries.size(); ++t) {
    const double r = rect.entries[t].loss;
    gap = std::max(gap, std::abs(phasor.entries[t].loss - r) / std::abs(r));
    direct_gap = std::max(direct_gap, std::abs(direct.entries[t].loss - r));
    repeat = std::max(repeat, std::abs(again.entries[t].loss - phasor.entries[t].loss));
  }
  out.add("train_loss_gap_phasor_vs_rect", gap, 1e-3);
  out.add("train_loss_gap_direct_vs_rect", direct_gap, 1e-6);
  out.add("train_repeat_bitwise", repeat, 0);
  if (opt.scale == VerifyScale::FullDesk) {
    const double worst = std::min({rect.final_accuracy, phasor.final_accuracy, direct.final_accuracy});
    // Reported as the shortfall below the accuracy floor.
    out.add("train_accuracy_shortfall_below_0.9", std::max(0.0, 0.9 - worst), 0);
  }
}

}  // namespace detail

inline VerifyReport run_verify(const VerifyOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(opt.seed);
  detail::CheckList list;
  detail::check_backend_equivalence(list, opt, rng);
  detail::check_gradients(list, opt, rng);
  detail::check_transforms(list, rng);
  detail::check_complex_forms(list, rng);
  detail::check_flop_counts(list, opt, rng);
  detail::check_fixture(list, rng);
  detail::check_determinism(list, opt, rng);
  detail::check_training(list, opt);
  VerifyReport report;
  report.scale = opt.scale;
  report.sabotage_conj = opt.sabotage_conj;
  report.checks = list.take();
  report.elapsed_ns =
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace phasorconv
