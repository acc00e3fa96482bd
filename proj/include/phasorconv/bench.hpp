#pragma once

// Stage-level timing of one forward + backward pass per repetition.
// Engines and plans are built before the warmup repetitions, so the
// measured stages never include plan construction.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "phasorconv/convengine.hpp"
#include "phasorconv/error.hpp"
#include "phasorconv/fixture.hpp"
#include "phasorconv/flops.hpp"
#include "phasorconv/tensor.hpp"

namespace phasorconv {

inline constexpr std::size_t kMinActiveReps = 3;

struct BenchConfig {
  ConvParams params;
  Backend backend = Backend::SpectralRect;
  std::size_t warmup = 4;
  std::size_t active = 4;
  unsigned threads = 1;
  std::uint64_t seed = 1;
};

struct Summary {
  double median_ns = 0;
  double iqr_ns = 0;
};

/// Linear-interpolation quantile of an unsorted sample, q in [0, 1].
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw Error("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline Summary summarize(const std::vector<double>& samples) {
  return {quantile(samples, 0.5), quantile(samples, 0.75) - quantile(samples, 0.25)};
}

struct StageResult {
  Stage stage;
  Summary time;
  OpCost ops;  // per repetition
};

struct BenchResult {
  BenchConfig config;
  DType dtype = DType::F64;
  std::vector<StageResult> stages;  // every stage, fixed order
  Summary total;                    // wall time of one repetition
  OpCost total_ops;
  std::uint64_t angle_wraps = 0;

  const StageResult& stage(Stage s) const {
    for (const auto& r : stages)
      if (r.stage == s) return r;
    throw Error("no bench row for stage " + std::string(stage_name(s)));
  }
};

template <std::floating_point T>
BenchResult run_bench(const BenchConfig& cfg) {
  if (cfg.active < kMinActiveReps)
    throw Error("active repetitions must be >= " + std::to_string(kMinActiveReps) + ", got " +
                std::to_string(cfg.active));
  if (cfg.backend == Backend::DirectSpatial) throw Error("bench times spectral backends only");
  const ConvParams& p = cfg.params;
  const ConvEngine<T> engine(p, cfg.backend, EngineOptions{.threads = cfg.threads});

  std::mt19937_64 rng(cfg.seed);
  auto fill = [&rng](Dims4 d) {
    RealTensor4<T> t(d);
    std::uniform_real_distribution<T> u(T(-1), T(1));
    for (T& v : t.data()) v = u(rng);
    return t;
  };
  const RealTensor4<T> x = fill(p.input_dims());
  const RealTensor4<T> w = fill(p.kernel_dims());
  const RealTensor4<T> gy = fill(p.output_dims());

  std::array<std::vector<double>, kStageCount> stage_samples;
  std::vector<double> totals;
  FlopLedger rep_ledger;
  for (std::size_t rep = 0; rep < cfg.warmup + cfg.active; ++rep) {
    FlopLedger ledger;
    StageTimes times;
    const auto t0 = std::chrono::steady_clock::now();
    (void)engine.forward(x, w, ledger, &times);
    (void)engine.backward_input(gy, w, ledger, &times);
    (void)engine.backward_kernel(gy, x, ledger, &times);
    const auto t1 = std::chrono::steady_clock::now();
    if (rep < cfg.warmup) continue;
    for (Stage s : kAllStages) stage_samples[static_cast<std::size_t>(s)].push_back(static_cast<double>(times[s]));
    totals.push_back(static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count()));
    rep_ledger = ledger;
  }

  BenchResult out;
  out.config = cfg;
  out.dtype = dtype_of<T>();
  for (Stage s : kAllStages)
    out.stages.push_back({s, summarize(stage_samples[static_cast<std::size_t>(s)]), rep_ledger.cost(s)});
  out.total = summarize(totals);
  out.total_ops = rep_ledger.total();
  out.angle_wraps = rep_ledger.angle_wraps();
  return out;
}

/// rect total / phasor total; above 1 means the phasor pass was faster.
inline double speedup(const BenchResult& rect, const BenchResult& phasor) {
  return rect.total.median_ns / phasor.total.median_ns;
}

}  // namespace phasorconv
