#pragma once

// JSON, CSV and text renderings of bench, flops, train and verify results.
// Every wall-clock quantity sits under a "timing" key so reports can be
// compared byte-for-byte after strip_timing().

#include <charconv>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>  // nlohmann/json, vendored

#include "phasorconv/bench.hpp"
#include "phasorconv/flops.hpp"
#include "phasorconv/nn.hpp"
#include "phasorconv/verify.hpp"

namespace phasorconv {

using json = nlohmann::ordered_json;

inline constexpr int kReportSchemaVersion = 1;

struct Environment {
  std::string scalar = "f64";
  unsigned threads = 1;
  std::string build_profile = "unknown";
  std::string compiler = compiler_id();

  static std::string compiler_id() {
#if defined(__clang__)
    return std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
    return std::string("gcc ") + __VERSION__;
#else
    return "unknown";
#endif
  }
};

inline json to_json(const Environment& e) {
  return {{"scalar", e.scalar}, {"threads", e.threads}, {"build_profile", e.build_profile},
          {"compiler", e.compiler}};
}

inline json to_json(const OpCost& c) {
  return {{"mul", c.mul}, {"add", c.add}, {"div", c.div}, {"sqrt", c.sqrt}, {"trig", c.trig}};
}

inline json geometry_json(const ConvParams& p) {
  return {{"B", p.batch},  {"f1", p.in_channels}, {"f2", p.out_channels}, {"N", p.image},
          {"K", p.kernel}, {"P", p.padding},      {"L", p.sizes.fft_len}};
}

/// Removes every "timing" member, recursively.
inline void strip_timing(json& j) {
  if (j.is_object()) {
    j.erase("timing");
    for (auto& [key, value] : j.items()) strip_timing(value);
  } else if (j.is_array()) {
    for (auto& value : j) strip_timing(value);
  }
}

inline std::string render(json j, bool omit_timing) {
  if (omit_timing) strip_timing(j);
  return j.dump(2) + "\n";
}

inline std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// ---------------------------------------------------------------------------
// Bench.

struct BenchComparison {
  ConvParams params;
  double speedup = 0;
  double product_time_ratio = 0;  // rect / phasor on the spectral_product stage
  double product_mul_ratio = 0;
  double product_mul_add_ratio = 0;
};

/// Pairs each rect result with the phasor result of the same geometry.
inline std::vector<BenchComparison> compare(const std::vector<BenchResult>& results) {
  std::vector<BenchComparison> out;
  for (const auto& r : results) {
    if (r.config.backend != Backend::SpectralRect) continue;
    for (const auto& p : results) {
      if (p.config.backend != Backend::SpectralPhasor) continue;
      const auto& a = r.config.params;
      const auto& b = p.config.params;
      if (a.batch != b.batch || a.in_channels != b.in_channels || a.out_channels != b.out_channels ||
          a.image != b.image || a.kernel != b.kernel || a.padding != b.padding)
        continue;
      const auto& rp = r.stage(Stage::SpectralProduct);
      const auto& pp = p.stage(Stage::SpectralProduct);
      out.push_back({a, speedup(r, p), rp.time.median_ns / pp.time.median_ns,
                     static_cast<double>(rp.ops.mul) / static_cast<double>(pp.ops.mul),
                     static_cast<double>(rp.ops.mul_add()) / static_cast<double>(pp.ops.mul_add())});
    }
  }
  return out;
}

inline json bench_json(const std::vector<BenchResult>& results, const Environment& env) {
  json rows = json::array();
  for (const auto& r : results) {
    json stages = json::array();
    for (const auto& s : r.stages)
      stages.push_back({{"stage", stage_name(s.stage)},
                        {"ops", to_json(s.ops)},
                        {"timing", {{"median_ns", s.time.median_ns}, {"iqr_ns", s.time.iqr_ns}}}});
    rows.push_back({{"backend", to_string(r.config.backend)},
                    {"geometry", geometry_json(r.config.params)},
                    {"warmup", r.config.warmup},
                    {"active", r.config.active},
                    {"stages", stages},
                    {"ops_total", to_json(r.total_ops)},
                    {"angle_wraps", r.angle_wraps},
                    {"timing", {{"median_ns", r.total.median_ns}, {"iqr_ns", r.total.iqr_ns}}}});
  }
  json comparisons = json::array();
  for (const auto& c : compare(results))
    comparisons.push_back({{"geometry", geometry_json(c.params)},
                           {"spectral_product_ratio", {{"mul", c.product_mul_ratio}, {"mul_add", c.product_mul_add_ratio}}},
                           {"timing", {{"speedup", c.speedup}, {"spectral_product_speedup", c.product_time_ratio}}}});
  return {{"kind", "bench"},
          {"schema_version", kReportSchemaVersion},
          {"environment", to_json(env)},
          {"rows", rows},
          {"comparisons", comparisons}};
}

inline constexpr const char* kBenchCsvHeader =
    "backend,B,f1,f2,N,K,P,stage,median_ns,iqr_ns,mul,add,div,sqrt,trig";

/// One row per stage plus a "total" row per result.
inline std::string bench_csv(const std::vector<BenchResult>& results) {
  std::ostringstream out;
  out << kBenchCsvHeader << "\n";
  auto row = [&](const BenchResult& r, std::string_view stage, const Summary& t, const OpCost& c) {
    const auto& p = r.config.params;
    out << to_string(r.config.backend) << ',' << p.batch << ',' << p.in_channels << ',' << p.out_channels
        << ',' << p.image << ',' << p.kernel << ',' << p.padding << ',' << stage << ','
        << format_number(t.median_ns) << ',' << format_number(t.iqr_ns) << ',' << c.mul << ',' << c.add
        << ',' << c.div << ',' << c.sqrt << ',' << c.trig << "\n";
  };
  for (const auto& r : results) {
    for (const auto& s : r.stages) row(r, stage_name(s.stage), s.time, s.ops);
    row(r, "total", r.total, r.total_ops);
  }
  return out.str();
}

inline std::string bench_table(const std::vector<BenchResult>& results) {
  std::ostringstream out;
  char line[256];
  for (const auto& r : results) {
    const auto& p = r.config.params;
    std::snprintf(line, sizeof line, "%s  B=%zu f1=%zu f2=%zu N=%zu K=%zu P=%zu L=%zu  warmup=%zu active=%zu\n",
                  std::string(to_string(r.config.backend)).c_str(), p.batch, p.in_channels, p.out_channels,
                  p.image, p.kernel, p.padding, p.sizes.fft_len, r.config.warmup, r.config.active);
    out << line;
    std::snprintf(line, sizeof line, "  %-20s %14s %12s %16s %16s %12s %12s\n", "stage", "median_ms", "iqr_ms",
                  "mul", "add", "sqrt", "trig");
    out << line;
    auto emit = [&](std::string_view name, const Summary& t, const OpCost& c) {
      std::snprintf(line, sizeof line, "  %-20s %14.3f %12.3f %16llu %16llu %12llu %12llu\n",
                    std::string(name).c_str(), t.median_ns / 1e6, t.iqr_ns / 1e6,
                    static_cast<unsigned long long>(c.mul), static_cast<unsigned long long>(c.add),
                    static_cast<unsigned long long>(c.sqrt), static_cast<unsigned long long>(c.trig));
      out << line;
    };
    for (const auto& s : r.stages) emit(stage_name(s.stage), s.time, s.ops);
    emit("total", r.total, r.total_ops);
  }
  for (const auto& c : compare(results)) {
    std::snprintf(line, sizeof line,
                  "B=%zu  speedup (rect/phasor total) %.3fx  spectral_product time ratio %.3fx  "
                  "multiplies %.2fx  mul+add %.2fx\n",
                  c.params.batch, c.speedup, c.product_time_ratio, c.product_mul_ratio, c.product_mul_add_ratio);
    out << line;
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Flops.

struct FlopsReport {
  CostModel model;  // rect form; the phasor form differs only in `form`
  double baseline = 0;
  double baseline_product_term = 0;  // 4·B·f2·f1·E; the rest is the transform term
  CostBreakdown rect;
  CostBreakdown phasor;
  std::optional<double> reduction_mul;
  std::optional<double> reduction_mul_add;
};

inline FlopsReport make_flops_report(CostModel model) {
  model.form = Form::Rect;
  FlopsReport r;
  r.model = model;
  r.baseline = flops_baseline_paper(model);
  CostModel no_fft = model;
  no_fft.c_fft = 0;
  r.baseline_product_term = flops_baseline_paper(no_fft);
  r.rect = itemize(model);
  r.phasor = flops_phasor_model(model);
  if (r.phasor.product.mul > 0)
    r.reduction_mul = static_cast<double>(r.rect.product.mul) / static_cast<double>(r.phasor.product.mul);
  if (r.phasor.product.mul_add() > 0)
    r.reduction_mul_add =
        static_cast<double>(r.rect.product.mul_add()) / static_cast<double>(r.phasor.product.mul_add());
  return r;
}

inline json breakdown_json(const CostBreakdown& b) {
  return {{"fft_estimate", b.fft},         {"product", to_json(b.product)},
          {"reduce", to_json(b.reduce)},   {"convert_in", to_json(b.convert_in)},
          {"convert_out", to_json(b.convert_out)}};
}

inline json flops_json(const FlopsReport& r) {
  const auto& m = r.model;
  auto optional_number = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"kind", "flops"},
          {"schema_version", kReportSchemaVersion},
          {"geometry", {{"B", m.b}, {"f1", m.f1}, {"f2", m.f2}, {"N", m.n}, {"K", m.k}, {"P", m.p}, {"L", m.l}}},
          {"variant", to_string(m.convention)},
          {"c_fft", m.c_fft},
          {"spectral_elements", m.spectral_elements()},
          {"baseline_flops", r.baseline},
          {"baseline_terms", {{"transform", r.baseline - r.baseline_product_term}, {"product", r.baseline_product_term}}},
          {"rect", breakdown_json(r.rect)},
          {"phasor", breakdown_json(r.phasor)},
          {"conversion_overhead", to_json(r.phasor.convert_in + r.phasor.convert_out)},
          {"reduction", {{"multiplies", optional_number(r.reduction_mul)},
                         {"mul_add", optional_number(r.reduction_mul_add)}}}};
}

inline std::string flops_table(const FlopsReport& r) {
  const auto& m = r.model;
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "geometry B=%llu f1=%llu f2=%llu N=%llu K=%llu P=%llu L=%llu  variant=%s  C=%g\n",
                static_cast<unsigned long long>(m.b), static_cast<unsigned long long>(m.f1),
                static_cast<unsigned long long>(m.f2), static_cast<unsigned long long>(m.n),
                static_cast<unsigned long long>(m.k), static_cast<unsigned long long>(m.p),
                static_cast<unsigned long long>(m.l), std::string(to_string(m.convention)).c_str(), m.c_fft);
  out << line;
  std::snprintf(line, sizeof line, "baseline: %.0f = transform term %.0f + product term %.0f\n", r.baseline,
                r.baseline - r.baseline_product_term, r.baseline_product_term);
  out << line;
  std::snprintf(line, sizeof line, "  %-12s %18s %18s %14s %14s %16s\n", "form", "fft_estimate", "product_mul",
                "product_add", "convert_sqrt", "convert_trig");
  out << line;
  for (const auto* b : {&r.rect, &r.phasor}) {
    const OpCost conv = b->convert_in + b->convert_out;
    std::snprintf(line, sizeof line, "  %-12s %18.0f %18llu %14llu %14llu %16llu\n", b == &r.rect ? "rect" : "phasor",
                  b->fft, static_cast<unsigned long long>(b->product.mul),
                  static_cast<unsigned long long>(b->product.add), static_cast<unsigned long long>(conv.sqrt),
                  static_cast<unsigned long long>(conv.trig));
    out << line;
  }
  const OpCost overhead = r.phasor.convert_in + r.phasor.convert_out;
  std::snprintf(line, sizeof line, "phasor conversion overhead: mul=%llu add=%llu sqrt=%llu trig=%llu\n",
                static_cast<unsigned long long>(overhead.mul), static_cast<unsigned long long>(overhead.add),
                static_cast<unsigned long long>(overhead.sqrt), static_cast<unsigned long long>(overhead.trig));
  out << line;
  if (r.reduction_mul && r.reduction_mul_add) {
    std::snprintf(line, sizeof line, "product-stage reduction: %.2fx (multiplies)  %.2fx (mul+add)\n",
                  *r.reduction_mul, *r.reduction_mul_add);
    out << line;
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Train.

inline json train_run_json(const TrainTrace& t) {
  json entries = json::array();
  for (const auto& e : t.entries)
    entries.push_back({{"step", e.step}, {"loss", e.loss}, {"ops", to_json(e.ops)}, {"timing", {{"wall_ns", e.wall_ns}}}});
  const auto& c = t.config;
  return {{"backend", to_string(c.backend)},
          {"config", {{"steps", c.steps}, {"lr", c.lr}, {"seed", c.seed}, {"batch", c.batch},
                      {"train_size", c.train_size}, {"test_size", c.test_size}}},
          {"final_accuracy", t.final_accuracy},
          {"entries", entries},
          {"timing", {{"total_wall_ns", t.total_wall_ns}}}};
}

/// Largest per-step |loss_b - loss_a| / |loss_a|.
inline double max_relative_loss_gap(const TrainTrace& a, const TrainTrace& b) {
  if (a.entries.size() != b.entries.size()) throw Error("traces have different lengths");
  double gap = 0;
  for (std::size_t i = 0; i < a.entries.size(); ++i)
    gap = std::max(gap, std::abs(b.entries[i].loss - a.entries[i].loss) / std::abs(a.entries[i].loss));
  return gap;
}

inline json train_json(const std::vector<TrainTrace>& runs, const Environment& env) {
  json out = {{"kind", "train"}, {"schema_version", kReportSchemaVersion}, {"environment", to_json(env)}};
  json arr = json::array();
  for (const auto& r : runs) arr.push_back(train_run_json(r));
  out["runs"] = arr;
  if (runs.size() == 2) {
    out["comparison"] = {
        {"reference", to_string(runs[0].config.backend)},
        {"candidate", to_string(runs[1].config.backend)},
        {"max_relative_loss_gap", max_relative_loss_gap(runs[0], runs[1])},
        {"timing", {{"total_time_ratio", static_cast<double>(runs[0].total_wall_ns) /
                                             static_cast<double>(runs[1].total_wall_ns)}}}};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Verify.

inline json verify_json(const VerifyReport& r, const Environment& env) {
  json checks = json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"name", c.name}, {"measured", c.measured}, {"tolerance", c.tolerance}, {"passed", c.passed}});
  return {{"kind", "verify"},
          {"schema_version", kReportSchemaVersion},
          {"environment", to_json(env)},
          {"scale", to_string(r.scale)},
          {"sabotage_conj", r.sabotage_conj},
          {"passed", r.passed()},
          {"checks", checks},
          {"timing", {{"elapsed_ns", r.elapsed_ns}}}};
}

inline std::string verify_table(const VerifyReport& r) {
  std::ostringstream out;
  char line[256];
  for (const auto& c : r.checks) {
    std::snprintf(line, sizeof line, "%-4s %-44s measured %-12.4g tolerance %g\n", c.passed ? "ok" : "FAIL",
                  c.name.c_str(), c.measured, c.tolerance);
    out << line;
  }
  std::snprintf(line, sizeof line, "%zu checks, %s, %.2f s\n", r.checks.size(), r.passed() ? "all passed" : "FAILED",
                static_cast<double>(r.elapsed_ns) / 1e9);
  out << line;
  return out.str();
}

}  // namespace phasorconv
