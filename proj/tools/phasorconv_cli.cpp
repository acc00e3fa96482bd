// phasorconv command-line front end.
//
// Exit codes: 0 success, 1 a check failed, 2 usage or internal error.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "phasorconv/bench.hpp"
#include "phasorconv/flops.hpp"
#include "phasorconv/nn.hpp"
#include "phasorconv/report.hpp"
#include "phasorconv/verify.hpp"

#ifndef PHASORCONV_BUILD_PROFILE
#define PHASORCONV_BUILD_PROFILE "unknown"
#endif

namespace pc = phasorconv;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The environment variable wins over the flag.
unsigned resolve_threads(unsigned flag) {
  const char* env = std::getenv("PHASORCONV_THREADS");
  if (env == nullptr || *env == '\0') return flag;
  try {
    std::size_t used = 0;
    const unsigned long value = std::stoul(env, &used);
    if (used != std::string(env).size() || value == 0 || value > 1024) throw std::invalid_argument(env);
    return static_cast<unsigned>(value);
  } catch (const std::exception&) {
    throw UsageError(std::string("PHASORCONV_THREADS must be an integer in [1, 1024], got \"") + env + "\"");
  }
}

// "-" writes to stdout.
void write_output(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw pc::Error("cannot open " + path + " for writing");
  f << text;
  if (!f) throw pc::Error("write failed: " + path);
}

pc::Environment environment(pc::DType dtype, unsigned threads) {
  pc::Environment env;
  env.scalar = std::string(pc::to_string(dtype));
  env.threads = threads;
  env.build_profile = PHASORCONV_BUILD_PROFILE;
  return env;
}

struct Geometry {
  std::vector<std::size_t> batch{32};
  std::size_t in_ch = 16;
  std::size_t out_ch = 16;
  std::size_t image = 32;
  std::size_t kernel = 3;
  std::size_t pad = 0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--batch", batch, "Batch size, or a comma-separated sweep")->delimiter(',')->capture_default_str();
    cmd->add_option("--in-ch", in_ch, "Input channels f1")->capture_default_str();
    cmd->add_option("--out-ch", out_ch, "Output channels f2")->capture_default_str();
    cmd->add_option("--image", image, "Image side N")->capture_default_str();
    cmd->add_option("--kernel", kernel, "Kernel side K")->capture_default_str();
    cmd->add_option("--pad", pad, "Zero padding P")->capture_default_str();
  }

  pc::ConvParams params(std::size_t b) const {
    try {
      return pc::ConvParams::make(b, in_ch, out_ch, image, kernel, pad);
    } catch (const pc::UnsupportedGeometry& e) {
      throw UsageError(std::string("invalid geometry: ") + e.what());
    }
  }
};

// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::string scale = "small";
  std::string json_path;
  bool omit_timing = false;
  bool sabotage_conj = false;
  unsigned threads = 1;
  std::uint64_t seed = 2024;
};

int cmd_verify(const VerifyArgs& a) {
  pc::VerifyOptions opt;
  opt.scale = a.scale == "full-desk" ? pc::VerifyScale::FullDesk : pc::VerifyScale::Small;
  opt.sabotage_conj = a.sabotage_conj;
  opt.threads = resolve_threads(a.threads);
  opt.seed = a.seed;
  const auto report = pc::run_verify(opt);
  if (a.json_path != "-") std::cout << pc::verify_table(report);
  if (!a.json_path.empty())
    write_output(a.json_path, pc::render(pc::verify_json(report, environment(pc::DType::F64, opt.threads)), a.omit_timing));
  return report.passed() ? kExitOk : kExitCheckFailed;
}

struct BenchArgs {
  Geometry geometry;
  std::string backend = "all";
  std::size_t warmup = 4;
  std::size_t active = 4;
  std::string dtype = "f32";
  std::string json_path;
  std::string csv_path;
  bool omit_timing = false;
  unsigned threads = 1;
  std::uint64_t seed = 1;
};

template <class T>
std::vector<pc::BenchResult> bench_all(const BenchArgs& a, unsigned threads) {
  std::vector<pc::Backend> backends;
  if (a.backend == "all")
    backends = {pc::Backend::SpectralRect, pc::Backend::SpectralPhasor};
  else
    backends = {*pc::parse_backend(a.backend)};
  std::vector<pc::BenchResult> results;
  for (std::size_t b : a.geometry.batch)
    for (pc::Backend backend : backends) {
      pc::BenchConfig cfg{.params = a.geometry.params(b), .backend = backend, .warmup = a.warmup,
                          .active = a.active, .threads = threads, .seed = a.seed};
      results.push_back(pc::run_bench<T>(cfg));
    }
  return results;
}

int cmd_bench(const BenchArgs& a) {
  if (a.active < pc::kMinActiveReps)
    throw UsageError("--active must be at least " + std::to_string(pc::kMinActiveReps));
  if (a.geometry.batch.empty()) throw UsageError("--batch needs at least one value");
  for (std::size_t b : a.geometry.batch) (void)a.geometry.params(b);
  const unsigned threads = resolve_threads(a.threads);
  const bool single = a.dtype == "f32";
  const auto results = single ? bench_all<float>(a, threads) : bench_all<double>(a, threads);
  const auto env = environment(single ? pc::DType::F32 : pc::DType::F64, threads);
  if (a.json_path != "-" && a.csv_path != "-") std::cout << pc::bench_table(results);
  if (!a.json_path.empty()) write_output(a.json_path, pc::render(pc::bench_json(results, env), a.omit_timing));
  if (!a.csv_path.empty()) write_output(a.csv_path, pc::bench_csv(results));
  return kExitOk;
}

struct FlopsArgs {
  Geometry geometry{.batch = {128}, .in_ch = 64, .out_ch = 64, .image = 32, .kernel = 3, .pad = 0};
  std::string variant = "paper-n";
  double c_fft = 2.5;
  std::string json_path;
};

int cmd_flops(const FlopsArgs& a) {
  if (a.geometry.batch.size() != 1) throw UsageError("flops takes a single --batch value");
  if (!(a.c_fft >= 0)) throw UsageError("--c-fft must be >= 0");
  const auto p = a.geometry.params(a.geometry.batch.front());
  auto model = p.cost_model(pc::Form::Rect, pc::ConvOp::Forward,
                            a.variant == "impl-l" ? pc::Convention::ImplementedL : pc::Convention::PaperN);
  model.c_fft = a.c_fft;
  const auto report = pc::make_flops_report(model);
  if (a.json_path != "-") std::cout << pc::flops_table(report);
  if (!a.json_path.empty()) write_output(a.json_path, pc::render(pc::flops_json(report), false));
  return kExitOk;
}

struct TrainArgs {
  std::string backend = "rect";
  std::vector<std::string> compare;
  std::size_t steps = 300;
  double lr = 0.05;
  std::uint64_t seed = 7;
  std::size_t batch = 16;
  std::string out_path;
  bool omit_timing = false;
  unsigned threads = 1;
};

// Loss-parity tolerance for --compare.
constexpr double kLossGapTolerance = 1e-3;

int cmd_train(const TrainArgs& a) {
  if (!(a.lr >= 0)) throw UsageError("--lr must be >= 0");
  if (a.batch == 0) throw UsageError("--batch must be positive");
  if (!a.compare.empty() && a.compare.size() != 2) throw UsageError("--compare takes exactly two backends");
  const unsigned threads = resolve_threads(a.threads);
  std::vector<std::string> names = a.compare.empty() ? std::vector<std::string>{a.backend} : a.compare;
  std::vector<pc::TrainTrace> runs;
  for (const auto& name : names) {
    const auto backend = pc::parse_backend(name);
    if (!backend) throw UsageError("unknown backend \"" + name + "\"");
    pc::TrainConfig cfg{.backend = *backend, .steps = a.steps, .lr = a.lr, .seed = a.seed, .batch = a.batch,
                        .threads = threads};
    runs.push_back(pc::train<double>(cfg));
  }
  // Keep stdout clean for the JSON when the trace goes there.
  std::FILE* summary = a.out_path == "-" ? stderr : stdout;
  for (const auto& r : runs)
    std::fprintf(summary, "%s: steps=%zu initial_loss=%.6f final_loss=%.6f accuracy=%.4f time=%.3fs\n",
                std::string(pc::to_string(r.config.backend)).c_str(), r.config.steps, r.entries.front().loss,
                r.entries.back().loss, r.final_accuracy, static_cast<double>(r.total_wall_ns) / 1e9);
  int status = kExitOk;
  if (runs.size() == 2) {
    const double gap = pc::max_relative_loss_gap(runs[0], runs[1]);
    const double ratio = static_cast<double>(runs[0].total_wall_ns) / static_cast<double>(runs[1].total_wall_ns);
    std::fprintf(summary, "max per-step relative loss gap %.3e (tolerance %.0e), total time ratio %s/%s = %.3f\n", gap,
                kLossGapTolerance, names[0].c_str(), names[1].c_str(), ratio);
    if (!(gap <= kLossGapTolerance)) status = kExitCheckFailed;
  }
  if (!a.out_path.empty())
    write_output(a.out_path, pc::render(pc::train_json(runs, environment(pc::DType::F64, threads)), a.omit_timing));
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral convolution with rectangular and phasor products"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "phasorconv 0.1.0");

  const std::vector<std::string> backends{"direct", "rect", "phasor"};

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "Run every invariant check against its oracle");
  verify->add_option("--scale", va.scale, "Check sizes")->check(CLI::IsMember({"small", "full-desk"}))->capture_default_str();
  verify->add_option("--json", va.json_path, "Write a JSON report to PATH ('-' for stdout)");
  verify->add_flag("--omit-timing", va.omit_timing, "Drop all timing members from JSON");
  verify->add_flag("--sabotage-conj", va.sabotage_conj)->group("");
  verify->add_option("--threads", va.threads, "Worker threads")->check(CLI::Range(1u, 1024u))->capture_default_str();
  verify->add_option("--seed", va.seed, "Random seed")->capture_default_str();

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Time every pipeline stage of forward + backward");
  ba.geometry.add_to(bench);
  bench->add_option("--backend", ba.backend, "rect, phasor or all")->check(CLI::IsMember({"rect", "phasor", "all"}))->capture_default_str();
  bench->add_option("--warmup", ba.warmup, "Warmup repetitions")->capture_default_str();
  bench->add_option("--active", ba.active, "Timed repetitions (>= 3)")->capture_default_str();
  bench->add_option("--dtype", ba.dtype, "Scalar type")->check(CLI::IsMember({"f32", "f64"}))->capture_default_str();
  bench->add_option("--json", ba.json_path, "Write a JSON report to PATH ('-' for stdout)");
  bench->add_option("--csv", ba.csv_path, "Write a CSV report to PATH ('-' for stdout)");
  bench->add_flag("--omit-timing", ba.omit_timing, "Drop all timing members from JSON");
  bench->add_option("--threads", ba.threads, "Worker threads")->check(CLI::Range(1u, 1024u))->capture_default_str();
  bench->add_option("--seed", ba.seed, "Random seed for the operands")->capture_default_str();

  FlopsArgs fa;
  auto* flops = app.add_subcommand("flops", "Print the analytical cost model");
  fa.geometry.add_to(flops);
  flops->add_option("--variant", fa.variant, "Transform size convention")->check(CLI::IsMember({"paper-n", "impl-l"}))->capture_default_str();
  flops->add_option("--c-fft", fa.c_fft, "Constant of the transform term")->capture_default_str();
  flops->add_option("--json", fa.json_path, "Write a JSON report to PATH ('-' for stdout)");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train the small network on the synthetic bar task");
  train->add_option("--backend", ta.backend, "Convolution backend")->check(CLI::IsMember(backends))->capture_default_str();
  train->add_option("--compare", ta.compare, "Two backends to run and compare, e.g. rect,phasor")
      ->delimiter(',')
      ->check(CLI::IsMember(backends));
  train->add_option("--steps", ta.steps, "SGD steps")->capture_default_str();
  train->add_option("--lr", ta.lr, "Learning rate")->capture_default_str();
  train->add_option("--seed", ta.seed, "Seed for data and weights")->capture_default_str();
  train->add_option("--batch", ta.batch, "Mini-batch size")->capture_default_str();
  train->add_option("--out", ta.out_path, "Write the trace JSON to PATH ('-' for stdout)");
  train->add_flag("--omit-timing", ta.omit_timing, "Drop all timing members from JSON");
  train->add_option("--threads", ta.threads, "Worker threads")->check(CLI::Range(1u, 1024u))->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*verify) return cmd_verify(va);
    if (*bench) return cmd_bench(ba);
    if (*flops) return cmd_flops(fa);
    if (*train) return cmd_train(ta);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
