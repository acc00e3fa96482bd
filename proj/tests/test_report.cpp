#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "phasorconv/bench.hpp"
#include "phasorconv/report.hpp"

namespace phasorconv {
namespace {

ConvParams small_geometry(std::size_t batch) { return ConvParams::make(batch, 2, 3, 8, 3, 1); }

BenchResult bench(Backend b, std::size_t batch) {
  return run_bench<double>({.params = small_geometry(batch), .backend = b, .warmup = 1, .active = 3});
}

TEST(Quantile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4, 5}, 0.25), 2.0);
  EXPECT_DOUBLE_EQ(quantile({7}, 0.75), 7.0);
  EXPECT_THROW(quantile({}, 0.5), Error);
}

TEST(Summarize, MedianAndIqr) {
  const Summary s = summarize({10, 20, 30, 40, 50});
  EXPECT_DOUBLE_EQ(s.median_ns, 30);
  EXPECT_DOUBLE_EQ(s.iqr_ns, 20);
}

TEST(Bench, RejectsFewActiveReps) {
  EXPECT_THROW(run_bench<double>({.params = small_geometry(1), .active = 2}), Error);
}

TEST(Bench, RejectsDirectBackend) {
  EXPECT_THROW(run_bench<double>({.params = small_geometry(1), .backend = Backend::DirectSpatial}), Error);
}

TEST(Bench, StageListIsFixedAndHasNoPlanStage) {
  const BenchResult r = bench(Backend::SpectralPhasor, 2);
  ASSERT_EQ(r.stages.size(), kStageCount);
  for (std::size_t i = 0; i < kStageCount; ++i) {
    EXPECT_EQ(r.stages[i].stage, kAllStages[i]);
    EXPECT_EQ(std::string(stage_name(r.stages[i].stage)).find("plan"), std::string::npos);
  }
  EXPECT_GT(r.total.median_ns, 0);
}

TEST(Bench, ProductOpsAreExactRatios) {
  const std::vector<BenchResult> rs{bench(Backend::SpectralRect, 3), bench(Backend::SpectralPhasor, 3)};
  const auto cmp = compare(rs);
  ASSERT_EQ(cmp.size(), 1u);
  EXPECT_EQ(cmp[0].product_mul_ratio, 4.0);
  EXPECT_EQ(cmp[0].product_mul_add_ratio, 3.0);
  EXPECT_GT(cmp[0].speedup, 0);
}

TEST(Report, StripTimingIsRecursive) {
  json j = {{"a", 1}, {"timing", 2}, {"rows", json::array({{{"timing", 3}, {"b", 4}}})}};
  strip_timing(j);
  EXPECT_EQ(j.dump(), R"({"a":1,"rows":[{"b":4}]})");
}

TEST(Report, CsvHasFixedColumnsAndTotalRows) {
  const std::vector<BenchResult> rs{bench(Backend::SpectralRect, 1)};
  std::istringstream in(bench_csv(rs));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "backend,B,f1,f2,N,K,P,stage,median_ns,iqr_ns,mul,add,div,sqrt,trig");
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), kStageCount + 1);
  EXPECT_EQ(rows.back().rfind("rect,1,2,3,8,3,1,total,", 0), 0u);
  for (const auto& r : rows) EXPECT_EQ(std::count(r.begin(), r.end(), ','), 14);
}

TEST(Report, BenchJsonComparesMatchingGeometriesOnly) {
  const std::vector<BenchResult> rs{bench(Backend::SpectralRect, 1), bench(Backend::SpectralPhasor, 1),
                                    bench(Backend::SpectralRect, 2)};
  const json j = bench_json(rs, Environment{});
  EXPECT_EQ(j["rows"].size(), 3u);
  ASSERT_EQ(j["comparisons"].size(), 1u);
  EXPECT_EQ(j["comparisons"][0]["geometry"]["B"], 1);
  EXPECT_EQ(j["comparisons"][0]["geometry"]["L"], 16);
}

TEST(Report, FormatNumberRoundTrips) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(52224), "52224");
}

}  // namespace
}  // namespace phasorconv
