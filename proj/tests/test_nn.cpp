#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "phasorconv/nn.hpp"
#include "test_util.hpp"

namespace pc = phasorconv;
using pc::Backend;

namespace {

const double kLn4 = std::log(4.0);

struct Batch {
  pc::RealTensor4<double> x;
  std::vector<std::size_t> y;
};

Batch small_batch(std::size_t count, std::uint64_t seed) {
  const auto ds = pc::make_bar_dataset<double>(count, pc::NetShape{}, seed);
  auto [x, y] = ds.batch(0, count);
  return {std::move(x), std::move(y)};
}

double batch_loss(const pc::TinyNet<double>& net, const Batch& b) {
  pc::FlopLedger l;
  return pc::loss(net, b.x, b.y, l);
}

// Central differences over every entry of `params`; `eval` reads the
// perturbed state.
template <class Eval>
std::vector<double> central_differences(std::span<double> params, Eval&& eval, double h = 1e-6) {
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = eval();
    params[i] = keep - h;
    const double down = eval();
    params[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

double relative_error(std::span<const double> got, std::span<const double> want) {
  return pc::max_abs_diff(got, want) / std::max(pc::max_abs(want), 1e-300);
}

}  // namespace

TEST(BarDataset, DeterministicAndBalanced) {
  const auto a = pc::make_bar_dataset<double>(64, pc::NetShape{}, 3);
  const auto b = pc::make_bar_dataset<double>(64, pc::NetShape{}, 3);
  const auto c = pc::make_bar_dataset<double>(64, pc::NetShape{}, 4);
  EXPECT_EQ(a.images, b.images);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(a.images, c.images);
  std::array<int, 4> counts{};
  for (auto y : a.labels) ++counts[y];
  for (int n : counts) EXPECT_EQ(n, 16);
}

TEST(BarDataset, BarPixelsStandOutOfNoise) {
  const auto ds = pc::make_bar_dataset<double>(40, pc::NetShape{}, 9);
  for (std::size_t s = 0; s < ds.size(); ++s) {
    int bright = 0;
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j) bright += ds.images(s, 0, i, j) > 1.0;
    // A full-length bar covers 8 pixels on the axes and at least 6 on a diagonal.
    EXPECT_GE(bright, ds.labels[s] < 2 ? 8 : 6);
    EXPECT_LE(bright, 8);
  }
  EXPECT_THROW(pc::make_bar_dataset<double>(4, pc::NetShape{.classes = 3}, 1), pc::ShapeError);
}

TEST(TinyNet, InitWithinFanInBounds) {
  const pc::TinyNet<double> net(pc::NetShape{}, Backend::SpectralRect, 1);
  for (double v : net.conv_w.data()) EXPECT_LE(std::abs(v), 1.0 / 3.0);
  for (double v : net.dense_w) EXPECT_LE(std::abs(v), 1.0 / 8.0);
  for (double v : net.dense_b) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(net.dense_w.size(), 4u * 64);
}

TEST(TinyNet, UniformLogitsGiveLogClasses) {
  pc::TinyNet<double> net(pc::NetShape{}, Backend::SpectralPhasor, 2);
  std::fill(net.dense_w.begin(), net.dense_w.end(), 0.0);
  EXPECT_NEAR(batch_loss(net, small_batch(8, 1)), kLn4, 1e-15);
}

TEST(TinyNet, ZeroInputZeroBiasGivesLogClasses) {
  const pc::TinyNet<double> net(pc::NetShape{}, Backend::SpectralRect, 3);
  const pc::RealTensor4<double> x({3, 1, 8, 8});
  const std::vector<std::size_t> y{0, 1, 2};
  pc::FlopLedger l;
  EXPECT_NEAR(pc::loss(net, x, y, l), kLn4, 1e-12);
}

TEST(TinyNet, GradientsMatchFiniteDifferences) {
  for (Backend backend : {Backend::DirectSpatial, Backend::SpectralRect, Backend::SpectralPhasor}) {
    pc::TinyNet<double> net(pc::NetShape{}, backend, 11);
    Batch b = small_batch(2, 5);
    pc::FlopLedger l;
    const auto lg = pc::loss_and_grads(net, b.x, b.y, l);
    auto eval = [&] { return batch_loss(net, b); };
    const auto name = std::string(pc::to_string(backend));
    EXPECT_LE(relative_error(lg.grads.conv_w.data(), central_differences(net.conv_w.data(), eval)), 1e-5) << name;
    EXPECT_LE(relative_error(lg.grads.dense_w, central_differences(net.dense_w, eval)), 1e-5) << name;
    EXPECT_LE(relative_error(lg.grads.dense_b, central_differences(net.dense_b, eval)), 1e-5) << name;
    EXPECT_LE(relative_error(lg.grads.input.data(), central_differences(b.x.data(), eval)), 1e-5) << name;
  }
}

TEST(TinyNet, BatchValidation) {
  const pc::TinyNet<double> net(pc::NetShape{}, Backend::SpectralRect, 3);
  pc::FlopLedger l;
  EXPECT_THROW(pc::loss(net, pc::RealTensor4<double>({2, 1, 6, 6}), std::vector<std::size_t>{0, 1}, l),
               pc::ShapeError);
  EXPECT_THROW(pc::loss(net, pc::RealTensor4<double>({2, 1, 8, 8}), std::vector<std::size_t>{0}, l),
               pc::ShapeError);
  EXPECT_THROW(pc::loss(net, pc::RealTensor4<double>({1, 1, 8, 8}), std::vector<std::size_t>{4}, l),
               pc::ShapeError);
}

TEST(Sgd, ZeroLearningRateLeavesParameters) {
  pc::TinyNet<double> net(pc::NetShape{}, Backend::SpectralRect, 4);
  const auto before = net;
  const Batch b = small_batch(4, 2);
  pc::FlopLedger l;
  pc::sgd_step(net, pc::loss_and_grads(net, b.x, b.y, l).grads, 0.0);
  EXPECT_EQ(net, before);
}

TEST(Sgd, SmallStepDescends) {
  pc::TinyNet<double> net(pc::NetShape{}, Backend::SpectralPhasor, 5);
  const Batch b = small_batch(8, 3);
  pc::FlopLedger l;
  const auto lg = pc::loss_and_grads(net, b.x, b.y, l);
  pc::sgd_step(net, lg.grads, 1e-2);
  EXPECT_LT(batch_loss(net, b), lg.loss);
}

TEST(Sgd, IdenticalSeedsGiveBitwiseIdenticalParameters) {
  for (Backend backend : {Backend::SpectralRect, Backend::SpectralPhasor}) {
    pc::TinyNet<double> a(pc::NetShape{}, backend, 6), b(pc::NetShape{}, backend, 6);
    const auto ds = pc::make_bar_dataset<double>(64, pc::NetShape{}, 1);
    for (std::size_t t = 0; t < 10; ++t) {
      const auto [x, y] = ds.batch(t * 8, 8);
      pc::FlopLedger la, lb;
      pc::sgd_step(a, pc::loss_and_grads(a, x, y, la).grads, 0.05);
      pc::sgd_step(b, pc::loss_and_grads(b, x, y, lb).grads, 0.05);
    }
    EXPECT_EQ(a, b);
  }
}

TEST(Train, ZeroStepsGivesInitialLossOnly) {
  const auto trace = pc::train(pc::TrainConfig{.steps = 0});
  ASSERT_EQ(trace.entries.size(), 1u);
  EXPECT_NEAR(trace.entries[0].loss, kLn4, 0.1);
  EXPECT_GT(trace.entries[0].ops.mul, 0u);
}

TEST(Train, BackendParityAndLearning) {
  const auto direct = pc::train(pc::TrainConfig{.backend = Backend::DirectSpatial});
  const auto rect = pc::train(pc::TrainConfig{.backend = Backend::SpectralRect});
  const auto phasor = pc::train(pc::TrainConfig{.backend = Backend::SpectralPhasor});
  ASSERT_EQ(rect.entries.size(), 301u);
  ASSERT_EQ(phasor.entries.size(), 301u);
  ASSERT_EQ(direct.entries.size(), 301u);
  for (std::size_t t = 0; t < rect.entries.size(); ++t) {
    const double r = rect.entries[t].loss;
    EXPECT_LE(std::abs(phasor.entries[t].loss - r) / std::abs(r), 1e-3) << "step " << t;
    EXPECT_LE(std::abs(direct.entries[t].loss - r), 1e-6) << "step " << t;
  }
  for (const auto* tr : {&direct, &rect, &phasor}) EXPECT_GE(tr->final_accuracy, 0.9);
  EXPECT_LT(rect.entries.back().loss, rect.entries.front().loss);
  // The phasor product stage charges a quarter of the rect multiplies, but
  // conversions add more than that back.
  EXPECT_NE(rect.entries[1].ops, phasor.entries[1].ops);
}

TEST(Train, DeterministicTrace) {
  const pc::TrainConfig cfg{.backend = Backend::SpectralPhasor, .steps = 20};
  const auto a = pc::train(cfg);
  const auto b = pc::train(cfg);
  ASSERT_EQ(a.entries.size(), b.entries.size());
  for (std::size_t t = 0; t < a.entries.size(); ++t) {
    EXPECT_EQ(a.entries[t].loss, b.entries[t].loss);
    EXPECT_EQ(a.entries[t].ops, b.entries[t].ops);
  }
  EXPECT_EQ(a.final_accuracy, b.final_accuracy);
}

TEST(Train, SinglePrecisionLearns) {
  const auto trace = pc::train<float>(pc::TrainConfig{.backend = Backend::SpectralPhasor});
  EXPECT_GE(trace.final_accuracy, 0.9);
}

TEST(Train, RejectsBadConfig) {
  EXPECT_THROW(pc::train(pc::TrainConfig{.lr = -1.0}), pc::Error);
  EXPECT_THROW(pc::train(pc::TrainConfig{.batch = 0}), pc::Error);
}
