#pragma once

// Tiny trainable network on top of the convolution engine:
// conv -> ReLU -> 2x2 average pool -> dense -> softmax cross-entropy,
// trained with plain SGD on a synthetic oriented-bar task.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "phasorconv/convengine.hpp"
#include "phasorconv/error.hpp"
#include "phasorconv/flops.hpp"
#include "phasorconv/tensor.hpp"

namespace phasorconv {

struct NetShape {
  std::size_t image = 8;
  std::size_t in_channels = 1;
  std::size_t channels = 4;
  std::size_t kernel = 3;
  std::size_t padding = 1;
  std::size_t classes = 4;

  std::size_t conv_out() const { return image + 2 * padding - kernel + 1; }
  std::size_t pooled() const { return conv_out() / 2; }
  std::size_t features() const { return channels * pooled() * pooled(); }
};

// ---------------------------------------------------------------------------
// Synthetic data.

/// Images [count, in_channels, N, N] with one oriented bar each plus Gaussian
/// noise. Class c is bar orientation c: horizontal, vertical, diagonal,
/// anti-diagonal.
template <std::floating_point T>
struct SyntheticDataset {
  std::uint64_t seed = 0;
  std::size_t num_classes = 4;
  RealTensor4<T> images;
  std::vector<std::size_t> labels;

  std::size_t size() const { return labels.size(); }

  /// Rows [begin, begin+count) wrapping around the end.
  std::pair<RealTensor4<T>, std::vector<std::size_t>> batch(std::size_t begin,
                                                           std::size_t count) const {
    const Dims4 d = images.dims();
    RealTensor4<T> x({count, d[1], d[2], d[3]});
    std::vector<std::size_t> y(count);
    const std::size_t per = d[1] * d[2] * d[3];
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t src = (begin + i) % size();
      std::copy_n(images.data().begin() + src * per, per, x.data().begin() + i * per);
      y[i] = labels[src];
    }
    return {std::move(x), std::move(y)};
  }
};

inline constexpr std::size_t kBarOrientations = 4;

template <std::floating_point T>
SyntheticDataset<T> make_bar_dataset(std::size_t count, const NetShape& shape, std::uint64_t seed,
                                     T bar_level = T(2), T noise_std = T(0.1)) {
  if (shape.classes != kBarOrientations)
    throw ShapeError("bar dataset has exactly 4 classes, got " + std::to_string(shape.classes));
  if (shape.image < 5) throw ShapeError("bar dataset needs images of side >= 5");
  const std::size_t n = shape.image;
  SyntheticDataset<T> ds;
  ds.seed = seed;
  ds.num_classes = kBarOrientations;
  ds.images = RealTensor4<T>({count, shape.in_channels, n, n});
  ds.labels.resize(count);

  std::mt19937_64 rng(seed);
  std::normal_distribution<T> noise(T(0), noise_std);
  const long side = static_cast<long>(n);
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t label = s % kBarOrientations;
    // Offset of the bar from the centre line, kept away from the border.
    const long offset = static_cast<long>(rng() % (n - 3)) - (side - 4) / 2;
    ds.labels[s] = label;
    for (std::size_t c = 0; c < shape.in_channels; ++c)
      for (long i = 0; i < side; ++i)
        for (long j = 0; j < side; ++j) {
          bool on = false;
          switch (label) {
            case 0: on = i == side / 2 + offset; break;
            case 1: on = j == side / 2 + offset; break;
            case 2: on = i - j == offset; break;
            case 3: on = i + j == side - 1 + offset; break;
          }
          ds.images(s, c, i, j) = (on ? bar_level : T(0)) + noise(rng);
        }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Network.

template <std::floating_point T>
struct NetGrads {
  RealTensor4<T> conv_w;
  std::vector<T> dense_w;
  std::vector<T> dense_b;
  /// Gradient with respect to the batch input.
  RealTensor4<T> input;
};

template <std::floating_point T>
struct LossAndGrads {
  T loss = 0;
  NetGrads<T> grads;
};

template <std::floating_point T>
class TinyNet {
 public:
  TinyNet(NetShape shape, Backend backend, std::uint64_t seed, EngineOptions options = {})
      : shape_(shape), backend_(backend), options_(options) {
    if (shape.conv_out() % 2 != 0) throw ShapeError("conv output side must be even for 2x2 pooling");
    conv_w = RealTensor4<T>({shape.channels, shape.in_channels, shape.kernel, shape.kernel});
    dense_w.resize(shape.classes * shape.features());
    dense_b.assign(shape.classes, T(0));
    std::mt19937_64 rng(seed);
    auto init = [&](std::span<T> p, std::size_t fan_in) {
      const T bound = T(1) / std::sqrt(static_cast<T>(fan_in));
      std::uniform_real_distribution<T> u(-bound, bound);
      for (T& v : p) v = u(rng);
    };
    init(conv_w.data(), shape.in_channels * shape.kernel * shape.kernel);
    init(dense_w, shape.features());
  }

  const NetShape& shape() const { return shape_; }
  Backend backend() const { return backend_; }
  const EngineOptions& options() const { return options_; }

  ConvParams conv_params(std::size_t batch) const {
    return ConvParams::make(batch, shape_.in_channels, shape_.channels, shape_.image,
                            shape_.kernel, shape_.padding);
  }

  bool all_finite() const {
    auto finite = [](std::span<const T> s) {
      return std::all_of(s.begin(), s.end(), [](T v) { return std::isfinite(v); });
    };
    return conv_w.all_finite() && finite(dense_w) && finite(dense_b);
  }

  friend bool operator==(const TinyNet& a, const TinyNet& b) {
    return a.conv_w == b.conv_w && a.dense_w == b.dense_w && a.dense_b == b.dense_b;
  }

  RealTensor4<T> conv_w;
  std::vector<T> dense_w;  // [classes, features] row-major
  std::vector<T> dense_b;

 private:
  NetShape shape_;
  Backend backend_;
  EngineOptions options_;
};

namespace detail {

// Activations kept for the backward pass.
template <std::floating_point T>
struct NetForward {
  RealTensor4<T> conv;            // pre-activation [B, C, M, M]
  std::vector<T> features;        // pooled ReLU [B, F]
  std::vector<T> logits;          // [B, classes]
};

template <std::floating_point T>
NetForward<T> net_forward(const TinyNet<T>& net, const RealTensor4<T>& x, FlopLedger& ledger) {
  const NetShape& s = net.shape();
  const std::size_t batch = x.dim(0);
  const ConvEngine<T> engine(net.conv_params(batch), net.backend(), net.options());
  NetForward<T> f;
  f.conv = engine.forward(x, net.conv_w, ledger);

  const std::size_t m = s.conv_out(), q = s.pooled(), feats = s.features();
  f.features.assign(batch * feats, T(0));
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < s.channels; ++c)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
          f.features[b * feats + (c * q + i / 2) * q + j / 2] +=
              std::max(f.conv(b, c, i, j), T(0)) * T(0.25);

  f.logits.resize(batch * s.classes);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t k = 0; k < s.classes; ++k) {
      T z = net.dense_b[k];
      for (std::size_t i = 0; i < feats; ++i) z += net.dense_w[k * feats + i] * f.features[b * feats + i];
      f.logits[b * s.classes + k] = z;
    }
  return f;
}

/// Row-wise softmax in place; returns mean cross-entropy against `labels`.
template <std::floating_point T>
T softmax_cross_entropy(std::vector<T>& logits, std::span<const std::size_t> labels,
                        std::size_t classes) {
  const std::size_t batch = labels.size();
  T total = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    T* row = logits.data() + b * classes;
    const T top = *std::max_element(row, row + classes);
    T norm = 0;
    for (std::size_t k = 0; k < classes; ++k) norm += std::exp(row[k] - top);
    total += std::log(norm) + top - row[labels[b]];
    for (std::size_t k = 0; k < classes; ++k) row[k] = std::exp(row[k] - top) / norm;
  }
  return total / static_cast<T>(batch);
}

template <std::floating_point T>
void expect_batch(const TinyNet<T>& net, const RealTensor4<T>& x, std::span<const std::size_t> labels) {
  const NetShape& s = net.shape();
  const Dims4 want{x.dim(0), s.in_channels, s.image, s.image};
  if (x.dims() != want)
    throw ShapeError("batch has dims " + dims_string(x.dims()) + ", expected " + dims_string(want));
  if (labels.size() != x.dim(0)) throw ShapeError("label count does not match batch size");
  if (x.dim(0) == 0) throw ShapeError("empty batch");
  for (std::size_t y : labels)
    if (y >= s.classes) throw ShapeError("label " + std::to_string(y) + " out of range");
}

}  // namespace detail

template <std::floating_point T>
T loss(const TinyNet<T>& net, const RealTensor4<T>& x, std::span<const std::size_t> labels,
       FlopLedger& ledger) {
  detail::expect_batch(net, x, labels);
  auto f = detail::net_forward(net, x, ledger);
  return detail::softmax_cross_entropy(f.logits, labels, net.shape().classes);
}

template <std::floating_point T>
LossAndGrads<T> loss_and_grads(const TinyNet<T>& net, const RealTensor4<T>& x,
                               std::span<const std::size_t> labels, FlopLedger& ledger) {
  detail::expect_batch(net, x, labels);
  const NetShape& s = net.shape();
  const std::size_t batch = x.dim(0), feats = s.features(), m = s.conv_out(), q = s.pooled();
  auto f = detail::net_forward(net, x, ledger);

  LossAndGrads<T> out;
  out.loss = detail::softmax_cross_entropy(f.logits, labels, s.classes);

  // d loss / d logits = (softmax - onehot) / B.
  std::vector<T>& dz = f.logits;
  for (std::size_t b = 0; b < batch; ++b) dz[b * s.classes + labels[b]] -= T(1);
  for (T& v : dz) v /= static_cast<T>(batch);

  NetGrads<T>& g = out.grads;
  g.dense_w.assign(s.classes * feats, T(0));
  g.dense_b.assign(s.classes, T(0));
  std::vector<T> dh(batch * feats, T(0));
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t k = 0; k < s.classes; ++k) {
      const T d = dz[b * s.classes + k];
      g.dense_b[k] += d;
      for (std::size_t i = 0; i < feats; ++i) {
        g.dense_w[k * feats + i] += d * f.features[b * feats + i];
        dh[b * feats + i] += d * net.dense_w[k * feats + i];
      }
    }

  // Through the pool and ReLU.
  RealTensor4<T> dy(f.conv.dims());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < s.channels; ++c)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
          if (f.conv(b, c, i, j) > T(0))
            dy(b, c, i, j) = dh[b * feats + (c * q + i / 2) * q + j / 2] * T(0.25);

  const ConvEngine<T> engine(net.conv_params(batch), net.backend(), net.options());
  g.conv_w = engine.backward_kernel(dy, x, ledger);
  g.input = engine.backward_input(dy, net.conv_w, ledger);
  return out;
}

/// theta <- theta - lr * grad for every parameter.
template <std::floating_point T>
void sgd_step(TinyNet<T>& net, const NetGrads<T>& g, T lr) {
  if (g.conv_w.dims() != net.conv_w.dims() || g.dense_w.size() != net.dense_w.size() ||
      g.dense_b.size() != net.dense_b.size())
    throw ShapeError("gradient shapes do not match the network");
  auto apply = [lr](std::span<T> p, std::span<const T> d) {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * d[i];
  };
  apply(net.conv_w.data(), g.conv_w.data());
  apply(net.dense_w, g.dense_w);
  apply(net.dense_b, g.dense_b);
  if (!net.all_finite()) throw NonFiniteInput("parameters became non-finite after an SGD step");
}

template <std::floating_point T>
std::vector<std::size_t> predict(const TinyNet<T>& net, const RealTensor4<T>& x, FlopLedger& ledger) {
  const auto f = detail::net_forward(net, x, ledger);
  const std::size_t classes = net.shape().classes;
  std::vector<std::size_t> out(x.dim(0));
  for (std::size_t b = 0; b < out.size(); ++b) {
    const auto row = f.logits.begin() + b * classes;
    out[b] = static_cast<std::size_t>(std::max_element(row, row + classes) - row);
  }
  return out;
}

template <std::floating_point T>
double accuracy(const TinyNet<T>& net, const SyntheticDataset<T>& ds, FlopLedger& ledger) {
  if (ds.size() == 0) return 0.0;
  const auto pred = predict(net, ds.images, ledger);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == ds.labels[i];
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

// ---------------------------------------------------------------------------
// Training loop.

struct TrainConfig {
  Backend backend = Backend::SpectralRect;
  std::size_t steps = 300;
  double lr = 0.05;
  std::uint64_t seed = 7;
  std::size_t batch = 16;
  std::size_t train_size = 512;
  std::size_t test_size = 256;
  unsigned threads = 1;
  NetShape shape{};
};

struct TraceEntry {
  std::size_t step = 0;
  double loss = 0;
  std::int64_t wall_ns = 0;
  OpCost ops;
};

/// Entry t holds the loss of batch t under the parameters after t updates;
/// a run of S steps has S+1 entries.
struct TrainTrace {
  TrainConfig config;
  std::vector<TraceEntry> entries;
  double final_accuracy = 0;
  std::int64_t total_wall_ns = 0;
};

// Independent streams for the training set, the held-out set and the weights.
inline constexpr std::uint64_t kTestStream = 0x9e3779b97f4a7c15ULL;
inline constexpr std::uint64_t kInitStream = 0xbf58476d1ce4e5b9ULL;

template <std::floating_point T = double>
TrainTrace train(const TrainConfig& cfg) {
  if (!(cfg.lr >= 0) || !std::isfinite(cfg.lr)) throw Error("learning rate must be finite and >= 0");
  if (cfg.batch == 0 || cfg.train_size == 0) throw Error("batch and train_size must be positive");
  const auto train_set = make_bar_dataset<T>(cfg.train_size, cfg.shape, cfg.seed);
  const auto test_set = make_bar_dataset<T>(cfg.test_size, cfg.shape, cfg.seed ^ kTestStream);
  TinyNet<T> net(cfg.shape, cfg.backend, cfg.seed ^ kInitStream, EngineOptions{.threads = cfg.threads});

  TrainTrace trace;
  trace.config = cfg;
  trace.entries.reserve(cfg.steps + 1);
  for (std::size_t t = 0; t <= cfg.steps; ++t) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto [x, y] = train_set.batch(t * cfg.batch, cfg.batch);
    FlopLedger ledger;
    TraceEntry e;
    e.step = t;
    if (t < cfg.steps) {
      const auto lg = loss_and_grads(net, x, y, ledger);
      sgd_step(net, lg.grads, static_cast<T>(cfg.lr));
      e.loss = static_cast<double>(lg.loss);
    } else {
      e.loss = static_cast<double>(loss(net, x, y, ledger));
    }
    e.ops = ledger.total();
    e.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
    trace.total_wall_ns += e.wall_ns;
    trace.entries.push_back(e);
  }
  FlopLedger eval_ledger;
  trace.final_accuracy = accuracy(net, test_set, eval_ledger);
  return trace;
}

}  // namespace phasorconv
