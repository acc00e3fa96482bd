#pragma once

// The three convolutions of a conv layer (forward cross-correlation, input
// gradient, kernel gradient) over interchangeable backends:
//
//   DirectSpatial   nested-loop sliding window, the reference
//   SpectralRect    half-spectrum product in rectangular form
//   SpectralPhasor  half-spectrum product in phasor form
//
// The spectral pipeline per call is: transform both operands (Step 1),
// convert to phasors (Step 2, phasor only), elementwise product (Step 3),
// back to rectangular (Step 4, phasor only) and channel reduction, inverse
// transform and crop (Step 5).

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "phasorconv/complexforms.hpp"
#include "phasorconv/error.hpp"
#include "phasorconv/flops.hpp"
#include "phasorconv/geometry.hpp"
#include "phasorconv/spectral.hpp"
#include "phasorconv/tensor.hpp"

namespace phasorconv {

enum class Backend { DirectSpatial, SpectralRect, SpectralPhasor };

inline constexpr std::string_view to_string(Backend b) {
  switch (b) {
    case Backend::DirectSpatial: return "direct";
    case Backend::SpectralRect: return "rect";
    case Backend::SpectralPhasor: return "phasor";
  }
  return "?";
}

inline std::optional<Backend> parse_backend(std::string_view s) {
  if (s == "direct") return Backend::DirectSpatial;
  if (s == "rect") return Backend::SpectralRect;
  if (s == "phasor") return Backend::SpectralPhasor;
  return std::nullopt;
}

/// Validated layer geometry. Only square images and kernels with unit
/// stride, dilation and groups are accepted.
struct ConvParams {
  std::size_t batch = 1;
  std::size_t in_channels = 1;   // f1
  std::size_t out_channels = 1;  // f2
  std::size_t image = 1;         // N
  std::size_t kernel = 1;        // K
  std::size_t padding = 0;       // P
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t groups = 1;
  FftSizes sizes;

  static ConvParams make(std::size_t batch, std::size_t in_channels, std::size_t out_channels,
                         std::size_t image, std::size_t kernel, std::size_t padding,
                         std::size_t stride = 1, std::size_t dilation = 1,
                         std::size_t groups = 1) {
    if (stride != 1) throw UnsupportedGeometry("stride must be 1, got " + std::to_string(stride));
    if (dilation != 1)
      throw UnsupportedGeometry("dilation must be 1, got " + std::to_string(dilation));
    if (groups != 1) throw UnsupportedGeometry("groups must be 1, got " + std::to_string(groups));
    if (in_channels == 0 || out_channels == 0)
      throw UnsupportedGeometry("channel counts must be positive");
    ConvParams p;
    p.batch = batch;
    p.in_channels = in_channels;
    p.out_channels = out_channels;
    p.image = image;
    p.kernel = kernel;
    p.padding = padding;
    p.sizes = plan_sizes(image, kernel, padding);
    return p;
  }

  std::size_t output_len() const { return sizes.valid_out_len; }
  Dims4 input_dims() const { return {batch, in_channels, image, image}; }
  Dims4 kernel_dims() const { return {out_channels, in_channels, kernel, kernel}; }
  Dims4 output_dims() const { return {batch, out_channels, output_len(), output_len()}; }

  CostModel cost_model(Form form, ConvOp op, Convention convention = Convention::ImplementedL) const {
    return CostModel::for_geometry(batch, in_channels, out_channels, image, kernel, padding,
                                   convention, form, op);
  }
};

struct EngineOptions {
  /// Worker count for the data-parallel (slice) loops.
  unsigned threads = 1;
  /// Fault injection: inverts the conjugation convention of all three
  /// operations. Used by the verifier's mutation check only.
  bool flip_conjugation = false;
};

/// Accumulated wall time per pipeline stage. With several workers this is
/// the sum over workers.
struct StageTimes {
  std::array<std::int64_t, kStageCount> ns{};

  std::int64_t& operator[](Stage s) { return ns[static_cast<std::size_t>(s)]; }
  std::int64_t operator[](Stage s) const { return ns[static_cast<std::size_t>(s)]; }
  StageTimes& operator+=(const StageTimes& o) {
    for (std::size_t i = 0; i < kStageCount; ++i) ns[i] += o.ns[i];
    return *this;
  }
};

// ---------------------------------------------------------------------------
// Slab kernels. These do no bookkeeping; callers charge the ledger.

template <std::floating_point T>
void multiply_rect(RectSlabView<T> a, RectSlabView<T> b, bool conj_b, RectSlabSpan<T> out) {
  const std::size_t n = out.re.size();
  if (a.re.size() != n || b.re.size() != n) throw ShapeError("multiply_rect: slab size mismatch");
  const T* __restrict ar = a.re.data();
  const T* __restrict ai = a.im.data();
  const T* __restrict br = b.re.data();
  const T* __restrict bi = b.im.data();
  T* __restrict orr = out.re.data();
  T* __restrict oi = out.im.data();
  if (conj_b) {
    for (std::size_t i = 0; i < n; ++i) {
      orr[i] = ar[i] * br[i] + ai[i] * bi[i];
      oi[i] = ai[i] * br[i] - ar[i] * bi[i];
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      orr[i] = ar[i] * br[i] - ai[i] * bi[i];
      oi[i] = ai[i] * br[i] + ar[i] * bi[i];
    }
  }
}

namespace detail {

template <bool Conj, std::floating_point T>
void multiply_phasor_loop(const T* __restrict am, const T* __restrict aa, const T* __restrict bm,
                          const T* __restrict ba, T* __restrict om, T* __restrict oa,
                          std::size_t n) {
  constexpr T pi = std::numbers::pi_v<T>;
  constexpr T two_pi = 2 * std::numbers::pi_v<T>;
  for (std::size_t i = 0; i < n; ++i) {
    const T m = am[i] * bm[i];
    T s = Conj ? aa[i] - ba[i] : aa[i] + ba[i];
    s = s > pi ? s - two_pi : s;
    s = s <= -pi ? s + two_pi : s;
    om[i] = m;
    oa[i] = m != T(0) ? s : T(0);
  }
}

}  // namespace detail

/// mag = mag_a·mag_b, ang = ang_a ± ang_b wrapped into (-pi, pi]. Inputs are
/// valid phasors, so the sum lies in (-2pi, 2pi] and a single conditional
/// shift suffices. Zero magnitudes get the canonical zero angle.
template <std::floating_point T>
void multiply_phasor(PhasorSlabView<T> a, PhasorSlabView<T> b, bool conj_b,
                     PhasorSlabSpan<T> out) {
  const std::size_t n = out.mag.size();
  if (a.mag.size() != n || b.mag.size() != n)
    throw ShapeError("multiply_phasor: slab size mismatch");
  if (conj_b)
    detail::multiply_phasor_loop<true, T>(a.mag.data(), a.ang.data(), b.mag.data(), b.ang.data(),
                                          out.mag.data(), out.ang.data(), n);
  else
    detail::multiply_phasor_loop<false, T>(a.mag.data(), a.ang.data(), b.mag.data(), b.ang.data(),
                                           out.mag.data(), out.ang.data(), n);
}

template <std::floating_point T>
void rect_to_phasor(RectSlabView<T> in, PhasorSlabSpan<T> out) {
  const std::size_t n = in.re.size();
  for (std::size_t i = 0; i < n; ++i) {
    const CPhasor<T> p = to_phasor(CRect<T>{in.re[i], in.im[i]});
    out.mag[i] = p.mag;
    out.ang[i] = p.ang;
  }
}

template <std::floating_point T>
void phasor_to_rect(PhasorSlabView<T> in, RectSlabSpan<T> out) {
  const std::size_t n = in.mag.size();
  const T* __restrict m = in.mag.data();
  const T* __restrict a = in.ang.data();
  T* __restrict re = out.re.data();
  T* __restrict im = out.im.data();
  for (std::size_t i = 0; i < n; ++i) {
    re[i] = m[i] * std::cos(a[i]);
    im[i] = m[i] * std::sin(a[i]);
  }
}

template <std::floating_point T>
void accumulate_rect(RectSlabView<T> in, RectSlabSpan<T> acc) {
  const std::size_t n = in.re.size();
  const T* __restrict ir = in.re.data();
  const T* __restrict ii = in.im.data();
  T* __restrict ar = acc.re.data();
  T* __restrict ai = acc.im.data();
  for (std::size_t i = 0; i < n; ++i) {
    ar[i] += ir[i];
    ai[i] += ii[i];
  }
}

// ---------------------------------------------------------------------------
// Spectrum-level operations.

template <std::floating_point T>
SpectrumPhasor<T> convert_spectrum_to_phasor(const SpectrumRect<T>& x, FlopLedger& ledger) {
  SpectrumPhasor<T> out(x.outer1(), x.outer2(), x.rows(), x.cols());
  for (std::size_t i = 0; i < x.outer1(); ++i)
    for (std::size_t j = 0; j < x.outer2(); ++j) rect_to_phasor(x.slab(i, j), out.slab(i, j));
  ledger.charge(Stage::PhasorConvertIn, kToPhasorCost * x.re().size());
  return out;
}

template <std::floating_point T>
SpectrumRect<T> convert_spectrum_to_rect(const SpectrumPhasor<T>& x, FlopLedger& ledger) {
  SpectrumRect<T> out(x.outer1(), x.outer2(), x.rows(), x.cols());
  for (std::size_t i = 0; i < x.outer1(); ++i)
    for (std::size_t j = 0; j < x.outer2(); ++j) phasor_to_rect(x.slab(i, j), out.slab(i, j));
  ledger.charge(Stage::PhasorConvertOut, kToRectangularCost * x.mag().size());
  return out;
}

namespace detail {

template <class S>
void check_product_operands(const S& x, const S& w) {
  if (x.outer2() != w.outer2())
    throw ShapeError("spectral product: reduction axes differ (" + std::to_string(x.outer2()) +
                     " vs " + std::to_string(w.outer2()) + ")");
  if (x.rows() != w.rows() || x.cols() != w.cols())
    throw ShapeError("spectral product: slab dims differ");
}

}  // namespace detail

/// X over (batch, f1), W over (f2, f1) -> (batch, f2), summed over f1.
/// Charges 4 mul + 2 add per product and 2 add per accumulated product.
template <std::floating_point T>
SpectrumRect<T> spectral_product_rect(const SpectrumRect<T>& x, const SpectrumRect<T>& w,
                                      bool conj_w, FlopLedger& ledger) {
  detail::check_product_operands(x, w);
  const std::size_t elems = x.rows() * x.cols();
  SpectrumRect<T> out(x.outer1(), w.outer1(), x.rows(), x.cols());
  std::vector<T> tre(elems), tim(elems);
  RectSlabSpan<T> tmp{tre, tim};
  for (std::size_t b = 0; b < x.outer1(); ++b) {
    for (std::size_t o = 0; o < w.outer1(); ++o) {
      for (std::size_t r = 0; r < x.outer2(); ++r) {
        multiply_rect(x.slab(b, r), w.slab(o, r), conj_w, tmp);
        accumulate_rect<T>(tmp, out.slab(b, o));
      }
    }
  }
  const std::uint64_t products = x.outer1() * w.outer1() * x.outer2() * elems;
  ledger.charge(Stage::SpectralProduct, kMulRectCost * products);
  ledger.charge(Stage::ChannelReduce, kAccumulateRectCost * products);
  return out;
}

/// X over (batch, f1), W over (f2, f1) -> unreduced products over
/// (batch, f2·f1), slab j = o·f1 + r. Phasors have no cheap sum, so the
/// channel reduction happens after conversion back to rectangular form.
template <std::floating_point T>
SpectrumPhasor<T> spectral_product_phasor(const SpectrumPhasor<T>& x, const SpectrumPhasor<T>& w,
                                          bool conj_w, FlopLedger& ledger) {
  detail::check_product_operands(x, w);
  const std::size_t f1 = x.outer2();
  SpectrumPhasor<T> out(x.outer1(), w.outer1() * f1, x.rows(), x.cols());
  for (std::size_t b = 0; b < x.outer1(); ++b)
    for (std::size_t o = 0; o < w.outer1(); ++o)
      for (std::size_t r = 0; r < f1; ++r)
        multiply_phasor(x.slab(b, r), w.slab(o, r), conj_w, out.slab(b, o * f1 + r));
  const std::uint64_t products = out.mag().size();
  ledger.charge(Stage::SpectralProduct, kMulPhasorCost * products);
  ledger.count_angle_wraps(products);
  return out;
}

// ---------------------------------------------------------------------------
// Direct spatial oracle.

namespace detail {

// out[i][j] += sum_{u,v} xpad[i+u][j+v] * k[u][v], xpad = x zero-padded by pad.
template <std::floating_point T>
void crosscorr_accumulate(PlaneView<T> x, PlaneView<T> k, std::size_t pad, std::span<T> out,
                          std::size_t out_rows, std::size_t out_cols) {
  const auto xr = static_cast<std::ptrdiff_t>(x.rows);
  const auto xc = static_cast<std::ptrdiff_t>(x.cols);
  const auto p = static_cast<std::ptrdiff_t>(pad);
  for (std::size_t i = 0; i < out_rows; ++i) {
    for (std::size_t j = 0; j < out_cols; ++j) {
      T acc = 0;
      for (std::size_t u = 0; u < k.rows; ++u) {
        const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(i + u) - p;
        if (r < 0 || r >= xr) continue;
        for (std::size_t v = 0; v < k.cols; ++v) {
          const std::ptrdiff_t c = static_cast<std::ptrdiff_t>(j + v) - p;
          if (c < 0 || c >= xc) continue;
          acc += x(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) * k(u, v);
        }
      }
      out[i * out_cols + j] += acc;
    }
  }
}

// Full convolution restricted to the window starting at (off, off):
// out[i][j] += sum_{u,v} x[i+off-u][j+off-v] * k[u][v].
template <std::floating_point T>
void fullconv_accumulate(PlaneView<T> x, PlaneView<T> k, std::size_t off, std::span<T> out,
                         std::size_t out_len) {
  const auto xr = static_cast<std::ptrdiff_t>(x.rows);
  const auto xc = static_cast<std::ptrdiff_t>(x.cols);
  for (std::size_t i = 0; i < out_len; ++i) {
    for (std::size_t j = 0; j < out_len; ++j) {
      T acc = 0;
      for (std::size_t u = 0; u < k.rows; ++u) {
        const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(i + off) - static_cast<std::ptrdiff_t>(u);
        if (r < 0 || r >= xr) continue;
        for (std::size_t v = 0; v < k.cols; ++v) {
          const std::ptrdiff_t c =
              static_cast<std::ptrdiff_t>(j + off) - static_cast<std::ptrdiff_t>(v);
          if (c < 0 || c >= xc) continue;
          acc += x(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) * k(u, v);
        }
      }
      out[i * out_len + j] += acc;
    }
  }
}

}  // namespace detail

/// Sliding-window cross-correlation of `x` (zero padded by `padding`) with
/// `k`, no kernel flip. Output side is rows + 2·padding - k.rows + 1.
template <std::floating_point T>
Plane<T> direct_crosscorr(PlaneView<T> x, PlaneView<T> k, std::size_t padding) {
  if (k.rows > x.rows + 2 * padding || k.cols > x.cols + 2 * padding)
    throw ShapeError("direct_crosscorr: kernel larger than padded image");
  Plane<T> out(x.rows + 2 * padding - k.rows + 1, x.cols + 2 * padding - k.cols + 1);
  detail::crosscorr_accumulate(x, k, padding, std::span<T>(out.data), out.rows, out.cols);
  return out;
}

/// Full linear convolution (kernel flipped), side x.rows + k.rows - 1.
template <std::floating_point T>
Plane<T> direct_fullconv(PlaneView<T> x, PlaneView<T> k) {
  if (x.rows != x.cols || k.rows != k.cols) throw ShapeError("direct_fullconv: planes must be square");
  Plane<T> out(x.rows + k.rows - 1, x.cols + k.cols - 1);
  detail::fullconv_accumulate(x, k, 0, std::span<T>(out.data), out.rows);
  return out;
}

// ---------------------------------------------------------------------------
// Engine.

namespace detail {

/// Splits [0, count) into contiguous chunks, one per worker; worker ids are
/// stable so per-worker results can be merged in a fixed order.
template <class Fn>
void parallel_chunks(std::size_t count, unsigned threads, Fn&& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, count));
  if (workers <= 1) {
    fn(std::size_t{0}, count, std::size_t{0});
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = count * w / workers;
    const std::size_t end = count * (w + 1) / workers;
    pool.emplace_back([&fn, begin, end, w] { fn(begin, end, w); });
  }
}

class StageClock {
 public:
  explicit StageClock(StageTimes* times) : times_(times) {}

  template <class Fn>
  void run(Stage s, Fn&& fn) {
    if (!times_) {
      fn();
      return;
    }
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    (*times_)[s] += std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
  }

 private:
  StageTimes* times_;
};

}  // namespace detail

template <std::floating_point T>
class ConvEngine {
 public:
  ConvEngine(ConvParams params, Backend backend, EngineOptions options = {})
      : params_(params), backend_(backend), options_(options), plan_(params.sizes) {}

  const ConvParams& params() const { return params_; }
  Backend backend() const { return backend_; }
  const FftPlan<T>& plan() const { return plan_; }

  /// y[b,f2] = sum_f1 crosscorr(pad_P(x[b,f1]), w[f2,f1]).
  RealTensor4<T> forward(const RealTensor4<T>& x, const RealTensor4<T>& w, FlopLedger& ledger,
                         StageTimes* times = nullptr) const {
    expect_dims(x, params_.input_dims(), "forward input");
    expect_dims(w, params_.kernel_dims(), "forward kernel");
    expect_finite(x, "forward input");
    expect_finite(w, "forward kernel");
    return run(ConvOp::Forward, x, w, ledger, times);
  }

  /// dL/dx[b,f1] = sum_f2 fullconv(grad_y[b,f2], w[f2,f1]), with the forward
  /// padding cropped away.
  RealTensor4<T> backward_input(const RealTensor4<T>& grad_y, const RealTensor4<T>& w,
                                FlopLedger& ledger, StageTimes* times = nullptr) const {
    expect_dims(grad_y, params_.output_dims(), "backward_input grad_y");
    expect_dims(w, params_.kernel_dims(), "backward_input kernel");
    expect_finite(grad_y, "backward_input grad_y");
    expect_finite(w, "backward_input kernel");
    return run(ConvOp::BackwardInput, grad_y, w, ledger, times);
  }

  /// dL/dw[f2,f1] = sum_b crosscorr(pad_P(x[b,f1]), grad_y[b,f2]).
  RealTensor4<T> backward_kernel(const RealTensor4<T>& grad_y, const RealTensor4<T>& x,
                                 FlopLedger& ledger, StageTimes* times = nullptr) const {
    expect_dims(grad_y, params_.output_dims(), "backward_kernel grad_y");
    expect_dims(x, params_.input_dims(), "backward_kernel input");
    expect_finite(grad_y, "backward_kernel grad_y");
    expect_finite(x, "backward_kernel input");
    return run(ConvOp::BackwardKernel, x, grad_y, ledger, times);
  }

 private:
  // One contraction: out(o0, o1) = sum_r A(ia) ⊛ B(ib). `a_offset`/`b_offset`
  // is where each operand's planes sit inside the L×L frame.
  struct Contraction {
    Dims4 out_dims;
    std::size_t reduce = 0;
    std::size_t a_offset = 0;
    std::size_t b_offset = 0;
    bool conj_b = false;
    std::size_t crop_offset = 0;
  };

  static void expect_dims(const RealTensor4<T>& t, const Dims4& want, const char* what) {
    if (t.dims() != want)
      throw ShapeError(std::string(what) + " has dims " + dims_string(t.dims()) + ", expected " +
                       dims_string(want));
  }
  static void expect_finite(const RealTensor4<T>& t, const char* what) {
    if (!t.all_finite()) throw NonFiniteInput(std::string(what) + " contains NaN or Inf");
  }

  Contraction describe(ConvOp op) const {
    const auto& p = params_;
    Contraction c;
    switch (op) {
      case ConvOp::Forward:
        c.out_dims = p.output_dims();
        c.reduce = p.in_channels;
        c.a_offset = p.padding;
        c.conj_b = true;
        break;
      case ConvOp::BackwardInput:
        c.out_dims = p.input_dims();
        c.reduce = p.out_channels;
        c.conj_b = false;
        c.crop_offset = p.padding;
        break;
      case ConvOp::BackwardKernel:
        c.out_dims = p.kernel_dims();
        c.reduce = p.batch;
        c.a_offset = p.padding;
        c.conj_b = true;
        break;
    }
    if (options_.flip_conjugation) c.conj_b = !c.conj_b;
    return c;
  }

  // Slab coordinates of the two operands for output (o0, o1), reduction r.
  static std::array<std::size_t, 4> operand_index(ConvOp op, std::size_t o0, std::size_t o1,
                                                  std::size_t r) {
    switch (op) {
      case ConvOp::Forward: return {o0, r, o1, r};         // x[b,f1], w[f2,f1]
      case ConvOp::BackwardInput: return {o0, r, r, o1};   // gy[b,f2], w[f2,f1]
      case ConvOp::BackwardKernel: return {r, o1, r, o0};  // x[b,f1], gy[b,f2]
    }
    return {};
  }

  RealTensor4<T> run(ConvOp op, const RealTensor4<T>& a, const RealTensor4<T>& b,
                     FlopLedger& ledger, StageTimes* times) const {
    if (backend_ == Backend::DirectSpatial) return run_direct(op, a, b);
    const Contraction c = describe(op);
    RealTensor4<T> out(c.out_dims);
    if (params_.batch == 0) return out;

    SpectrumRect<T> a_rect = transform_all(a, c.a_offset, Stage::RfftInput, ledger, times);
    SpectrumRect<T> b_rect = transform_all(b, c.b_offset, Stage::RfftKernel, ledger, times);
    if (backend_ == Backend::SpectralRect) {
      contract<RectOperands>({a_rect, b_rect}, op, c, out, ledger, times);
    } else {
      SpectrumPhasor<T> a_ph = to_phasor_all(a_rect, ledger, times);
      a_rect = {};
      SpectrumPhasor<T> b_ph = to_phasor_all(b_rect, ledger, times);
      b_rect = {};
      contract<PhasorOperands>({a_ph, b_ph}, op, c, out, ledger, times);
    }
    return out;
  }

  SpectrumRect<T> transform_all(const RealTensor4<T>& t, std::size_t offset, Stage stage,
                                FlopLedger& ledger, StageTimes* times) const {
    const std::size_t len = plan_.fft_len();
    SpectrumRect<T> spec(t.dim(0), t.dim(1), len, plan_.half_cols());
    const std::size_t planes = t.dim(0) * t.dim(1);
    std::vector<StageTimes> worker_times(std::max(1u, options_.threads));
    detail::parallel_chunks(planes, options_.threads, [&](std::size_t begin, std::size_t end,
                                                          std::size_t wid) {
      detail::StageClock clock(times ? &worker_times[wid] : nullptr);
      FftWorkspace<T> ws(plan_);
      std::vector<T> frame(len * len);
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t i0 = i / t.dim(1);
        const std::size_t i1 = i % t.dim(1);
        clock.run(Stage::CropPad, [&] { embed_at(t.plane(i0, i1), len, offset, offset, std::span<T>(frame)); });
        clock.run(stage, [&] { rfft2(PlaneView<T>{frame, len, len}, plan_, spec.slab(i0, i1), ws); });
      }
    });
    if (times)
      for (const auto& wt : worker_times) *times += wt;
    ledger.charge(stage, rfft2_cost(len) * planes);
    ledger.count_transforms(stage, planes);
    return spec;
  }

  SpectrumPhasor<T> to_phasor_all(const SpectrumRect<T>& x, FlopLedger& ledger,
                                  StageTimes* times) const {
    SpectrumPhasor<T> out(x.outer1(), x.outer2(), x.rows(), x.cols());
    const std::size_t slabs = x.outer1() * x.outer2();
    std::vector<StageTimes> worker_times(std::max(1u, options_.threads));
    detail::parallel_chunks(slabs, options_.threads, [&](std::size_t begin, std::size_t end,
                                                         std::size_t wid) {
      detail::StageClock clock(times ? &worker_times[wid] : nullptr);
      clock.run(Stage::PhasorConvertIn, [&] {
        for (std::size_t i = begin; i < end; ++i)
          rect_to_phasor(x.slab(i / x.outer2(), i % x.outer2()),
                         out.slab(i / x.outer2(), i % x.outer2()));
      });
    });
    if (times)
      for (const auto& wt : worker_times) *times += wt;
    ledger.charge(Stage::PhasorConvertIn, kToPhasorCost * x.re().size());
    return out;
  }

  struct RectOperands {
    const SpectrumRect<T>& a;
    const SpectrumRect<T>& b;
  };
  struct PhasorOperands {
    const SpectrumPhasor<T>& a;
    const SpectrumPhasor<T>& b;
  };

  template <class Operands>
  void contract(const Operands& ops, ConvOp op, const Contraction& c, RealTensor4<T>& out,
                FlopLedger& ledger, StageTimes* times) const {
    constexpr bool phasor = std::is_same_v<Operands, PhasorOperands>;
    const std::size_t len = plan_.fft_len();
    const std::size_t elems = plan_.slab_elements();
    const std::size_t out_len = c.out_dims[2];
    const std::size_t slices = c.out_dims[0] * c.out_dims[1];

    const unsigned workers = std::max(1u, options_.threads);
    std::vector<StageTimes> worker_times(workers);
    detail::parallel_chunks(slices, options_.threads, [&](std::size_t begin, std::size_t end,
                                                          std::size_t wid) {
      detail::StageClock clock(times ? &worker_times[wid] : nullptr);
      FftWorkspace<T> ws(plan_);
      std::vector<T> acc_re(elems), acc_im(elems), t0(elems), t1(elems), t2(elems), t3(elems);
      std::vector<T> frame(len * len);
      RectSlabSpan<T> acc{acc_re, acc_im};
      for (std::size_t s = begin; s < end; ++s) {
        const std::size_t o0 = s / c.out_dims[1];
        const std::size_t o1 = s % c.out_dims[1];
        clock.run(Stage::ChannelReduce, [&] {
          std::fill(acc_re.begin(), acc_re.end(), T(0));
          std::fill(acc_im.begin(), acc_im.end(), T(0));
        });
        for (std::size_t r = 0; r < c.reduce; ++r) {
          const auto idx = operand_index(op, o0, o1, r);
          if constexpr (phasor) {
            PhasorSlabSpan<T> prod{t0, t1};
            RectSlabSpan<T> rect{t2, t3};
            clock.run(Stage::SpectralProduct, [&] {
              multiply_phasor(ops.a.slab(idx[0], idx[1]), ops.b.slab(idx[2], idx[3]), c.conj_b,
                              prod);
            });
            clock.run(Stage::PhasorConvertOut, [&] { phasor_to_rect<T>(prod, rect); });
            clock.run(Stage::ChannelReduce, [&] { accumulate_rect<T>(rect, acc); });
          } else {
            RectSlabSpan<T> prod{t0, t1};
            clock.run(Stage::SpectralProduct, [&] {
              multiply_rect(ops.a.slab(idx[0], idx[1]), ops.b.slab(idx[2], idx[3]), c.conj_b,
                            prod);
            });
            clock.run(Stage::ChannelReduce, [&] { accumulate_rect<T>(prod, acc); });
          }
        }
        clock.run(Stage::IrfftOutput, [&] { irfft2<T>(acc, plan_, std::span<T>(frame), ws); });
        clock.run(Stage::CropPad, [&] {
          crop_at<T>(frame, len, c.crop_offset, c.crop_offset, out_len, out.plane(o0, o1));
        });
      }
    });
    if (times)
      for (const auto& wt : worker_times) *times += wt;

    const std::uint64_t products = static_cast<std::uint64_t>(slices) * c.reduce * elems;
    ledger.charge(Stage::SpectralProduct, (phasor ? kMulPhasorCost : kMulRectCost) * products);
    if (phasor) {
      ledger.count_angle_wraps(products);
      ledger.charge(Stage::PhasorConvertOut, kToRectangularCost * products);
    }
    ledger.charge(Stage::ChannelReduce, kAccumulateRectCost * products);
    ledger.charge(Stage::IrfftOutput, irfft2_cost(len) * slices);
    ledger.count_transforms(Stage::IrfftOutput, slices);
  }

  RealTensor4<T> run_direct(ConvOp op, const RealTensor4<T>& a, const RealTensor4<T>& b) const {
    const Contraction c = describe(op);
    RealTensor4<T> out(c.out_dims);
    const std::size_t slices = c.out_dims[0] * c.out_dims[1];
    const std::size_t out_len = c.out_dims[2];
    detail::parallel_chunks(slices, options_.threads, [&](std::size_t begin, std::size_t end,
                                                          std::size_t) {
      for (std::size_t s = begin; s < end; ++s) {
        const std::size_t o0 = s / c.out_dims[1];
        const std::size_t o1 = s % c.out_dims[1];
        std::span<T> dst = out.plane(o0, o1);
        for (std::size_t r = 0; r < c.reduce; ++r) {
          const auto idx = operand_index(op, o0, o1, r);
          const PlaneView<T> pa = a.plane(idx[0], idx[1]);
          const PlaneView<T> pb = b.plane(idx[2], idx[3]);
          switch (op) {
            case ConvOp::Forward:
            case ConvOp::BackwardKernel:
              detail::crosscorr_accumulate(pa, pb, params_.padding, dst, out_len, out_len);
              break;
            case ConvOp::BackwardInput:
              detail::fullconv_accumulate(pa, pb, params_.padding, dst, out_len);
              break;
          }
        }
      }
    });
    return out;
  }

  ConvParams params_;
  Backend backend_;
  EngineOptions options_;
  FftPlan<T> plan_;
};

// Convenience wrappers; each builds a plan for the call.

template <std::floating_point T>
RealTensor4<T> forward(const RealTensor4<T>& x, const RealTensor4<T>& w, const ConvParams& params,
                       Backend backend, FlopLedger& ledger, EngineOptions options = {}) {
  return ConvEngine<T>(params, backend, options).forward(x, w, ledger);
}

template <std::floating_point T>
RealTensor4<T> backward_input(const RealTensor4<T>& grad_y, const RealTensor4<T>& w,
                              const ConvParams& params, Backend backend, FlopLedger& ledger,
                              EngineOptions options = {}) {
  return ConvEngine<T>(params, backend, options).backward_input(grad_y, w, ledger);
}

template <std::floating_point T>
RealTensor4<T> backward_kernel(const RealTensor4<T>& grad_y, const RealTensor4<T>& x,
                               const ConvParams& params, Backend backend, FlopLedger& ledger,
                               EngineOptions options = {}) {
  return ConvEngine<T>(params, backend, options).backward_kernel(grad_y, x, ledger);
}

}  // namespace phasorconv
