#pragma once

// Runtime operation ledger charged by the convolution pipeline, closed-form
// cost models for the rectangular and phasor spectral products, and the
// reconciliation of one against the other.

#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "phasorconv/complexforms.hpp"
#include "phasorconv/error.hpp"
#include "phasorconv/geometry.hpp"

namespace phasorconv {

enum class Stage : std::size_t {
  RfftInput,
  RfftKernel,
  SpectralProduct,
  ChannelReduce,
  PhasorConvertIn,
  PhasorConvertOut,
  IrfftOutput,
  CropPad,
};

inline constexpr std::size_t kStageCount = 8;

inline constexpr std::array<Stage, kStageCount> kAllStages = {
    Stage::RfftInput,       Stage::RfftKernel,       Stage::SpectralProduct,
    Stage::ChannelReduce,   Stage::PhasorConvertIn,  Stage::PhasorConvertOut,
    Stage::IrfftOutput,     Stage::CropPad,
};

inline constexpr std::string_view stage_name(Stage s) {
  constexpr std::array<std::string_view, kStageCount> names = {
      "rfft_input",        "rfft_kernel",        "spectral_product",
      "channel_reduce",    "phasor_convert_in",  "phasor_convert_out",
      "irfft_output",      "crop_pad",
  };
  return names[static_cast<std::size_t>(s)];
}

inline std::optional<Stage> parse_stage(std::string_view name) {
  for (Stage s : kAllStages)
    if (stage_name(s) == name) return s;
  return std::nullopt;
}

/// Per-stage operation counts plus the number of 2-D transforms executed per
/// stage. Single writer; parallel workers keep private ledgers and merge.
class FlopLedger {
 public:
  void charge(Stage s, const OpCost& c) { cost_[index(s)] += c; }
  void count_transforms(Stage s, std::uint64_t n = 1) { transforms_[index(s)] += n; }
  /// Angle wraps are tracked apart from arithmetic: the phasor product's
  /// published cost does not include them.
  void count_angle_wraps(std::uint64_t n) { angle_wraps_ += n; }

  const OpCost& cost(Stage s) const { return cost_[index(s)]; }
  std::uint64_t transforms(Stage s) const { return transforms_[index(s)]; }
  std::uint64_t angle_wraps() const { return angle_wraps_; }

  OpCost total() const {
    OpCost t;
    for (const auto& c : cost_) t += c;
    return t;
  }

  FlopLedger& operator+=(const FlopLedger& o) {
    for (std::size_t i = 0; i < kStageCount; ++i) {
      cost_[i] += o.cost_[i];
      transforms_[i] += o.transforms_[i];
    }
    angle_wraps_ += o.angle_wraps_;
    return *this;
  }
  friend FlopLedger operator+(FlopLedger a, const FlopLedger& b) { return a += b; }
  friend bool operator==(const FlopLedger&, const FlopLedger&) = default;

 private:
  static constexpr std::size_t index(Stage s) { return static_cast<std::size_t>(s); }

  std::array<OpCost, kStageCount> cost_{};
  std::array<std::uint64_t, kStageCount> transforms_{};
  std::uint64_t angle_wraps_ = 0;
};

// ---------------------------------------------------------------------------
// Transform costs as executed by the radix-2 implementation.

/// One length-`len` complex FFT: (len/2)·log2(len) butterflies, each a complex
/// multiply (4 mul, 2 add) and a complex add/sub pair (4 add).
inline constexpr OpCost fft_1d_cost(std::size_t len) {
  if (len < 2) return {};
  const std::uint64_t butterflies =
      static_cast<std::uint64_t>(len / 2) * static_cast<std::uint64_t>(std::countr_zero(len));
  return OpCost{.mul = 4, .add = 6} * butterflies;
}

/// Row FFTs over all `len` rows, then column FFTs over the len/2+1 kept columns.
inline constexpr OpCost rfft2_cost(std::size_t len) {
  return fft_1d_cost(len) * static_cast<std::uint64_t>(len + len / 2 + 1);
}

/// Column inverse FFTs, full-row inverse FFTs, and the 1/len² scaling.
inline constexpr OpCost irfft2_cost(std::size_t len) {
  return rfft2_cost(len) + OpCost{.mul = static_cast<std::uint64_t>(len) * len};
}

// ---------------------------------------------------------------------------
// Analytical models.

/// Which transform size the model counts: the image side N (the published
/// estimate) or the padded power-of-two length L this engine executes.
enum class Convention { PaperN, ImplementedL };
enum class Form { Rect, Phasor };
enum class ConvOp { Forward, BackwardInput, BackwardKernel };

inline constexpr std::string_view to_string(Convention c) {
  return c == Convention::PaperN ? "paper-n" : "impl-l";
}
inline constexpr std::string_view to_string(Form f) {
  return f == Form::Rect ? "rect" : "phasor";
}
inline constexpr std::string_view to_string(ConvOp op) {
  switch (op) {
    case ConvOp::Forward: return "forward";
    case ConvOp::BackwardInput: return "backward_input";
    case ConvOp::BackwardKernel: return "backward_kernel";
  }
  return "?";
}

struct CostModel {
  std::uint64_t b = 1;
  std::uint64_t f1 = 1;
  std::uint64_t f2 = 1;
  std::uint64_t n = 1;
  std::uint64_t k = 1;
  std::uint64_t p = 0;
  std::uint64_t l = 1;
  /// Hidden constant of the FFT term. Free knob; never checked against
  /// measurement.
  double c_fft = 2.5;
  Convention convention = Convention::PaperN;
  Form form = Form::Rect;
  ConvOp op = ConvOp::Forward;

  static CostModel for_geometry(std::uint64_t b, std::uint64_t f1, std::uint64_t f2,
                                std::uint64_t n, std::uint64_t k, std::uint64_t p,
                                Convention convention, Form form,
                                ConvOp op = ConvOp::Forward) {
    CostModel m{.b = b, .f1 = f1, .f2 = f2, .n = n, .k = k, .p = p};
    m.l = plan_sizes(n, k, p).fft_len;
    m.convention = convention;
    m.form = form;
    m.op = op;
    return m;
  }

  /// Side length of the 2-D transforms.
  std::uint64_t transform_side() const {
    return convention == Convention::PaperN ? n : l;
  }
  /// Complex bins per spectral plane: N² as published, L·(L/2+1) as executed.
  std::uint64_t spectral_elements() const {
    return convention == Convention::PaperN ? n * n : l * (l / 2 + 1);
  }
  /// Complex products per call. All three convolutions contract one
  /// B·f1·f2 index space.
  std::uint64_t product_pairs() const { return b * f1 * f2; }
};

/// 2·C·N²·log2(N)·[B·f1 + B·f2 + f2·f1] + 4·B·f2·f1·N².
/// Under ImplementedL, N is replaced by L in the transform term and N² by the
/// half-spectrum size in the product term.
inline double flops_baseline_paper(const CostModel& m) {
  const double side = static_cast<double>(m.transform_side());
  const double fft_term = side > 0 ? 2.0 * m.c_fft * side * side * std::log2(side) : 0.0;
  const double transforms = static_cast<double>(m.b * m.f1 + m.b * m.f2 + m.f2 * m.f1);
  return fft_term * transforms +
         4.0 * static_cast<double>(m.product_pairs() * m.spectral_elements());
}

/// Itemized stage costs predicted by the model.
struct CostBreakdown {
  double fft = 0;  // C-weighted transform estimate
  OpCost product;
  OpCost reduce;
  OpCost convert_in;
  OpCost convert_out;

  std::uint64_t product_multiplies() const { return product.mul; }
  /// Multiplications of the whole spectral stage including conversions.
  OpCost spectral_total() const { return product + reduce + convert_in + convert_out; }
};

/// Number of spectral planes converted to phasor form at Step 2: both
/// operands of the contraction, each transformed once per call.
inline std::uint64_t converted_planes(const CostModel& m) {
  if (m.b == 0) return 0;
  switch (m.op) {
    case ConvOp::Forward: return m.b * m.f1 + m.f2 * m.f1;
    case ConvOp::BackwardInput: return m.b * m.f2 + m.f2 * m.f1;
    case ConvOp::BackwardKernel: return m.b * m.f1 + m.b * m.f2;
  }
  return 0;
}

inline CostBreakdown itemize(const CostModel& m) {
  CostBreakdown out;
  const double side = static_cast<double>(m.transform_side());
  const double transforms = static_cast<double>(m.b * m.f1 + m.b * m.f2 + m.f2 * m.f1);
  out.fft = side > 0 ? 2.0 * m.c_fft * side * side * std::log2(side) * transforms : 0.0;
  const std::uint64_t products = m.product_pairs() * m.spectral_elements();
  out.product = (m.form == Form::Rect ? kMulRectCost : kMulPhasorCost) * products;
  out.reduce = kAccumulateRectCost * products;
  if (m.form == Form::Phasor) {
    out.convert_in = kToPhasorCost * (converted_planes(m) * m.spectral_elements());
    out.convert_out = kToRectangularCost * products;
  }
  return out;
}

/// Phasor-form itemization; the product term is B·f2·f1 multiplies per bin.
inline CostBreakdown flops_phasor_model(CostModel m) {
  m.form = Form::Phasor;
  return itemize(m);
}

// ---------------------------------------------------------------------------
// Reconciliation of a measured ledger against the model.

struct ReconcileRow {
  Stage stage;
  OpCost predicted;
  OpCost measured;
  std::uint64_t predicted_transforms = 0;
  std::uint64_t measured_transforms = 0;
  bool exact_required = false;
  bool match = false;
};

struct ReconcileReport {
  std::vector<ReconcileRow> rows;

  /// True when every stage that must match exactly does.
  bool exact_stages_match() const {
    for (const auto& r : rows)
      if (r.exact_required && !r.match) return false;
    return true;
  }
  const ReconcileRow& row(Stage s) const {
    for (const auto& r : rows)
      if (r.stage == s) return r;
    throw Error("no reconcile row for stage " + std::string(stage_name(s)));
  }
};

/// Predicted 2-D transform counts per stage for one engine call.
inline std::array<std::uint64_t, kStageCount> predicted_transforms(const CostModel& m) {
  std::array<std::uint64_t, kStageCount> t{};
  auto at = [&](Stage s) -> std::uint64_t& { return t[static_cast<std::size_t>(s)]; };
  if (m.b == 0) return t;
  switch (m.op) {
    case ConvOp::Forward:
      at(Stage::RfftInput) = m.b * m.f1;
      at(Stage::RfftKernel) = m.f2 * m.f1;
      at(Stage::IrfftOutput) = m.b * m.f2;
      break;
    case ConvOp::BackwardInput:
      at(Stage::RfftInput) = m.b * m.f2;
      at(Stage::RfftKernel) = m.f2 * m.f1;
      at(Stage::IrfftOutput) = m.b * m.f1;
      break;
    case ConvOp::BackwardKernel:
      at(Stage::RfftInput) = m.b * m.f1;
      at(Stage::RfftKernel) = m.b * m.f2;
      at(Stage::IrfftOutput) = m.f2 * m.f1;
      break;
  }
  return t;
}

/// Compares a ledger produced by one spectral engine call with the
/// ImplementedL model of the same geometry. Product, reduction and conversion
/// stages must agree exactly; transform stages are compared against the
/// 5·L·log2(L) per 1-D transform heuristic and only reported.
inline ReconcileReport reconcile(const FlopLedger& ledger, CostModel model) {
  model.convention = Convention::ImplementedL;
  const auto transforms = predicted_transforms(model);
  for (Stage s : kAllStages) {
    if (ledger.transforms(s) != transforms[static_cast<std::size_t>(s)]) {
      throw ShapeError("ledger geometry mismatch at stage " + std::string(stage_name(s)) +
                       ": " + std::to_string(ledger.transforms(s)) + " transforms, model expects " +
                       std::to_string(transforms[static_cast<std::size_t>(s)]));
    }
  }
  const CostBreakdown items = itemize(model);
  const std::uint64_t len = model.l;
  const std::uint64_t lines_per_2d = len + len / 2 + 1;
  const std::uint64_t heuristic_1d =
      len > 1 ? 5 * len * static_cast<std::uint64_t>(std::countr_zero(len)) : 0;

  ReconcileReport report;
  for (Stage s : kAllStages) {
    ReconcileRow row{.stage = s, .predicted = {}, .measured = ledger.cost(s)};
    row.predicted_transforms = transforms[static_cast<std::size_t>(s)];
    row.measured_transforms = ledger.transforms(s);
    switch (s) {
      case Stage::RfftInput:
      case Stage::RfftKernel:
      case Stage::IrfftOutput:
        // Heuristic is a flat op count; put it in the add column for display.
        row.predicted = OpCost{.add = row.predicted_transforms * lines_per_2d * heuristic_1d};
        row.match = row.predicted.total() == row.measured.total();
        break;
      case Stage::SpectralProduct:
        row.predicted = items.product;
        row.exact_required = true;
        break;
      case Stage::ChannelReduce:
        row.predicted = items.reduce;
        row.exact_required = true;
        break;
      case Stage::PhasorConvertIn:
        row.predicted = items.convert_in;
        row.exact_required = true;
        break;
      case Stage::PhasorConvertOut:
        row.predicted = items.convert_out;
        row.exact_required = true;
        break;
      case Stage::CropPad:
        row.exact_required = true;
        break;
    }
    if (row.exact_required) row.match = row.predicted == row.measured;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace phasorconv
