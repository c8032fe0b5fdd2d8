#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "oodshape/intervals.hpp"
#include "oodshape/stats.hpp"
#include "oodshape/tensor_io.hpp"

namespace oodshape {

/// What the piecewise-constant method does with features outside [alpha, beta).
enum class OutOfRange { Zero, Keep };

struct Identity {};

struct PiecewiseConstant {
  std::vector<double> theta;
  IntervalPartition partition;
  OutOfRange out_of_range = OutOfRange::Zero;
};

/// Clip at t.
struct ReAct {
  double t;
};

/// Butterworth-style attenuation z / sqrt(1 + (z/t)^(2n)).
struct BFAct {
  double t;
  int n = 2;
};

/// Zero below `low`, identity on [low, high), clamp to `high` above.
struct VraP {
  double low;
  double high;
};

/// Per-sample pruning below the p-th percentile of the sample's own values.
struct AshP {
  double p = 60.0;
};
/// Pruning, then kept entries set to (pre-pruning sum) / (kept count).
struct AshB {
  double p = 65.0;
};
/// Pruning, then kept entries scaled by exp(pre-pruning sum / kept sum).
struct AshS {
  double p = 90.0;
};

/// DICE weight sparsification. Shapes the classifier rather than the
/// features; `mask` is row-major C x M with 1 for kept weights.
struct DiceMask {
  std::vector<std::uint8_t> mask;
  std::size_t n_classes = 0;
  std::size_t feature_dim = 0;
  double p = 70.0;
};

using ShapingMethod =
    std::variant<Identity, PiecewiseConstant, ReAct, BFAct, VraP, AshP, AshB, AshS, DiceMask>;

/// Short lowercase identifier ("identity", "piecewise", "react", ...).
std::string method_kind(const ShapingMethod &m);

/// Throws InvalidArgument when a descriptor violates its invariants.
void validate(const ShapingMethod &m);

bool is_elementwise(const ShapingMethod &m);

/// Reshaped copy of `z`. DiceMask is rejected with InvalidMethod.
std::vector<double> apply(const ShapingMethod &m, std::span<const double> z);

/// Same as `apply`, writing into `out` (which may alias `z`).
void apply_into(const ShapingMethod &m, std::span<const double> z, std::span<double> out);

/// theta(z) = f(z) / z for element-wise methods, evaluated at `z` itself.
/// At z == 0 the ratio is replaced by its limit (1 for Identity, ReAct and
/// BFAct; the active VRA-P segment's constant otherwise).
double theta_at(const ShapingMethod &m, double z);

/// theta evaluated at each bin midpoint; PiecewiseConstant returns its own theta.
std::vector<double> theta_curve(const ShapingMethod &m, const IntervalPartition &p);

/// Mean / population std / count, per bin, of the ratio reshaped/original
/// over every nonzero in-range feature of `data`.
BinStats empirical_theta_curve(const ShapingMethod &m, const FeatureMatrix &data,
                               const IntervalPartition &p);

/// Accumulating form used to pool several datasets into one curve.
void accumulate_theta_ratios(const ShapingMethod &m, const FeatureMatrix &data,
                             const IntervalPartition &p, BinAccumulator &acc);

} // namespace oodshape
