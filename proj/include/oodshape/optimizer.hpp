#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "oodshape/intervals.hpp"
#include "oodshape/shaping.hpp"

namespace oodshape {

enum class SolveMethod { IdOnly, WithOod, Alternating };

std::string to_string(SolveMethod m);

/// Piecewise-constant shaping vector with ||theta||_2 = sqrt(K).
struct ThetaSolution {
  std::vector<double> theta;
  double objective_value = 0.0;
  SolveMethod method = SolveMethod::IdOnly;
  IntervalPartition partition;
  std::size_t iterations = 0; // alternating only
  bool converged = false;     // alternating only: last two iterates within 1e-9

  PiecewiseConstant as_method(OutOfRange policy = OutOfRange::Zero) const {
    return {theta, partition, policy};
  }
};

/// Maximiser of theta . mean subject to ||theta|| = sqrt(K):
/// theta = sqrt(K) * mean / ||mean||.
ThetaSolution solve_id_only(const IsfiStats &stats);

/// Maximiser of theta . (id.mean - ood.mean) under the same norm constraint.
ThetaSolution solve_with_ood(const IsfiStats &id_stats, const IsfiStats &ood_stats);

struct AlternatingOptions {
  std::size_t iters = 10;
  std::optional<std::size_t> subsample = 10000;
  std::uint64_t seed = 0;
  OutOfRange out_of_range = OutOfRange::Zero;
};

/// Alternates between solving the ID-only problem with fixed per-sample
/// argmax rows and re-deriving those rows from the reshaped features.
/// Each iteration draws a fresh subsample (xoshiro256** seeded via
/// splitmix64 from `seed`) when `subsample` is set. The partition is never
/// refit.
ThetaSolution solve_alternating(const FeatureMatrix &data, const LinearClassifier &c,
                                const IntervalPartition &p,
                                const AlternatingOptions &options = {});

/// Percentage of samples whose bias-free argmax class differs between the
/// original and the shaped features.
double changed_weight_ratio(const FeatureMatrix &data, const LinearClassifier &c,
                            const ShapingMethod &m);

nlohmann::json to_json(const IntervalPartition &p);
nlohmann::json to_json(const ThetaSolution &s);

} // namespace oodshape
