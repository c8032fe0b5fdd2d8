#include "oodshape/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oodshape/error.hpp"
#include "oodshape/parallel.hpp"
#include "oodshape/rng.hpp"

namespace oodshape {

namespace {

constexpr std::size_t kRowBlock = 256;
constexpr double kConvergenceTolerance = 1e-9;

// ||v||_2 with max-abs prescaling so large ISFI magnitudes cannot overflow.
double l2_norm(const std::vector<double> &v) {
  double scale = 0.0;
  for (double x : v)
    scale = std::max(scale, std::abs(x));
  if (scale == 0.0)
    return 0.0;
  double sum = 0.0;
  for (double x : v) {
    const double s = x / scale;
    sum += s * s;
  }
  return scale * std::sqrt(sum);
}

ThetaSolution normalised(const std::vector<double> &direction, const IntervalPartition &p,
                         SolveMethod method) {
  const double norm = l2_norm(direction);
  if (!(norm > 0.0))
    throw ZeroExpectation("objective direction has zero norm");
  const double root_k = std::sqrt(static_cast<double>(direction.size()));
  ThetaSolution out{std::vector<double>(direction.size()), 0.0, method, p};
  for (std::size_t k = 0; k < direction.size(); ++k)
    out.theta[k] = root_k * (direction[k] / norm);
  for (std::size_t k = 0; k < direction.size(); ++k)
    out.objective_value += out.theta[k] * direction[k];
  return out;
}

std::vector<std::size_t> argmax_classes(const FeatureMatrix &data, const LinearClassifier &c,
                                        std::span<const std::size_t> rows,
                                        const ShapingMethod *shaping) {
  std::vector<std::size_t> classes(rows.size());
  parallel_blocks(rows.size(), kRowBlock, [&](std::size_t begin, std::size_t end) {
    std::vector<double> shaped(data.feature_dim());
    for (std::size_t r = begin; r < end; ++r) {
      auto z = data.row(rows[r]);
      if (shaping) {
        apply_into(*shaping, z, shaped);
        classes[r] = argmax_weight_row(c, shaped).class_index;
      } else {
        classes[r] = argmax_weight_row(c, z).class_index;
      }
    }
  });
  return classes;
}

} // namespace

std::string to_string(SolveMethod m) {
  switch (m) {
  case SolveMethod::IdOnly:
    return "id_only";
  case SolveMethod::WithOod:
    return "with_ood";
  case SolveMethod::Alternating:
    return "alternating";
  }
  return "unknown";
}

ThetaSolution solve_id_only(const IsfiStats &stats) {
  if (stats.mean.size() != stats.partition.k())
    throw LengthMismatch("ISFI mean length must equal partition k");
  return normalised(stats.mean, stats.partition, SolveMethod::IdOnly);
}

ThetaSolution solve_with_ood(const IsfiStats &id_stats, const IsfiStats &ood_stats) {
  if (!(id_stats.partition == ood_stats.partition))
    throw InvalidArgument("ID and OOD statistics use different partitions");
  if (id_stats.mean.size() != ood_stats.mean.size() ||
      id_stats.mean.size() != id_stats.partition.k())
    throw LengthMismatch("ISFI mean lengths disagree");
  std::vector<double> diff(id_stats.mean.size());
  for (std::size_t k = 0; k < diff.size(); ++k)
    diff[k] = id_stats.mean[k] - ood_stats.mean[k];
  return normalised(diff, id_stats.partition, SolveMethod::WithOod);
}

ThetaSolution solve_alternating(const FeatureMatrix &data, const LinearClassifier &c,
                                const IntervalPartition &p, const AlternatingOptions &options) {
  if (options.iters < 1)
    throw InvalidArgument("alternating optimisation needs iters >= 1");
  if (data.feature_dim() != c.feature_dim())
    throw LengthMismatch("feature dim does not match classifier");

  Xoshiro256StarStar rng(options.seed);
  std::vector<std::size_t> all_rows(data.n_samples());
  std::iota(all_rows.begin(), all_rows.end(), std::size_t{0});

  std::optional<ThetaSolution> current;
  std::vector<double> previous_theta;
  for (std::size_t it = 0; it < options.iters; ++it) {
    const auto rows = options.subsample
                          ? sample_without_replacement(data.n_samples(), *options.subsample, rng)
                          : all_rows;

    std::optional<ShapingMethod> shaping;
    if (current)
      shaping = current->as_method(options.out_of_range);
    const auto classes = argmax_classes(data, c, rows, shaping ? &*shaping : nullptr);

    std::optional<ThetaSolution> next;
    try {
      next = solve_id_only(mean_isfi(data, c, p, rows, classes));
    } catch (const ZeroExpectation &) {
      throw ZeroExpectation("alternating optimisation, iteration " + std::to_string(it + 1));
    }
    if (current)
      previous_theta = current->theta;
    current = std::move(next);
  }

  current->method = SolveMethod::Alternating;
  current->iterations = options.iters;
  if (!previous_theta.empty()) {
    double max_change = 0.0;
    for (std::size_t k = 0; k < previous_theta.size(); ++k)
      max_change = std::max(max_change, std::abs(previous_theta[k] - current->theta[k]));
    current->converged = max_change < kConvergenceTolerance;
  }
  return *current;
}

double changed_weight_ratio(const FeatureMatrix &data, const LinearClassifier &c,
                            const ShapingMethod &m) {
  if (data.feature_dim() != c.feature_dim())
    throw LengthMismatch("feature dim does not match classifier");
  std::vector<std::size_t> rows(data.n_samples());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const auto before = argmax_classes(data, c, rows, nullptr);
  const auto after = argmax_classes(data, c, rows, &m);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < rows.size(); ++i)
    changed += before[i] != after[i];
  return 100.0 * static_cast<double>(changed) / static_cast<double>(rows.size());
}

nlohmann::json to_json(const IntervalPartition &p) {
  return {{"alpha", p.alpha()}, {"beta", p.beta()}, {"k", p.k()}, {"delta", p.delta()}};
}

nlohmann::json to_json(const ThetaSolution &s) {
  nlohmann::json j = {{"method", to_string(s.method)},
                      {"theta", s.theta},
                      {"objective", s.objective_value},
                      {"partition", to_json(s.partition)}};
  if (s.method == SolveMethod::Alternating) {
    j["iterations"] = s.iterations;
    j["converged"] = s.converged;
  }
  return j;
}

} // namespace oodshape
