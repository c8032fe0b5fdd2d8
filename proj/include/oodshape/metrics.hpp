#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "oodshape/intervals.hpp"
#include "oodshape/stats.hpp"

namespace oodshape {

/// P(id score > ood score) over all pairs, ties counted 1/2. Computed from
/// mid-ranks in O((n+m) log(n+m)) with integer rank sums, so the result is
/// the exact pairwise fraction.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

/// Fraction of OOD scores >= tau, where tau is the largest ID score such
/// that at least `tpr` of the ID scores are >= tau.
double fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores,
                  double tpr = 0.95);

struct EvalResult {
  double auroc = 0.0;
  double fpr_at_95tpr = 0.0;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
  std::string dataset;
  std::string method;
  std::string score;
};

EvalResult evaluate(std::span<const double> id_scores, std::span<const double> ood_scores);

/// Angle and relative size of the OOD mean ISFI (b) against the ID one (a).
struct ExpectationDiagnostics {
  double cosine;     // a.b / (|a||b|)
  double norm_ratio; // |b| / |a|
};

ExpectationDiagnostics expectation_diagnostics(const IsfiStats &id_stats,
                                               const IsfiStats &ood_stats);

/// Per-bin statistics of the argmax-row weight paired with each feature.
BinStats weight_value_profile(const FeatureMatrix &data, const LinearClassifier &c,
                              const IntervalPartition &p);

} // namespace oodshape
