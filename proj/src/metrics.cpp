#include "oodshape/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "oodshape/error.hpp"

namespace oodshape {

namespace {

void require_nonempty(std::span<const double> id, std::span<const double> ood) {
  if (id.empty() || ood.empty())
    throw EmptyInput("metrics need nonempty ID and OOD score sets");
}

} // namespace

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  require_nonempty(id_scores, ood_scores);
  const std::size_t n_id = id_scores.size();
  const std::size_t total = n_id + ood_scores.size();

  std::vector<std::pair<double, bool>> pooled;
  pooled.reserve(total);
  for (double s : id_scores)
    pooled.emplace_back(s, true);
  for (double s : ood_scores)
    pooled.emplace_back(s, false);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto &a, const auto &b) { return a.first < b.first; });

  // Twice the mid-rank of a tie group spanning 1-based ranks [i+1, j] is i+j+1.
  std::uint64_t id_rank_sum_x2 = 0;
  for (std::size_t i = 0; i < total;) {
    std::size_t j = i + 1;
    while (j < total && pooled[j].first == pooled[i].first)
      ++j;
    std::uint64_t ids_in_group = 0;
    for (std::size_t k = i; k < j; ++k)
      ids_in_group += pooled[k].second;
    id_rank_sum_x2 += ids_in_group * static_cast<std::uint64_t>(i + j + 1);
    i = j;
  }
  // 2U = 2*R_id - n_id*(n_id+1): wins count 2, ties count 1.
  const std::uint64_t u_x2 = id_rank_sum_x2 - static_cast<std::uint64_t>(n_id) * (n_id + 1);
  const auto pairs_x2 = 2.0 * static_cast<double>(n_id) * static_cast<double>(ood_scores.size());
  return static_cast<double>(u_x2) / pairs_x2;
}

double fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores,
                  double tpr) {
  require_nonempty(id_scores, ood_scores);
  if (!(tpr > 0.0 && tpr <= 1.0))
    throw InvalidArgument("tpr must lie in (0, 1]");
  const std::size_t n = id_scores.size();
  // Number of ID scores that must sit at or above the threshold; the slack
  // absorbs products like 0.95 * 100 landing a hair above 95.
  auto required = static_cast<std::size_t>(std::ceil(tpr * static_cast<double>(n) - 1e-9));
  required = std::clamp<std::size_t>(required, 1, n);

  std::vector<double> sorted(id_scores.begin(), id_scores.end());
  // tau = the required-th largest ID score.
  auto nth = sorted.begin() + static_cast<std::ptrdiff_t>(n - required);
  std::nth_element(sorted.begin(), nth, sorted.end());
  const double tau = *nth;

  const auto above = std::count_if(ood_scores.begin(), ood_scores.end(),
                                   [tau](double s) { return s >= tau; });
  return static_cast<double>(above) / static_cast<double>(ood_scores.size());
}

EvalResult evaluate(std::span<const double> id_scores, std::span<const double> ood_scores) {
  EvalResult r;
  r.auroc = auroc(id_scores, ood_scores);
  r.fpr_at_95tpr = fpr_at_tpr(id_scores, ood_scores, 0.95);
  r.n_id = id_scores.size();
  r.n_ood = ood_scores.size();
  return r;
}

ExpectationDiagnostics expectation_diagnostics(const IsfiStats &id_stats,
                                               const IsfiStats &ood_stats) {
  if (!(id_stats.partition == ood_stats.partition) ||
      id_stats.mean.size() != ood_stats.mean.size())
    throw InvalidArgument("ID and OOD statistics use different partitions");
  const auto &a = id_stats.mean;
  const auto &b = ood_stats.mean;
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  if (!(aa > 0.0) || !(bb > 0.0))
    throw ZeroExpectation("expectation diagnostics need nonzero mean ISFI vectors");
  const double cosine = std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
  return {cosine, std::sqrt(bb) / std::sqrt(aa)};
}

BinStats weight_value_profile(const FeatureMatrix &data, const LinearClassifier &c,
                              const IntervalPartition &p) {
  if (data.feature_dim() != c.feature_dim())
    throw LengthMismatch("feature dim does not match classifier");
  BinAccumulator acc(p.k());
  for (std::size_t r = 0; r < data.n_samples(); ++r) {
    auto z = data.row(r);
    const auto w = argmax_weight_row(c, z).weights;
    for (std::size_t i = 0; i < z.size(); ++i)
      if (auto bin = p.bin_index(z[i]))
        acc.add(*bin, w[i]);
  }
  return acc.finish();
}

} // namespace oodshape
