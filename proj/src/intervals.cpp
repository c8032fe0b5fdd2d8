#include "oodshape/intervals.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "oodshape/error.hpp"
#include "oodshape/parallel.hpp"
#include "oodshape/stats.hpp"

namespace oodshape {

namespace {

constexpr std::size_t kRowBlock = 256;

void check_dims(const FeatureMatrix &data, const LinearClassifier &c) {
  if (data.feature_dim() != c.feature_dim())
    throw LengthMismatch(data.source_tag() + ": feature dim " +
                         std::to_string(data.feature_dim()) + " != classifier dim " +
                         std::to_string(c.feature_dim()));
}

} // namespace

IntervalPartition::IntervalPartition(double alpha, double beta, std::size_t k)
    : alpha_(alpha), beta_(beta), k_(k), delta_(0.0) {
  if (k == 0)
    throw InvalidArgument("partition needs k >= 1");
  if (!std::isfinite(alpha) || !std::isfinite(beta))
    throw InvalidArgument("partition limits must be finite");
  if (!(alpha < beta))
    throw DegeneratePartition("alpha " + std::to_string(alpha) + " must be below beta " +
                              std::to_string(beta));
  delta_ = (beta - alpha) / static_cast<double>(k);
  if (!(delta_ > 0.0))
    throw DegeneratePartition("bin width underflows to zero");
}

double IntervalPartition::lower(std::size_t bin) const {
  return alpha_ + static_cast<double>(bin) * delta_;
}

double IntervalPartition::upper(std::size_t bin) const {
  return bin + 1 >= k_ ? beta_ : lower(bin + 1);
}

double IntervalPartition::midpoint(std::size_t bin) const {
  return alpha_ + (static_cast<double>(bin) + 0.5) * delta_;
}

std::optional<std::size_t> IntervalPartition::bin_index(double z) const {
  if (!(z >= alpha_) || !(z < beta_))
    return std::nullopt;
  const double guess = std::floor((z - alpha_) / delta_);
  auto bin = static_cast<std::size_t>(std::clamp(guess, 0.0, static_cast<double>(k_ - 1)));
  // The division can round across an edge; settle against the edges the
  // bins are defined by.
  while (bin > 0 && z < lower(bin))
    --bin;
  while (bin + 1 < k_ && z >= lower(bin + 1))
    ++bin;
  return bin;
}

IntervalPartition fit_partition(const FeatureMatrix &train, std::size_t k, double lo_pct,
                                double hi_pct) {
  if (!(lo_pct >= 0.0 && lo_pct < hi_pct && hi_pct <= 100.0))
    throw InvalidArgument("need 0 <= lo_pct < hi_pct <= 100, got " + std::to_string(lo_pct) +
                          ", " + std::to_string(hi_pct));
  if (k == 0)
    throw InvalidArgument("partition needs k >= 1");
  auto values = train.features().data();
  std::vector<double> scratch(values.begin(), values.end());
  const double alpha = percentile_inplace(scratch, lo_pct);
  const double beta = percentile_inplace(scratch, hi_pct);
  if (!(alpha < beta))
    throw DegeneratePartition(train.source_tag() + ": percentiles " + std::to_string(lo_pct) +
                              " and " + std::to_string(hi_pct) + " coincide at " +
                              std::to_string(alpha));
  return IntervalPartition(alpha, beta, k);
}

void accumulate_isfi(std::span<const double> z, std::span<const double> w_max,
                     const IntervalPartition &p, std::span<double> out) {
  if (z.size() != w_max.size())
    throw LengthMismatch("feature length " + std::to_string(z.size()) +
                         " != weight length " + std::to_string(w_max.size()));
  if (out.size() != p.k())
    throw LengthMismatch("ISFI output length must equal k");
  for (std::size_t i = 0; i < z.size(); ++i)
    if (auto bin = p.bin_index(z[i]))
      out[*bin] += w_max[i] * z[i];
}

std::vector<double> isfi_vector(std::span<const double> z, std::span<const double> w_max,
                                const IntervalPartition &p) {
  std::vector<double> out(p.k(), 0.0);
  accumulate_isfi(z, w_max, p, out);
  return out;
}

ArgmaxRow argmax_weight_row(const LinearClassifier &c, std::span<const double> z) {
  if (z.size() != c.feature_dim())
    throw LengthMismatch("feature length " + std::to_string(z.size()) +
                         " != classifier dim " + std::to_string(c.feature_dim()));
  std::size_t best = 0;
  double best_value = 0.0;
  for (std::size_t j = 0; j < c.n_classes(); ++j) {
    auto w = c.weight_row(j);
    double dot = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i)
      dot += w[i] * z[i];
    if (j == 0 || dot > best_value) {
      best = j;
      best_value = dot;
    }
  }
  return {best, c.weight_row(best)};
}

IsfiStats mean_isfi(const FeatureMatrix &data, const LinearClassifier &c,
                    const IntervalPartition &p, std::span<const std::size_t> rows,
                    std::span<const std::size_t> classes) {
  check_dims(data, c);
  if (rows.size() != classes.size())
    throw LengthMismatch("rows and classes must have equal length");
  if (rows.empty())
    throw EmptyInput("mean ISFI over zero samples");

  const std::size_t n = rows.size();
  const std::size_t n_blocks = (n + kRowBlock - 1) / kRowBlock;
  std::vector<std::vector<double>> partial(n_blocks, std::vector<double>(p.k(), 0.0));
  parallel_blocks(n, kRowBlock, [&](std::size_t begin, std::size_t end) {
    auto &acc = partial[begin / kRowBlock];
    for (std::size_t r = begin; r < end; ++r) {
      if (rows[r] >= data.n_samples())
        throw InvalidArgument("row index out of range");
      if (classes[r] >= c.n_classes())
        throw InvalidArgument("class index out of range");
      accumulate_isfi(data.row(rows[r]), c.weight_row(classes[r]), p, acc);
    }
  });

  std::vector<double> total(p.k(), 0.0);
  for (const auto &block : partial)
    for (std::size_t k = 0; k < p.k(); ++k)
      total[k] += block[k];
  for (auto &v : total)
    v /= static_cast<double>(n);
  return {std::move(total), n, p};
}

IsfiStats mean_isfi(const FeatureMatrix &data, const LinearClassifier &c,
                    const IntervalPartition &p) {
  check_dims(data, c);
  std::vector<std::size_t> rows(data.n_samples());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::vector<std::size_t> classes(rows.size());
  parallel_blocks(rows.size(), kRowBlock, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r)
      classes[r] = argmax_weight_row(c, data.row(r)).class_index;
  });
  return mean_isfi(data, c, p, rows, classes);
}

} // namespace oodshape
