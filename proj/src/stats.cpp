#include "oodshape/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "oodshape/error.hpp"

namespace oodshape {

namespace {

double lerp_like_numpy(double a, double b, double t) {
  const double diff = b - a;
  return t >= 0.5 ? b - diff * (1.0 - t) : a + diff * t;
}

} // namespace

double percentile_inplace(std::vector<double> &scratch, double pct) {
  if (scratch.empty())
    throw EmptyInput("percentile of an empty set");
  if (!(pct >= 0.0 && pct <= 100.0))
    throw InvalidPercentile("percentile " + std::to_string(pct) + " outside [0, 100]");

  const std::size_t n = scratch.size();
  const double rank = pct / 100.0 * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = rank - static_cast<double>(lo);

  auto lo_it = scratch.begin() + static_cast<std::ptrdiff_t>(lo);
  std::nth_element(scratch.begin(), lo_it, scratch.end());
  const double a = *lo_it;
  if (hi == lo)
    return a;
  // After nth_element everything right of lo is >= a; the next order
  // statistic is the minimum of that tail.
  const double b = *std::min_element(lo_it + 1, scratch.end());
  return lerp_like_numpy(a, b, frac);
}

double percentile(std::span<const double> values, double pct) {
  std::vector<double> scratch(values.begin(), values.end());
  return percentile_inplace(scratch, pct);
}

BinAccumulator::BinAccumulator(std::size_t bins)
    : mean_(bins, 0.0), m2_(bins, 0.0), count_(bins, 0) {}

void BinAccumulator::add(std::size_t bin, double value) {
  const auto n = ++count_[bin];
  const double delta = value - mean_[bin];
  mean_[bin] += delta / static_cast<double>(n);
  m2_[bin] += delta * (value - mean_[bin]);
}

BinStats BinAccumulator::finish() const {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  BinStats out;
  out.mean.resize(count_.size());
  out.std.resize(count_.size());
  out.count = count_;
  for (std::size_t k = 0; k < count_.size(); ++k) {
    if (count_[k] == 0) {
      out.mean[k] = nan;
      out.std[k] = nan;
    } else {
      out.mean[k] = mean_[k];
      out.std[k] = std::sqrt(std::max(0.0, m2_[k] / static_cast<double>(count_[k])));
    }
  }
  return out;
}

} // namespace oodshape
