#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace oodshape {

/// Percentile with linear interpolation between order statistics:
/// rank = pct/100 * (n-1), matching numpy's default "linear" method,
/// including its two-sided lerp so results agree bit-for-bit.
/// `pct` must lie in [0, 100].
double percentile(std::span<const double> values, double pct);

/// Same as `percentile` but reorders `scratch` in place instead of copying.
double percentile_inplace(std::vector<double> &scratch, double pct);

/// Per-bin mean / population standard deviation / count.
/// Empty bins carry NaN for mean and std.
struct BinStats {
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<std::size_t> count;
};

/// Welford accumulator over a fixed number of bins.
class BinAccumulator {
public:
  explicit BinAccumulator(std::size_t bins);

  void add(std::size_t bin, double value);
  BinStats finish() const;

private:
  std::vector<double> mean_;
  std::vector<double> m2_;
  std::vector<std::size_t> count_;
};

} // namespace oodshape
