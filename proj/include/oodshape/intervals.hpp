#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "oodshape/tensor_io.hpp"

namespace oodshape {

/// K equal-width half-open bins covering [alpha, beta).
///
/// Bins are indexed from 0: bin k spans [alpha + k*delta, alpha + (k+1)*delta),
/// and the top edge of the last bin is beta itself.
class IntervalPartition {
public:
  IntervalPartition(double alpha, double beta, std::size_t k);

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  std::size_t k() const { return k_; }
  double delta() const { return delta_; }

  double lower(std::size_t bin) const;
  double upper(std::size_t bin) const;
  double midpoint(std::size_t bin) const;

  /// Bin holding `z`, or nullopt when z < alpha or z >= beta.
  std::optional<std::size_t> bin_index(double z) const;

  friend bool operator==(const IntervalPartition &, const IntervalPartition &) = default;

private:
  double alpha_;
  double beta_;
  std::size_t k_;
  double delta_;
};

inline constexpr std::size_t kDefaultBins = 100;
inline constexpr double kDefaultLowPercentile = 0.1;
inline constexpr double kDefaultHighPercentile = 99.9;

/// Fits alpha/beta as the lo_pct / hi_pct percentiles of all N*M training
/// feature values (linear interpolation) and splits [alpha, beta) into k bins.
IntervalPartition fit_partition(const FeatureMatrix &train, std::size_t k = kDefaultBins,
                                double lo_pct = kDefaultLowPercentile,
                                double hi_pct = kDefaultHighPercentile);

/// Per-interval contribution of `z` to the bias-free logit `w_max . z`.
/// Features outside [alpha, beta) contribute nowhere.
std::vector<double> isfi_vector(std::span<const double> z, std::span<const double> w_max,
                                const IntervalPartition &p);

/// Accumulating form of `isfi_vector`: adds into `out` (length k).
void accumulate_isfi(std::span<const double> z, std::span<const double> w_max,
                     const IntervalPartition &p, std::span<double> out);

struct ArgmaxRow {
  std::size_t class_index;
  std::span<const double> weights;
};

/// Class maximising W_j . z with the bias excluded; ties go to the smallest index.
ArgmaxRow argmax_weight_row(const LinearClassifier &c, std::span<const double> z);

struct IsfiStats {
  std::vector<double> mean;
  std::size_t n_samples = 0;
  IntervalPartition partition;
};

/// Mean ISFI vector over the dataset, each row using its own argmax weight row.
/// Summation order is fixed (rows in blocks, blocks combined in order), so the
/// result is bit-identical regardless of thread count.
IsfiStats mean_isfi(const FeatureMatrix &data, const LinearClassifier &c,
                    const IntervalPartition &p);

/// Mean ISFI over a subset of rows, with the weight row of each selected sample
/// given explicitly by `classes[i]` (parallel to `rows`).
IsfiStats mean_isfi(const FeatureMatrix &data, const LinearClassifier &c,
                    const IntervalPartition &p, std::span<const std::size_t> rows,
                    std::span<const std::size_t> classes);

} // namespace oodshape
