#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "oodshape/shaping.hpp"
#include "oodshape/tensor_io.hpp"

namespace oodshape {

/// Maximum softmax probability of logits / T. T = 1000 with no input
/// perturbation stands in for ODIN on precomputed features.
struct Msp {
  double temperature = 1.0;
};
/// Maximum logit.
struct Mls {};
/// T * log sum_j exp(l_j / T).
struct Energy {
  double temperature = 1.0;
};

using ScoreKind = std::variant<Msp, Mls, Energy>;

/// "msp", "mls", "energy", with the temperature appended when it is not 1
/// (e.g. "msp@T=1000").
std::string score_name(const ScoreKind &kind);

/// W z + b. The bias is included here, unlike argmax_weight_row.
std::vector<double> logits(const LinearClassifier &c, std::span<const double> z);

/// Larger means more in-distribution. Stable for |logits| up to at least 1e6.
double score(const ScoreKind &kind, std::span<const double> logits);

struct ScoredDataset {
  std::vector<double> scores;
  std::string source_tag;
  std::string method;
  std::string score;
};

/// Shape every row with `m`, compute logits, score. A DiceMask method leaves
/// the features alone and masks the classifier weights instead.
ScoredDataset score_dataset(const FeatureMatrix &data, const LinearClassifier &c,
                            const ShapingMethod &m, const ScoreKind &kind);

/// One pass over the data, several score kinds (logits computed once per row).
std::vector<ScoredDataset> score_dataset(const FeatureMatrix &data, const LinearClassifier &c,
                                         const ShapingMethod &m,
                                         std::span<const ScoreKind> kinds);

struct DiceResult {
  DiceMask method;
  LinearClassifier masked;
};

/// Per class, keeps the ceil((1 - p/100) * M) (at least 1) weights with the
/// largest contribution W[c,i] * id_mean_features[i]; equal contributions
/// prefer the lower feature index. Bias is unchanged.
DiceResult dice_mask(const LinearClassifier &c, std::span<const double> id_mean_features,
                     double p);

/// Classifier with weights outside `mask` set to zero.
LinearClassifier apply_mask(const LinearClassifier &c, const DiceMask &mask);

/// Column means of the feature matrix (the DICE input).
std::vector<double> feature_means(const FeatureMatrix &data);

} // namespace oodshape
