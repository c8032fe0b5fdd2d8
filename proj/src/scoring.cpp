#include "oodshape/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>

#include "oodshape/error.hpp"
#include "oodshape/parallel.hpp"

namespace oodshape {

namespace {

template <class... Ts> struct overloaded : Ts... {
  using Ts::operator()...;
};

constexpr std::size_t kRowBlock = 128;

void check_temperature(double t) {
  if (!(t > 0.0) || !std::isfinite(t))
    throw InvalidArgument("score temperature must be positive");
}

std::string with_temperature(const char *name, double t) {
  if (t == 1.0)
    return name;
  std::ostringstream os;
  os << name << "@T=" << t;
  return os.str();
}

// Counts of kept weights per class; guards against 0.3 * 10 = 3.0000000000000004.
std::size_t dice_keep_count(std::size_t m, double p) {
  const double raw = (1.0 - p / 100.0) * static_cast<double>(m);
  const auto keep = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::clamp<std::size_t>(keep, 1, m);
}

} // namespace

std::string score_name(const ScoreKind &kind) {
  return std::visit(overloaded{
                        [](const Msp &s) { return with_temperature("msp", s.temperature); },
                        [](const Mls &) { return std::string("mls"); },
                        [](const Energy &s) { return with_temperature("energy", s.temperature); },
                    },
                    kind);
}

std::vector<double> logits(const LinearClassifier &c, std::span<const double> z) {
  if (z.size() != c.feature_dim())
    throw LengthMismatch("feature length " + std::to_string(z.size()) +
                         " != classifier dim " + std::to_string(c.feature_dim()));
  std::vector<double> out(c.n_classes());
  const auto bias = c.bias().data();
  for (std::size_t j = 0; j < out.size(); ++j) {
    auto w = c.weight_row(j);
    double dot = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i)
      dot += w[i] * z[i];
    out[j] = dot + bias[j];
  }
  return out;
}

double score(const ScoreKind &kind, std::span<const double> l) {
  if (l.size() < 2)
    throw InvalidArgument("scores need at least two logits");
  const double top = *std::max_element(l.begin(), l.end());
  return std::visit(overloaded{
                        [&](const Msp &s) {
                          check_temperature(s.temperature);
                          double denom = 0.0;
                          for (double v : l)
                            denom += std::exp((v - top) / s.temperature);
                          return 1.0 / denom;
                        },
                        [&](const Mls &) { return top; },
                        [&](const Energy &s) {
                          check_temperature(s.temperature);
                          double sum = 0.0;
                          for (double v : l)
                            sum += std::exp((v - top) / s.temperature);
                          return top + s.temperature * std::log(sum);
                        },
                    },
                    kind);
}

std::vector<ScoredDataset> score_dataset(const FeatureMatrix &data, const LinearClassifier &c,
                                         const ShapingMethod &m,
                                         std::span<const ScoreKind> kinds) {
  if (data.feature_dim() != c.feature_dim())
    throw LengthMismatch(data.source_tag() + ": feature dim " +
                         std::to_string(data.feature_dim()) + " != classifier dim " +
                         std::to_string(c.feature_dim()));
  validate(m);

  const auto *dice = std::get_if<DiceMask>(&m);
  std::optional<LinearClassifier> masked;
  if (dice)
    masked = apply_mask(c, *dice);
  const LinearClassifier &classifier = masked ? *masked : c;
  const ShapingMethod feature_shaping = dice ? ShapingMethod{Identity{}} : m;

  const std::size_t n = data.n_samples();
  std::vector<ScoredDataset> out;
  for (const auto &kind : kinds)
    out.push_back({std::vector<double>(n), data.source_tag(), method_kind(m), score_name(kind)});

  parallel_blocks(n, kRowBlock, [&](std::size_t begin, std::size_t end) {
    std::vector<double> shaped(data.feature_dim());
    for (std::size_t r = begin; r < end; ++r) {
      apply_into(feature_shaping, data.row(r), shaped);
      const auto l = logits(classifier, shaped);
      for (std::size_t s = 0; s < kinds.size(); ++s)
        out[s].scores[r] = score(kinds[s], l);
    }
  });

  for (const auto &sd : out)
    for (std::size_t r = 0; r < n; ++r)
      if (!std::isfinite(sd.scores[r]))
        throw NonFiniteScore(data.source_tag() + ": non-finite " + sd.score + " score at row " +
                              std::to_string(r));
  return out;
}

ScoredDataset score_dataset(const FeatureMatrix &data, const LinearClassifier &c,
                            const ShapingMethod &m, const ScoreKind &kind) {
  return std::move(score_dataset(data, c, m, std::span<const ScoreKind>(&kind, 1)).front());
}

DiceResult dice_mask(const LinearClassifier &c, std::span<const double> id_mean_features,
                     double p) {
  if (!(p > 0.0 && p < 100.0))
    throw InvalidPercentile("DICE sparsity percentile must lie in (0, 100), got " +
                            std::to_string(p));
  const std::size_t m = c.feature_dim();
  if (id_mean_features.size() != m)
    throw LengthMismatch("mean feature length must equal classifier feature dim");

  const std::size_t keep = dice_keep_count(m, p);
  DiceMask mask{std::vector<std::uint8_t>(c.n_classes() * m, 0), c.n_classes(), m, p};
  std::vector<std::size_t> order(m);
  std::vector<double> contribution(m);
  for (std::size_t cls = 0; cls < c.n_classes(); ++cls) {
    auto w = c.weight_row(cls);
    for (std::size_t i = 0; i < m; ++i)
      contribution[i] = w[i] * id_mean_features[i];
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return contribution[a] > contribution[b];
    });
    for (std::size_t r = 0; r < keep; ++r)
      mask.mask[cls * m + order[r]] = 1;
  }
  auto masked = apply_mask(c, mask);
  return {std::move(mask), std::move(masked)};
}

LinearClassifier apply_mask(const LinearClassifier &c, const DiceMask &mask) {
  if (mask.n_classes != c.n_classes() || mask.feature_dim != c.feature_dim() ||
      mask.mask.size() != c.n_classes() * c.feature_dim())
    throw LengthMismatch("DICE mask shape does not match classifier");
  auto w = c.weights().data();
  std::vector<double> weights(w.begin(), w.end());
  for (std::size_t i = 0; i < weights.size(); ++i)
    if (!mask.mask[i])
      weights[i] = 0.0;
  auto b = c.bias().data();
  return LinearClassifier(c.n_classes(), c.feature_dim(), std::move(weights),
                          std::vector<double>(b.begin(), b.end()));
}

std::vector<double> feature_means(const FeatureMatrix &data) {
  std::vector<double> mean(data.feature_dim(), 0.0);
  for (std::size_t r = 0; r < data.n_samples(); ++r) {
    auto z = data.row(r);
    for (std::size_t i = 0; i < z.size(); ++i)
      mean[i] += z[i];
  }
  for (auto &v : mean)
    v /= static_cast<double>(data.n_samples());
  return mean;
}

} // namespace oodshape
