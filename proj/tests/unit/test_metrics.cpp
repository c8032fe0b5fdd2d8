#include <doctest.h>

#include <cmath>
#include <random>

#include "oodshape/error.hpp"
#include "oodshape/metrics.hpp"
#include "testing.hpp"

using namespace oodshape;
using namespace oodshape::testing;

namespace {

double pairwise_auroc(const std::vector<double> &id, const std::vector<double> &ood) {
  double wins = 0.0;
  for (double a : id)
    for (double b : ood)
      wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  return wins / (static_cast<double>(id.size()) * static_cast<double>(ood.size()));
}

// Sweeps every candidate threshold and keeps the largest one that still
// retains at least 95% of the ID scores.
double sweep_fpr95(const std::vector<double> &id, const std::vector<double> &ood) {
  std::vector<double> candidates = id;
  std::sort(candidates.begin(), candidates.end());
  double best = -INFINITY;
  for (double t : candidates) {
    std::size_t kept = 0;
    for (double s : id)
      kept += s >= t;
    if (100 * kept >= 95 * id.size())
      best = std::max(best, t);
  }
  std::size_t fp = 0;
  for (double s : ood)
    fp += s >= best;
  return static_cast<double>(fp) / static_cast<double>(ood.size());
}

std::vector<double> tied_scores(std::mt19937_64 &rng, std::size_t n) {
  std::uniform_int_distribution<int> level(0, 30);
  std::vector<double> v(n);
  for (auto &x : v)
    x = 0.25 * level(rng);
  return v;
}

std::vector<double> iota_scores(int from, int to) {
  std::vector<double> v;
  for (int i = from; i <= to; ++i)
    v.push_back(i);
  return v;
}

} // namespace

TEST_CASE("auroc worked examples") {
  CHECK(auroc(std::vector<double>{2, 3}, std::vector<double>{0, 1}) == 1.0);
  CHECK(auroc(std::vector<double>{0, 1}, std::vector<double>{2, 3}) == 0.0);
  CHECK(auroc(std::vector<double>{1, 1}, std::vector<double>{1, 1}) == 0.5);
  CHECK(auroc(std::vector<double>{1, 3}, std::vector<double>{2}) == 0.5);
  CHECK_THROWS_AS(auroc(std::vector<double>{}, std::vector<double>{1}), EmptyInput);
}

TEST_CASE("auroc equals the pairwise definition with ties") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> size(1, 200);
  for (int trial = 0; trial < 100; ++trial) {
    const auto id = tied_scores(rng, size(rng));
    const auto ood = tied_scores(rng, size(rng));
    CHECK(auroc(id, ood) == pairwise_auroc(id, ood));
    CHECK(auroc(id, ood) + auroc(ood, id) == 1.0);
  }
}

TEST_CASE("fpr_at_tpr worked examples") {
  const auto id = iota_scores(1, 100);
  CHECK(fpr_at_tpr(id, std::vector<double>(50, 0.0)) == 0.0);
  CHECK(fpr_at_tpr(id, std::vector<double>(50, 200.0)) == 1.0);
  // The threshold is 6: 95 of 100 ID scores are >= 6.
  CHECK(fpr_at_tpr(id, std::vector<double>{5.0, 6.0}) == 0.5);
  CHECK(fpr_at_tpr(id, std::vector<double>{0.5, 1.0, 2.0}, 1.0) == 2.0 / 3.0);
  CHECK_THROWS_AS(fpr_at_tpr(id, std::vector<double>{1.0}, 0.0), InvalidArgument);
  CHECK_THROWS_AS(fpr_at_tpr(id, std::vector<double>{}), EmptyInput);
}

TEST_CASE("fpr_at_tpr equals a threshold sweep") {
  std::mt19937_64 rng(22);
  std::uniform_int_distribution<std::size_t> size(1, 300);
  for (int trial = 0; trial < 100; ++trial) {
    const auto id = trial % 2 ? tied_scores(rng, size(rng)) : uniform_vector(rng, size(rng), -1, 1);
    const auto ood = uniform_vector(rng, size(rng), -1.5, 8.0);
    CHECK(fpr_at_tpr(id, ood) == sweep_fpr95(id, ood));
  }
}

TEST_CASE("metrics are invariant under strictly increasing transforms") {
  std::mt19937_64 rng(23);
  const auto id = uniform_vector(rng, 150, 0.0, 3.0);
  const auto ood = uniform_vector(rng, 90, -1.0, 2.0);
  auto transform = [](std::vector<double> v) {
    for (auto &x : v)
      x = std::exp(2.0 * x) + 5.0;
    return v;
  };
  CHECK(auroc(transform(id), transform(ood)) == auroc(id, ood));
  CHECK(fpr_at_tpr(transform(id), transform(ood)) == fpr_at_tpr(id, ood));
  const auto r = evaluate(id, ood);
  CHECK(r.n_id == 150);
  CHECK(r.n_ood == 90);
  CHECK(r.auroc == auroc(id, ood));
}

TEST_CASE("expectation diagnostics") {
  const IntervalPartition p(0.0, 1.0, 3);
  const IsfiStats a{{1.0, 2.0, 2.0}, 10, p};
  const IsfiStats half{{0.5, 1.0, 1.0}, 10, p};
  const auto d = expectation_diagnostics(a, half);
  CHECK(d.cosine == 1.0);
  CHECK(d.norm_ratio == 0.5);

  const IsfiStats orth{{0.0, 1.0, -1.0}, 10, p};
  CHECK(expectation_diagnostics(a, orth).cosine == 0.0);
  const IsfiStats zero{{0.0, 0.0, 0.0}, 10, p};
  CHECK_THROWS_AS(expectation_diagnostics(a, zero), ZeroExpectation);
  const IsfiStats other{{1.0, 1.0, 1.0}, 10, IntervalPartition(0.0, 2.0, 3)};
  CHECK_THROWS_AS(expectation_diagnostics(a, other), InvalidArgument);
}

TEST_CASE("weight_value_profile matches a direct tally") {
  std::mt19937_64 rng(24);
  const auto data = random_features(rng, 150, 12);
  const auto c = random_classifier(rng, 3, 12);
  const auto p = fit_partition(data, 5);
  const auto prof = weight_value_profile(data, c, p);
  std::vector<std::vector<double>> values(p.k());
  for (std::size_t r = 0; r < data.n_samples(); ++r) {
    const auto z = data.row(r);
    const auto w = argmax_weight_row(c, z).weights;
    for (std::size_t i = 0; i < z.size(); ++i)
      for (std::size_t b = 0; b < p.k(); ++b)
        if (p.lower(b) <= z[i] && z[i] < p.upper(b))
          values[b].push_back(w[i]);
  }
  for (std::size_t b = 0; b < p.k(); ++b) {
    REQUIRE(prof.count[b] == values[b].size());
    double mean = 0.0;
    for (double v : values[b])
      mean += v;
    mean /= static_cast<double>(values[b].size());
    double var = 0.0;
    for (double v : values[b])
      var += (v - mean) * (v - mean);
    var /= static_cast<double>(values[b].size());
    CHECK(prof.mean[b] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(prof.std[b] == doctest::Approx(std::sqrt(var)).epsilon(1e-10));
  }
}
