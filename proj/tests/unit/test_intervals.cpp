#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oodshape/error.hpp"
#include "oodshape/intervals.hpp"
#include "oodshape/parallel.hpp"
#include "oodshape/stats.hpp"
#include "testing.hpp"

using namespace oodshape;
using namespace oodshape::testing;

namespace {

// Full sort, then interpolate: independent of the nth_element path.
double sorted_percentile(std::vector<double> v, double pct) {
  std::sort(v.begin(), v.end());
  const double rank = pct / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(rank);
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (v[hi] - v[lo]) * (rank - static_cast<double>(lo));
}

std::vector<double> naive_mean_isfi(const FeatureMatrix &data, const LinearClassifier &c,
                                    const IntervalPartition &p) {
  std::vector<double> sum(p.k(), 0.0);
  for (std::size_t r = 0; r < data.n_samples(); ++r) {
    auto z = data.row(r);
    std::size_t best = 0;
    double best_dot = -INFINITY;
    for (std::size_t j = 0; j < c.n_classes(); ++j) {
      double dot = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i)
        dot += c.weight_row(j)[i] * z[i];
      if (dot > best_dot) {
        best_dot = dot;
        best = j;
      }
    }
    for (std::size_t i = 0; i < z.size(); ++i)
      for (std::size_t k = 0; k < p.k(); ++k) {
        const double lo = p.alpha() + static_cast<double>(k) * p.delta();
        const double hi = k + 1 == p.k() ? p.beta() : p.alpha() + static_cast<double>(k + 1) * p.delta();
        if (lo <= z[i] && z[i] < hi)
          sum[k] += c.weight_row(best)[i] * z[i];
      }
  }
  for (auto &s : sum)
    s /= static_cast<double>(data.n_samples());
  return sum;
}

} // namespace

TEST_CASE("percentile agrees with a full-sort oracle") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 37;
    auto v = uniform_vector(rng, n, -5.0, 5.0);
    if (trial % 3 == 0)
      for (auto &x : v)
        x = std::round(x); // ties
    for (double pct : {0.0, 0.1, 12.5, 50.0, 60.0, 99.9, 100.0})
      CHECK(percentile(v, pct) == doctest::Approx(sorted_percentile(v, pct)).epsilon(1e-15));
  }
  CHECK(percentile(std::vector<double>{1, 2, 3, 4}, 50.0) == 2.5);
  CHECK_THROWS_AS(percentile(std::vector<double>{}, 50.0), EmptyInput);
}

TEST_CASE("fit_partition") {
  SUBCASE("0..99 with the full range") {
    std::vector<double> values(100);
    std::iota(values.begin(), values.end(), 0.0);
    const FeatureMatrix fm("seq", 10, 10, values);
    const auto p = fit_partition(fm, 10, 0.0, 100.0);
    CHECK(p.alpha() == 0.0);
    CHECK(p.beta() == 99.0);
    CHECK(p.delta() == doctest::Approx(9.9).epsilon(1e-15));
    CHECK(p.k() == 10);
  }
  SUBCASE("constant features are degenerate") {
    const FeatureMatrix fm("const", 4, 3, std::vector<double>(12, 3.0));
    CHECK_THROWS_AS(fit_partition(fm), DegeneratePartition);
  }
  SUBCASE("bad percentile bounds") {
    const FeatureMatrix fm("x", 1, 2, {0.0, 1.0});
    CHECK_THROWS_AS(fit_partition(fm, 10, 5.0, 5.0), InvalidArgument);
    CHECK_THROWS_AS(fit_partition(fm, 10, -1.0, 50.0), InvalidArgument);
    CHECK_THROWS_AS(fit_partition(fm, 0, 0.0, 100.0), InvalidArgument);
  }
  SUBCASE("widening the percentiles never shrinks the range") {
    std::mt19937_64 rng(11);
    const auto fm = random_features(rng, 40, 30, -1.0, 3.0);
    const std::vector<std::pair<double, double>> nested = {
        {10, 90}, {5, 95}, {1, 99}, {0.1, 99.9}, {0, 100}};
    double prev_alpha = INFINITY, prev_beta = -INFINITY;
    for (auto [lo, hi] : nested) {
      const auto p = fit_partition(fm, 7, lo, hi);
      CHECK(p.alpha() <= prev_alpha);
      CHECK(p.beta() >= prev_beta);
      prev_alpha = p.alpha();
      prev_beta = p.beta();
    }
  }
}

TEST_CASE("bin_index uses half-open bins") {
  const IntervalPartition p(0.0, 10.0, 10);
  CHECK(p.bin_index(0.0) == std::optional<std::size_t>(0));
  CHECK_FALSE(p.bin_index(10.0).has_value());
  CHECK(p.bin_index(9.999) == std::optional<std::size_t>(9));
  CHECK_FALSE(p.bin_index(-1e-12).has_value());
  CHECK(p.bin_index(3.0) == std::optional<std::size_t>(3));

  SUBCASE("every bin holds exactly the values between its edges") {
    const IntervalPartition q(-0.37, 2.91, 13);
    std::mt19937_64 rng(5);
    for (double z : uniform_vector(rng, 5000, -1.0, 3.5)) {
      const auto bin = q.bin_index(z);
      if (z < q.alpha() || z >= q.beta()) {
        CHECK_FALSE(bin.has_value());
      } else {
        REQUIRE(bin.has_value());
        CHECK(q.lower(*bin) <= z);
        CHECK(z < q.upper(*bin));
      }
    }
    for (std::size_t k = 0; k < q.k(); ++k)
      CHECK(q.bin_index(q.lower(k)) == std::optional<std::size_t>(k));
  }
}

TEST_CASE("isfi_vector") {
  const IntervalPartition p(0.0, 4.0, 2);
  CHECK(isfi_vector(std::vector<double>{1.0, 2.5}, std::vector<double>{0.5, -1.0}, p) ==
        std::vector<double>{0.5, -2.5});
  CHECK(isfi_vector(std::vector<double>{-1.0, 4.0, 7.0}, std::vector<double>{1, 2, 3}, p) ==
        std::vector<double>{0.0, 0.0});
  CHECK(isfi_vector(std::vector<double>{1.0, 3.0}, std::vector<double>{0.0, 0.0}, p) ==
        std::vector<double>{0.0, 0.0});
  CHECK_THROWS_AS(isfi_vector(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}, p),
                  LengthMismatch);
}

TEST_CASE("ISFI completeness and disjointness") {
  std::mt19937_64 rng(21);
  const IntervalPartition p(-1.0, 3.0, 17);
  for (int trial = 0; trial < 100; ++trial) {
    const auto z = uniform_vector(rng, 64, -1.0, 2.999);
    const auto w = uniform_vector(rng, 64, -1.0, 1.0);
    const auto v = isfi_vector(z, w, p);
    double logit = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i)
      logit += w[i] * z[i];
    const double total = std::accumulate(v.begin(), v.end(), 0.0);
    CHECK(std::abs(total - logit) <= 1e-9 * std::max(1.0, std::abs(logit)));

    // Nudge one feature inside its bin: only that bin moves.
    auto z2 = z;
    const auto bin = *p.bin_index(z[0]);
    const double room = std::min(z[0] - p.lower(bin), p.upper(bin) - z[0]);
    z2[0] += 0.5 * room;
    const auto v2 = isfi_vector(z2, w, p);
    for (std::size_t k = 0; k < p.k(); ++k)
      if (k != bin)
        CHECK(v2[k] == v[k]);
  }
}

TEST_CASE("argmax_weight_row ignores bias and breaks ties low") {
  const LinearClassifier eye(2, 2, {1, 0, 0, 1}, {0, 100});
  auto r = argmax_weight_row(eye, std::vector<double>{2, 1});
  CHECK(r.class_index == 0);
  CHECK(r.weights[0] == 1);
  CHECK(r.weights[1] == 0);
  const LinearClassifier tie(2, 2, {1, 0, 1, 0}, {0, 0});
  CHECK(argmax_weight_row(tie, std::vector<double>{1, 1}).class_index == 0);
  const LinearClassifier neg(2, 1, {-1, -2}, {0, 0});
  CHECK(argmax_weight_row(neg, std::vector<double>{1}).class_index == 0);
  CHECK_THROWS_AS(argmax_weight_row(neg, std::vector<double>{1, 2}), LengthMismatch);
}

TEST_CASE("mean_isfi") {
  SUBCASE("single sample equals its own ISFI vector") {
    const LinearClassifier c(2, 3, {1, 1, 1, 0, 0, 0}, {0, 0});
    const FeatureMatrix one("one", 1, 3, {0.5, 1.5, 2.5});
    const IntervalPartition p(0.0, 3.0, 3);
    CHECK(mean_isfi(one, c, p).mean == isfi_vector(one.row(0), c.weight_row(0), p));
  }
  SUBCASE("two samples average") {
    // Rows land in opposite bins with weight 1.
    const LinearClassifier c(2, 1, {1, 0}, {0, 0});
    const FeatureMatrix two("two", 2, 1, {1.0, 3.0});
    const IntervalPartition p(0.0, 4.0, 2);
    const auto stats = mean_isfi(two, c, p);
    CHECK(stats.mean == std::vector<double>{0.5, 1.5});
    CHECK(stats.n_samples == 2);
  }
  SUBCASE("matches a naive loop on random data") {
    std::mt19937_64 rng(99);
    const auto data = random_features(rng, 50, 40, -0.5, 2.0);
    const auto c = random_classifier(rng, 5, 40);
    const auto p = fit_partition(data, 9, 1.0, 99.0);
    const auto fast = mean_isfi(data, c, p).mean;
    const auto slow = naive_mean_isfi(data, c, p);
    for (std::size_t k = 0; k < p.k(); ++k)
      CHECK(std::abs(fast[k] - slow[k]) <= 1e-12);
  }
  SUBCASE("bit-identical across thread counts") {
    std::mt19937_64 rng(4);
    const auto data = random_features(rng, 1500, 16);
    const auto c = random_classifier(rng, 4, 16);
    const auto p = fit_partition(data, 20);
    setenv("OODSHAPE_THREADS", "1", 1);
    const auto serial = mean_isfi(data, c, p).mean;
    setenv("OODSHAPE_THREADS", "7", 1);
    const auto parallel = mean_isfi(data, c, p).mean;
    unsetenv("OODSHAPE_THREADS");
    CHECK(serial == parallel);
  }
  SUBCASE("dimension mismatch") {
    const LinearClassifier c(2, 2, {1, 0, 0, 1}, {0, 0});
    const FeatureMatrix fm("x", 1, 3, {1, 2, 3});
    CHECK_THROWS_AS(mean_isfi(fm, c, IntervalPartition(0, 1, 1)), LengthMismatch);
  }
}
