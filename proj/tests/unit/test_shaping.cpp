#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oodshape/error.hpp"
#include "oodshape/shaping.hpp"
#include "testing.hpp"

using namespace oodshape;
using namespace oodshape::testing;

namespace {

std::vector<double> shape(const ShapingMethod &m, std::vector<double> z) { return oodshape::apply(m, z); }

} // namespace

TEST_CASE("element-wise methods on the worked examples") {
  CHECK(shape(ReAct{1.0}, {0.5, 2.0}) == std::vector<double>{0.5, 1.0});
  CHECK(shape(VraP{0.5, 1.0}, {0.3, 0.7, 2.0}) == std::vector<double>{0.0, 0.7, 1.0});
  const PiecewiseConstant pc{{2.0, -1.0}, IntervalPartition(0.0, 4.0, 2), OutOfRange::Zero};
  CHECK(shape(pc, {1.0, 3.0, 5.0}) == std::vector<double>{2.0, -3.0, 0.0});
  auto keep = pc;
  keep.out_of_range = OutOfRange::Keep;
  CHECK(shape(keep, {1.0, 3.0, 5.0, -2.0}) == std::vector<double>{2.0, -3.0, 5.0, -2.0});
  CHECK(shape(Identity{}, {1.5, -2.0}) == std::vector<double>{1.5, -2.0});
  CHECK(shape(BFAct{1.0, 2}, {1.0})[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("BFAct stays finite for huge activations") {
  const auto out = shape(BFAct{0.5, 4}, {1e6, -1e6, 1e300});
  for (double v : out)
    CHECK(std::isfinite(v));
  CHECK(out[0] == doctest::Approx(6.25e-20).epsilon(1e-12));
  CHECK(out[1] == -out[0]);
  CHECK(theta_at(BFAct{0.5, 4}, 1e300) == 0.0);
}

TEST_CASE("ASH variants") {
  SUBCASE("ASH-B at the median") {
    // tau = 2.5 under linear interpolation; keeps {3, 4}; sum 10 shared by 2.
    CHECK(shape(AshB{50.0}, {1, 2, 3, 4}) == std::vector<double>{0, 0, 5, 5});
  }
  SUBCASE("ASH-P and ASH-S") {
    CHECK(shape(AshP{50.0}, {1, 2, 3, 4}) == std::vector<double>{0, 0, 3, 4});
    const auto s = shape(AshS{50.0}, {1, 2, 3, 4});
    const double scale = std::exp(10.0 / 7.0);
    CHECK(s[0] == 0.0);
    CHECK(s[2] == doctest::Approx(3.0 * scale));
    CHECK(s[3] == doctest::Approx(4.0 * scale));
  }
  SUBCASE("ASH-S with a zero kept sum") {
    CHECK_THROWS_AS(shape(AshS{50.0}, {-1, 0, 0, 0}), EmptyKeepSet);
  }
  SUBCASE("naive-loop oracle for ASH-B on random vectors") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
      auto z = uniform_vector(rng, 33, 0.0, 3.0);
      std::vector<double> sorted = z;
      std::sort(sorted.begin(), sorted.end());
      const double rank = 0.65 * 32.0;
      const auto lo = static_cast<std::size_t>(rank);
      const double tau = sorted[lo] + (sorted[lo + 1] - sorted[lo]) * (rank - lo);
      double total = 0.0;
      std::size_t kept = 0;
      for (double v : z) {
        total += v;
        kept += v >= tau;
      }
      const auto out = shape(AshB{65.0}, z);
      for (std::size_t i = 0; i < z.size(); ++i)
        CHECK(out[i] == doctest::Approx(z[i] >= tau ? total / kept : 0.0).epsilon(1e-14));
    }
  }
}

TEST_CASE("DICE is rejected as a feature shaper") {
  const DiceMask d{std::vector<std::uint8_t>(4, 1), 2, 2, 70.0};
  CHECK_THROWS_AS(shape(d, {1, 2}), InvalidMethod);
}

TEST_CASE("descriptor validation") {
  CHECK_THROWS_AS(validate(ReAct{0.0}), InvalidArgument);
  CHECK_THROWS_AS(validate(BFAct{1.0, 0}), InvalidArgument);
  CHECK_THROWS_AS(validate(VraP{2.0, 1.0}), InvalidArgument);
  CHECK_THROWS_AS(validate(AshP{100.0}), InvalidArgument);
  CHECK_THROWS_AS(
      validate(PiecewiseConstant{{1.0}, IntervalPartition(0, 1, 2), OutOfRange::Zero}),
      InvalidArgument);
}

TEST_CASE("theta_curve") {
  const IntervalPartition p(0.0, 4.0, 2); // midpoints 1 and 3
  CHECK(theta_curve(ReAct{1.0}, p) == std::vector<double>{1.0, 1.0 / 3.0});
  CHECK(theta_at(ReAct{1.0}, 2.0) == 0.5);
  CHECK(theta_at(BFAct{1.0, 2}, 1.0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(theta_curve(Identity{}, IntervalPartition(0, 1, 5)) == std::vector<double>(5, 1.0));
  const PiecewiseConstant pc{{0.3, 0.7}, p, OutOfRange::Zero};
  CHECK(theta_curve(pc, p) == pc.theta);
  CHECK_THROWS_AS(theta_curve(AshP{60.0}, p), NotElementwise);

  SUBCASE("ReAct decays as t/z above the threshold") {
    const IntervalPartition q(0.0, 10.0, 10);
    const auto theta = theta_curve(ReAct{2.0}, q);
    for (std::size_t k = 0; k < q.k(); ++k)
      if (q.midpoint(k) > 2.0)
        CHECK(theta[k] == doctest::Approx(2.0 / q.midpoint(k)));
  }
}

TEST_CASE("element-wise consistency: f(z) == theta(z) * z") {
  std::mt19937_64 rng(17);
  const std::vector<ShapingMethod> methods = {ReAct{1.1}, BFAct{0.9, 2}, BFAct{1.3, 3},
                                              VraP{0.5, 1.0}};
  for (const auto &m : methods)
    for (double z : uniform_vector(rng, 2000, -3.0, 6.0)) {
      if (z == 0.0)
        continue;
      const double direct = oodshape::apply(m, std::vector<double>{z})[0];
      const double via_theta = theta_at(m, z) * z;
      CHECK(rel_diff(direct, via_theta) <= 1e-12);
    }
}

TEST_CASE("shaping properties") {
  std::mt19937_64 rng(23);
  SUBCASE("unit theta with keep reproduces the input") {
    const IntervalPartition p(0.2, 1.7, 11);
    const PiecewiseConstant ones{std::vector<double>(11, 1.0), p, OutOfRange::Keep};
    for (int t = 0; t < 20; ++t) {
      const auto z = uniform_vector(rng, 50, -1.0, 3.0);
      CHECK(oodshape::apply(ones, z) == z);
    }
  }
  SUBCASE("ASH-B preserves the pre-pruning sum") {
    for (int t = 0; t < 200; ++t) {
      const auto z = uniform_vector(rng, 1 + t % 64, 0.0, 4.0);
      const auto out = oodshape::apply(AshB{65.0}, z);
      const double before = std::accumulate(z.begin(), z.end(), 0.0);
      const double after = std::accumulate(out.begin(), out.end(), 0.0);
      CHECK(rel_diff(before, after) <= 1e-9);
    }
  }
  SUBCASE("ASH-P is idempotent when pruned entries were strictly below tau") {
    for (int t = 0; t < 100; ++t) {
      const auto z = uniform_vector(rng, 40, 0.5, 4.0);
      const auto once = oodshape::apply(AshP{60.0}, z);
      // The second pass recomputes tau over zeros in place of the pruned
      // entries; it lands between 0 and the smallest kept value.
      const auto twice = oodshape::apply(AshP{60.0}, once);
      CHECK(twice == once);
    }
  }
  SUBCASE("raising the ASH percentile never keeps more entries") {
    for (int t = 0; t < 100; ++t) {
      const auto z = uniform_vector(rng, 57, 0.0, 2.0);
      std::size_t prev = z.size() + 1;
      for (double p : {10.0, 30.0, 50.0, 65.0, 80.0, 95.0}) {
        const auto out = oodshape::apply(AshP{p}, z);
        const auto kept = static_cast<std::size_t>(
            std::count_if(out.begin(), out.end(), [](double v) { return v != 0.0; }));
        CHECK(kept <= prev);
        prev = kept;
      }
    }
  }
  SUBCASE("ReAct and VRA-P are monotone") {
    for (int t = 0; t < 200; ++t) {
      const auto z = uniform_vector(rng, 30, -1.0, 3.0);
      auto bigger = z;
      for (auto &v : bigger)
        v += std::uniform_real_distribution<double>(0.0, 0.5)(rng);
      for (const ShapingMethod &m : {ShapingMethod{ReAct{1.0}}, ShapingMethod{VraP{0.5, 1.0}}}) {
        const auto a = oodshape::apply(m, z), b = oodshape::apply(m, bigger);
        for (std::size_t i = 0; i < z.size(); ++i)
          CHECK(a[i] <= b[i]);
      }
    }
  }
}

TEST_CASE("empirical_theta_curve") {
  std::mt19937_64 rng(31);
  const auto data = random_features(rng, 200, 32, 0.0, 4.0);
  const IntervalPartition p(0.0, 4.0, 8);

  SUBCASE("identity has unit ratio") {
    const auto s = empirical_theta_curve(Identity{}, data, p);
    for (std::size_t k = 0; k < p.k(); ++k) {
      REQUIRE(s.count[k] > 0);
      CHECK(s.mean[k] == 1.0);
      CHECK(s.std[k] == 0.0);
    }
  }
  SUBCASE("ReAct stays within the analytic range over each bin") {
    const ReAct react{1.3};
    const auto s = empirical_theta_curve(react, data, p);
    for (std::size_t k = 0; k < p.k(); ++k) {
      // theta_ReAct is non-increasing in z > 0, so its range over the bin is
      // [theta(upper), theta(lower)].
      const double hi = theta_at(react, std::max(p.lower(k), 1e-12));
      const double lo = theta_at(react, p.upper(k));
      CHECK(s.mean[k] <= hi + 1e-12);
      CHECK(s.mean[k] >= lo - 1e-12);
      CHECK(std::abs(s.mean[k] - theta_at(react, p.midpoint(k))) <= hi - lo + 1e-12);
    }
  }
  SUBCASE("empty bins report a missing mean") {
    const FeatureMatrix low("low", 2, 2, {0.1, 0.2, 0.3, 0.4});
    const auto s = empirical_theta_curve(Identity{}, low, p);
    CHECK(s.count[0] == 4);
    CHECK(s.count[7] == 0);
    CHECK(std::isnan(s.mean[7]));
  }
  SUBCASE("zero features are skipped") {
    const FeatureMatrix zeros("z", 1, 3, {0.0, 0.0, 1.0});
    const auto s = empirical_theta_curve(ReAct{0.5}, zeros, p);
    CHECK(s.count[0] == 0);
    CHECK(s.count[2] == 1);
    CHECK(s.mean[2] == 0.5);
  }
  SUBCASE("ASH works through the empirical route") {
    const auto s = empirical_theta_curve(AshP{60.0}, data, p);
    for (std::size_t k = 0; k < p.k(); ++k)
      if (s.count[k] > 0)
        CHECK((s.mean[k] >= 0.0 && s.mean[k] <= 1.0));
  }
}
