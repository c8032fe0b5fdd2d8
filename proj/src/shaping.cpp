#include "oodshape/shaping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <type_traits>

#include "oodshape/error.hpp"

namespace oodshape {

namespace {

template <class... Ts> struct overloaded : Ts... {
  using Ts::operator()...;
};

// Exponent of |z/t|^(2n) in log space; -inf at z == 0.
double bfact_log_power(double z, double t, int n) {
  return 2.0 * static_cast<double>(n) * std::log(std::abs(z / t));
}

// Beyond this log-power 1/sqrt(1+e^x) equals e^(-x/2) to full precision and
// e^x would eventually overflow.
constexpr double kBfactAsymptote = 80.0;

double bfact_theta(double z, double t, int n) {
  if (z == 0.0)
    return 1.0;
  const double x = bfact_log_power(z, t, n);
  if (x > kBfactAsymptote)
    return std::exp(-0.5 * x);
  return 1.0 / std::sqrt(1.0 + std::exp(x));
}

double bfact_direct(double z, double t, int n) {
  if (z == 0.0)
    return 0.0;
  const double x = bfact_log_power(z, t, n);
  if (x > kBfactAsymptote)
    return z * std::exp(-0.5 * x);
  return z / std::sqrt(1.0 + std::exp(x));
}

void check_percentile(double p, const char *who) {
  if (!(p > 0.0 && p < 100.0))
    throw InvalidArgument(std::string(who) + " percentile must lie in (0, 100)");
}

// Shared ASH pruning step: returns tau and fills kept flags.
struct AshPrune {
  double tau;
  double total;      // sum of all entries before pruning
  double kept_sum;   // sum of kept entries
  std::size_t kept;  // number of kept entries
};

AshPrune ash_prune(std::span<const double> z, double p) {
  AshPrune r{percentile(z, p), 0.0, 0.0, 0};
  for (double v : z) {
    r.total += v;
    if (v >= r.tau) {
      r.kept_sum += v;
      ++r.kept;
    }
  }
  return r;
}

} // namespace

std::string method_kind(const ShapingMethod &m) {
  return std::visit(overloaded{
                        [](const Identity &) { return std::string("identity"); },
                        [](const PiecewiseConstant &) { return std::string("piecewise"); },
                        [](const ReAct &) { return std::string("react"); },
                        [](const BFAct &) { return std::string("bfact"); },
                        [](const VraP &) { return std::string("vra-p"); },
                        [](const AshP &) { return std::string("ash-p"); },
                        [](const AshB &) { return std::string("ash-b"); },
                        [](const AshS &) { return std::string("ash-s"); },
                        [](const DiceMask &) { return std::string("dice"); },
                    },
                    m);
}

void validate(const ShapingMethod &m) {
  std::visit(overloaded{
                 [](const Identity &) {},
                 [](const PiecewiseConstant &pc) {
                   if (pc.theta.size() != pc.partition.k())
                     throw InvalidArgument("theta length " + std::to_string(pc.theta.size()) +
                                           " != partition k " +
                                           std::to_string(pc.partition.k()));
                   for (double v : pc.theta)
                     if (!std::isfinite(v))
                       throw InvalidArgument("theta entries must be finite");
                 },
                 [](const ReAct &r) {
                   if (!(r.t > 0.0) || !std::isfinite(r.t))
                     throw InvalidArgument("ReAct threshold must be positive");
                 },
                 [](const BFAct &b) {
                   if (!(b.t > 0.0) || !std::isfinite(b.t))
                     throw InvalidArgument("BFAct threshold must be positive");
                   if (b.n < 1)
                     throw InvalidArgument("BFAct order must be >= 1");
                 },
                 [](const VraP &v) {
                   if (!(v.low <= v.high) || !std::isfinite(v.low) || !std::isfinite(v.high))
                     throw InvalidArgument("VRA-P needs finite low <= high");
                 },
                 [](const AshP &a) { check_percentile(a.p, "ASH-P"); },
                 [](const AshB &a) { check_percentile(a.p, "ASH-B"); },
                 [](const AshS &a) { check_percentile(a.p, "ASH-S"); },
                 [](const DiceMask &d) {
                   check_percentile(d.p, "DICE");
                   if (d.mask.size() != d.n_classes * d.feature_dim)
                     throw InvalidArgument("DICE mask size mismatch");
                 },
             },
             m);
}

bool is_elementwise(const ShapingMethod &m) {
  return std::holds_alternative<Identity>(m) || std::holds_alternative<PiecewiseConstant>(m) ||
         std::holds_alternative<ReAct>(m) || std::holds_alternative<BFAct>(m) ||
         std::holds_alternative<VraP>(m);
}

void apply_into(const ShapingMethod &m, std::span<const double> z, std::span<double> out) {
  if (out.size() != z.size())
    throw LengthMismatch("output length must equal input length");
  validate(m);
  const std::size_t n = z.size();
  std::visit(
      overloaded{
          [&](const Identity &) {
            if (out.data() != z.data())
              std::copy(z.begin(), z.end(), out.begin());
          },
          [&](const PiecewiseConstant &pc) {
            for (std::size_t i = 0; i < n; ++i) {
              const double v = z[i];
              if (auto bin = pc.partition.bin_index(v))
                out[i] = pc.theta[*bin] * v;
              else
                out[i] = pc.out_of_range == OutOfRange::Keep ? v : 0.0;
            }
          },
          [&](const ReAct &r) {
            for (std::size_t i = 0; i < n; ++i)
              out[i] = std::min(z[i], r.t);
          },
          [&](const BFAct &b) {
            for (std::size_t i = 0; i < n; ++i)
              out[i] = bfact_direct(z[i], b.t, b.n);
          },
          [&](const VraP &v) {
            for (std::size_t i = 0; i < n; ++i) {
              const double x = z[i];
              out[i] = x < v.low ? 0.0 : (x < v.high ? x : v.high);
            }
          },
          [&](const AshP &a) {
            const auto pr = ash_prune(z, a.p);
            for (std::size_t i = 0; i < n; ++i)
              out[i] = z[i] >= pr.tau ? z[i] : 0.0;
          },
          [&](const AshB &a) {
            const auto pr = ash_prune(z, a.p);
            if (pr.kept == 0)
              throw EmptyKeepSet("ASH-B pruned every entry");
            const double fill = pr.total / static_cast<double>(pr.kept);
            for (std::size_t i = 0; i < n; ++i)
              out[i] = z[i] >= pr.tau ? fill : 0.0;
          },
          [&](const AshS &a) {
            const auto pr = ash_prune(z, a.p);
            if (pr.kept == 0 || pr.kept_sum == 0.0)
              throw EmptyKeepSet("ASH-S kept entries sum to zero");
            const double scale = std::exp(pr.total / pr.kept_sum);
            for (std::size_t i = 0; i < n; ++i)
              out[i] = z[i] >= pr.tau ? z[i] * scale : 0.0;
          },
          [&](const DiceMask &) {
            throw InvalidMethod("DICE shapes classifier weights, not features");
          },
      },
      m);
}

std::vector<double> apply(const ShapingMethod &m, std::span<const double> z) {
  std::vector<double> out(z.size());
  apply_into(m, z, out);
  return out;
}

double theta_at(const ShapingMethod &m, double z) {
  return std::visit(
      overloaded{
          [](const Identity &) { return 1.0; },
          [z](const PiecewiseConstant &pc) {
            if (auto bin = pc.partition.bin_index(z))
              return pc.theta[*bin];
            return pc.out_of_range == OutOfRange::Keep ? 1.0 : 0.0;
          },
          [z](const ReAct &r) { return z == 0.0 ? 1.0 : std::min(z, r.t) / z; },
          [z](const BFAct &b) { return bfact_theta(z, b.t, b.n); },
          [z](const VraP &v) {
            if (z < v.low)
              return 0.0;
            if (z < v.high)
              return 1.0;
            return z == 0.0 ? 1.0 : v.high / z;
          },
          [](const auto &) -> double {
            throw NotElementwise("theta(z) is defined only for element-wise methods");
          },
      },
      m);
}

std::vector<double> theta_curve(const ShapingMethod &m, const IntervalPartition &p) {
  if (!is_elementwise(m))
    throw NotElementwise(method_kind(m) + " is not an element-wise shaping method");
  validate(m);
  if (auto pc = std::get_if<PiecewiseConstant>(&m)) {
    if (!(pc->partition == p))
      throw InvalidArgument("piecewise theta was fit on a different partition");
    return pc->theta;
  }
  std::vector<double> out(p.k());
  for (std::size_t k = 0; k < p.k(); ++k)
    out[k] = theta_at(m, p.midpoint(k));
  return out;
}

void accumulate_theta_ratios(const ShapingMethod &m, const FeatureMatrix &data,
                             const IntervalPartition &p, BinAccumulator &acc) {
  std::vector<double> shaped(data.feature_dim());
  for (std::size_t r = 0; r < data.n_samples(); ++r) {
    auto z = data.row(r);
    apply_into(m, z, shaped);
    for (std::size_t i = 0; i < z.size(); ++i) {
      if (z[i] == 0.0)
        continue;
      if (auto bin = p.bin_index(z[i]))
        acc.add(*bin, shaped[i] / z[i]);
    }
  }
}

BinStats empirical_theta_curve(const ShapingMethod &m, const FeatureMatrix &data,
                               const IntervalPartition &p) {
  BinAccumulator acc(p.k());
  accumulate_theta_ratios(m, data, p, acc);
  return acc.finish();
}

} // namespace oodshape
