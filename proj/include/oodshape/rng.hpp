#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace oodshape {

/// xoshiro256** (Blackman & Vigna) with its 256-bit state seeded by four
/// successive outputs of splitmix64 started at `seed`. Used for every
/// seeded subsample so runs are reproducible across platforms.
class Xoshiro256StarStar {
public:
  using result_type = std::uint64_t;

  explicit Xoshiro256StarStar(std::uint64_t seed);

  std::uint64_t operator()();
  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return ~std::uint64_t{0}; }

  /// Uniform integer in [0, bound) by rejection (no modulo bias).
  std::uint64_t below(std::uint64_t bound);

private:
  std::uint64_t s_[4];
};

/// `count` distinct indices from [0, n) drawn by partial Fisher-Yates,
/// returned sorted ascending. count >= n returns every index.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count,
                                                    Xoshiro256StarStar &rng);

} // namespace oodshape
