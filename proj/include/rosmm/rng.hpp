#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>
#include <vector>

namespace rosmm {

/// splitmix64 finalizer; used for seeding and stream derivation.
std::uint64_t mix64(std::uint64_t x);

/// Seed of an independent child stream. Stream derivation is
/// child = mix64(parent ^ mix64(tag + golden)), so a run seed plus a fixed
/// tag (chunk index, subratio id, sweep point) always yields the same stream.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag);
std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag);

/// xoshiro256** generator. Satisfies UniformRandomBitGenerator, but all
/// library sampling goes through the members below so results do not depend
/// on the standard library's distribution implementations.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer on [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal (Box-Muller, no caching).
  double normal();

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::array<std::uint64_t, 4> s_;
};

}  // namespace rosmm
