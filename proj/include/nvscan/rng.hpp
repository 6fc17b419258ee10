#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace nvscan {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// A single call maps (counter, key) to four 32-bit outputs with no state.
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key);

/// An independent random stream addressed by (seed, pixel, repeat).
///
/// The seed is the Philox key; pixel and repeat occupy the upper counter words
/// and the lowest counter word walks through the stream. Two streams with
/// different addresses never share a counter block, so results do not depend
/// on the order in which pixels are evaluated.
///
/// Satisfies UniformRandomBitGenerator.
class RandomStream {
 public:
  using result_type = std::uint32_t;

  RandomStream(std::uint64_t seed, std::uint64_t pixel, std::uint32_t repeat);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

 private:
  PhiloxKey key_;
  PhiloxCounter counter_;
  PhiloxCounter block_{};
  int used_ = 4;
};

/// Poisson variate with the given mean drawn from `stream`.
/// mean == 0 returns 0; negative or non-finite means throw.
std::int64_t poisson(RandomStream& stream, double mean);

}  // namespace nvscan
