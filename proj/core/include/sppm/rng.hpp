#pragma once

#include <cstdint>
#include <limits>

namespace sppm {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Counter-based generator: the stream is a pure function of (key, stream)
/// so each global round gets its own independent, reproducible draws.
/// Satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t key, std::uint64_t stream) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()() noexcept;

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform integer in [0, n), unbiased (rejection).
  std::uint64_t below(std::uint64_t n) noexcept;

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

}  // namespace sppm
