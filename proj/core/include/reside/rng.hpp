#pragma once

#include <cstdint>
#include <vector>

#include "reside/array.hpp"

namespace reside {

/// Counter-based pseudo-random generator. Every output is a pure function of
/// (seed, position), so sequences replay identically across runs and disjoint
/// streams can be forked for workers, iterations or patches.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : seed_(seed) {}

  std::uint64_t next_u64() noexcept;

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;

  /// Standard normal via Box-Muller.
  double gaussian() noexcept;

  /// Uniform integer in [0, bound); bound must be nonzero.
  std::uint64_t uniform_index(std::uint64_t bound);

  /// Independent stream derived from (seed, stream id); position starts at 0.
  Rng fork(std::uint64_t stream) const noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t position() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

/// Circularly symmetric complex Gaussian samples with E|z|^2 = variance
/// (real and imaginary parts each N(0, variance/2)).
ComplexArray randn_complex(Rng& rng, std::vector<std::size_t> shape, double variance);

}  // namespace reside
