#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "reside/errors.hpp"
#include "reside/sampling.hpp"

using namespace reside;

TEST_SUITE_BEGIN("sampling");

namespace {

std::size_t max_gap(const SamplingMask& m) {
  const auto lines = m.sampled_lines(0);
  std::size_t gap = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) gap = std::max(gap, lines[i] - lines[i - 1]);
  return gap;
}

}  // namespace

TEST_CASE("m1 honors the line budget and the ACS block") {
  Rng rng(1);
  const SamplingMask m = make_mask_m1(rng, 320, 4.0, 32);
  CHECK(m.sampled_count(0) == 80);
  const std::size_t start = acs_start(320, 32);
  CHECK(start == 144);
  for (std::size_t l = start; l < start + 32; ++l) CHECK(m.sampled(0, l));
  CHECK(acceleration_rate(m, 320 * 256, 8) == doctest::Approx(4.0).epsilon(0.03));
}

TEST_CASE("m1 with R=1 samples everything") {
  Rng rng(2);
  const SamplingMask m = make_mask_m1(rng, 64, 1.0, 16);
  CHECK(m.sampled_count(0) == 64);
}

TEST_CASE("m1 gap bound: <= 2x uniform spacing over 1000 seeds") {
  // 16 lines at R=2 with a 4-line ACS: uniform spacing is 2, so gaps must
  // never exceed 4.
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng(seed);
    const SamplingMask m = make_mask_m1(rng, 16, 2.0, 4);
    CHECK(m.sampled_count(0) == 8);
    CHECK(max_gap(m) <= 4);
  }
}

TEST_CASE("m1 budget stays within one line of num_lines/R") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    for (double r : {1.0, 2.0, 3.0, 4.0, 6.4}) {
      const SamplingMask m = make_mask_m1(rng, 96, r, 12);
      CHECK(std::abs(static_cast<double>(m.sampled_count(0)) - 96.0 / r) <= 1.0);
    }
  }
}

TEST_CASE("m1 infeasible budgets are rejected") {
  Rng rng(3);
  CHECK_THROWS_AS((void)make_mask_m1(rng, 64, 8.0, 32), ArgumentError);  // budget 8 < ACS 32
  CHECK_THROWS_AS((void)make_mask_m1(rng, 64, 0.5, 8), ArgumentError);
  CHECK_THROWS_AS((void)make_mask_m1(rng, 64, 4.0, 128), ArgumentError);
}

TEST_CASE("m2 honors budget and randomizes across seeds") {
  Rng rng(4);
  const SamplingMask m = make_mask_m2(rng, 320, 4.0, 32);
  CHECK(m.sampled_count(0) == 80);
  const std::size_t start = acs_start(320, 32);
  for (std::size_t l = start; l < start + 32; ++l) CHECK(m.sampled(0, l));

  int distinct = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng ra(seed), rb(seed + 1000);
    const SamplingMask a = make_mask_m2(ra, 64, 4.0, 8);
    const SamplingMask b = make_mask_m2(rb, 64, 4.0, 8);
    if (a.lines != b.lines) ++distinct;
  }
  CHECK(distinct == 10);
}

TEST_CASE("m2 non-ACS draw is uniform across 10k seeds") {
  const std::size_t n = 32, acs = 8;
  const double r = 2.0;  // budget 16, 8 random lines among 24 non-ACS
  std::vector<std::size_t> hits(n, 0);
  const int trials = 10000;
  for (int seed = 0; seed < trials; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    const SamplingMask m = make_mask_m2(rng, n, r, acs);
    for (std::size_t l = 0; l < n; ++l) hits[l] += m.sampled(0, l) ? 1 : 0;
  }
  const std::size_t start = acs_start(n, acs);
  const double expected = trials * 8.0 / 24.0;  // per non-ACS line
  for (std::size_t l = 0; l < n; ++l) {
    if (l >= start && l < start + acs) {
      CHECK(hits[l] == trials);
    } else {
      CHECK(std::abs(hits[l] - expected) < 0.05 * trials);
    }
  }
}

TEST_CASE("m3 covers every line across frames") {
  Rng rng(5);
  const SamplingMask m = make_mask_m3(rng, 24, 6, 4.0);
  CHECK(m.num_frames == 6);
  for (std::size_t f = 0; f < 6; ++f) {
    CHECK(std::abs(static_cast<double>(m.sampled_count(f)) - 6.0) <= 1.0);
  }
  for (std::size_t l = 0; l < 24; ++l) {
    bool covered = false;
    for (std::size_t f = 0; f < 6; ++f) covered = covered || m.sampled(f, l);
    CHECK(covered);
  }
}

TEST_CASE("m3 coverage holds over many seeds and uneven strata") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const SamplingMask m = make_mask_m3(rng, 25, 8, 4.0);
    for (std::size_t l = 0; l < 25; ++l) {
      bool covered = false;
      for (std::size_t f = 0; f < 8; ++f) covered = covered || m.sampled(f, l);
      CHECK(covered);
    }
  }
}

TEST_CASE("m3 with one frame is a frame-local pseudo-random mask") {
  Rng rng(6);
  const SamplingMask m = make_mask_m3(rng, 24, 1, 4.0);
  CHECK(m.num_frames == 1);
  CHECK(m.sampled_count(0) == 6);
}

TEST_CASE("m3 rejects impossible rates") {
  Rng rng(7);
  CHECK_THROWS_AS((void)make_mask_m3(rng, 16, 4, 32.0), ArgumentError);
  CHECK_THROWS_AS((void)make_mask_m3(rng, 16, 0, 4.0), ArgumentError);
}

TEST_CASE("acceleration rate algebra") {
  const SamplingMask full = make_mask_full(64);
  CHECK(acceleration_rate(full, 64 * 48, 1) == doctest::Approx(1.0));

  SamplingMask half = make_mask_full(64);
  for (std::size_t l = 0; l < 64; l += 2) half.lines[l] = 0;
  CHECK(acceleration_rate(half, 64 * 48, 1) == doctest::Approx(2.0));
  CHECK(acceleration_rate(half, 64 * 48, 7) == doctest::Approx(2.0));  // coils cancel

  Rng rng(8);
  const SamplingMask m1 = make_mask_m1(rng, 320, 4.0, 32);
  const double r = acceleration_rate(m1, 320 * 320, 4);
  CHECK(r >= 3.9);
  CHECK(r <= 4.1);

  SamplingMask empty = make_mask_full(8);
  empty.lines.assign(8, 0);
  CHECK_THROWS_AS((void)acceleration_rate(empty, 64, 1), ArgumentError);
}

TEST_SUITE_END();
