#include <doctest.h>

#include <cmath>

#include "reside/errors.hpp"
#include "reside/fft.hpp"
#include "reside/forward_model.hpp"
#include "reside/phantom.hpp"
#include "support/oracles.hpp"

using namespace reside;

TEST_SUITE_BEGIN("forward_model");

namespace {

SensitivityMaps all_ones_maps(std::size_t h, std::size_t w) {
  ComplexArray maps({1, h, w});
  for (std::size_t i = 0; i < maps.size(); ++i) maps[i] = cdouble{1.0, 0.0};
  return SensitivityMaps{maps};
}

SensitivityMaps random_maps(Rng& rng, std::size_t coils, std::size_t h, std::size_t w) {
  return sos_normalize(randn_complex(rng, {coils, h, w}, 1.0));
}

}  // namespace

TEST_CASE("apply is zero on zero and reduces to the FFT for a trivial coil") {
  const SamplingMask full = make_mask_full(8);
  const ForwardOperator op(all_ones_maps(8, 8), full);
  CHECK(norm(op.apply(ComplexArray({8, 8}))) == 0.0);

  Rng rng(1);
  const ComplexArray x = randn_complex(rng, {8, 8}, 1.0);
  const ComplexArray y = op.apply(x);
  const ComplexArray want = fftshift(fft(x, {0, 1}), {0, 1});
  double err = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) err += std::norm(y[i] - want[i]);
  CHECK(std::sqrt(err) < 1e-12 * norm(x));

  // unitary single-coil full sampling: A^H A = I
  const ComplexArray back = op.adjoint(y);
  CHECK(norm(back - x) < 1e-10 * norm(x));
}

TEST_CASE("apply and adjoint match the dense matrix oracle") {
  Rng rng(2);
  Rng mask_rng(3);
  const SamplingMask mask = make_mask_m2(mask_rng, 8, 2.0, 2);
  const ForwardOperator op(random_maps(rng, 2, 8, 8), mask);
  const auto mat = testing::materialize(op);

  const ComplexArray x = randn_complex(rng, {8, 8}, 1.0);
  const ComplexArray ax = op.apply(x);
  const std::vector<cdouble> xv(x.data(), x.data() + x.size());
  const auto want = testing::mat_vec(mat, xv);
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < ax.size(); ++i) {
    err += std::norm(ax[i] - want[i]);
    ref += std::norm(want[i]);
  }
  CHECK(std::sqrt(err) < 1e-10 * std::sqrt(ref));

  const ComplexArray y = randn_complex(rng, {op.measurement_count()}, 1.0);
  const ComplexArray ahy = op.adjoint(y);
  const std::vector<cdouble> yv(y.data(), y.data() + y.size());
  const auto want_adj = testing::mat_vec_adjoint(mat, yv);
  err = ref = 0.0;
  for (std::size_t i = 0; i < ahy.size(); ++i) {
    err += std::norm(ahy[i] - want_adj[i]);
    ref += std::norm(want_adj[i]);
  }
  CHECK(std::sqrt(err) < 1e-10 * std::sqrt(ref));

  CHECK(norm(op.adjoint(ComplexArray({op.measurement_count()}))) == 0.0);
}

TEST_CASE("dot test over randomized instances") {
  int instance = 0;
  for (std::uint64_t seed = 0; seed < 24; ++seed) {
    Rng rng(seed * 31 + 1);
    const std::size_t h = 8 + 4 * (seed % 3);
    const std::size_t w = 8 + 4 * (seed % 2);
    const std::size_t coils = 1 + seed % 3;
    SamplingMask mask;
    if (seed % 3 == 0) {
      mask = make_mask_m1(rng, h, 2.0, 4);
    } else if (seed % 3 == 1) {
      mask = make_mask_m2(rng, h, 2.0, 4);
    } else {
      mask = make_mask_full(h);
    }
    const ForwardOperator op(random_maps(rng, coils, h, w), mask);
    const ComplexArray x = randn_complex(rng, {h, w}, 1.0);
    const ComplexArray y = randn_complex(rng, {op.measurement_count()}, 1.0);
    const ComplexArray ax = op.apply(x);
    const cdouble lhs = dot(ax, y);
    const cdouble rhs = dot(x, op.adjoint(y));
    CHECK(std::abs(lhs - rhs) < 1e-10 * norm(ax) * norm(y));
    ++instance;
  }
  CHECK(instance >= 20);
}

TEST_CASE("linearity of the forward map") {
  Rng rng(9);
  Rng mask_rng(10);
  const SamplingMask mask = make_mask_m1(mask_rng, 12, 2.0, 4);
  const ForwardOperator op(random_maps(rng, 3, 12, 10), mask);
  const ComplexArray x1 = randn_complex(rng, {12, 10}, 1.0);
  const ComplexArray x2 = randn_complex(rng, {12, 10}, 1.0);
  const cdouble alpha{0.7, -1.3};
  ComplexArray combo = alpha * x1 + x2;
  const ComplexArray lhs = op.apply(combo);
  ComplexArray rhs = alpha * op.apply(x1) + op.apply(x2);
  CHECK(norm(lhs - rhs) < 1e-12 * norm(rhs));
}

TEST_CASE("operator norm: unitary case and dense eigensolve oracle") {
  const ForwardOperator id_op(all_ones_maps(8, 8), make_mask_full(8));
  Rng rng(4);
  CHECK(operator_norm_sq(id_op, rng, 100, 1e-12) == doctest::Approx(1.0).epsilon(1e-6));

  Rng rng2(5);
  Rng mask_rng(6);
  const SamplingMask mask = make_mask_m2(mask_rng, 8, 2.0, 2);
  const ForwardOperator op(random_maps(rng2, 2, 8, 8), mask);
  Rng power_rng(7);
  const double via_power = operator_norm_sq(op, power_rng, 400, 1e-13);
  const double via_dense = testing::top_eig_normal_matrix(testing::materialize(op));
  CHECK(via_power == doctest::Approx(via_dense).epsilon(1e-6));
  // SOS-normalized maps bound the norm by 1.
  CHECK(via_power <= 1.0 + 1e-9);

  // norm is an upper envelope of Rayleigh quotients
  for (int probe = 0; probe < 10; ++probe) {
    Rng pr(100 + probe);
    const ComplexArray x = randn_complex(pr, {8, 8}, 1.0);
    const double q = norm_sq(op.apply(x)) / norm_sq(x);
    CHECK(q <= via_power * (1.0 + 1e-9));
  }
}

TEST_CASE("noise variance estimate from the k-space fringe") {
  Rng rng(8);
  const double sigma2 = 0.01;
  const ComplexArray noise = randn_complex(rng, {8, 128, 128}, sigma2);
  const double est = estimate_noise_variance(noise, 0.1);
  CHECK(est == doctest::Approx(sigma2).epsilon(0.1));

  const ComplexArray zero({2, 32, 32});
  CHECK(estimate_noise_variance(zero, 0.1) == 0.0);

  CHECK_THROWS_AS((void)estimate_noise_variance(noise, 0.0), ArgumentError);
  CHECK_THROWS_AS((void)estimate_noise_variance(noise, 0.5), ArgumentError);
  const ComplexArray tiny({2, 4, 4});
  CHECK_THROWS_AS((void)estimate_noise_variance(tiny, 0.1), ArgumentError);
}

TEST_CASE("noise variance estimate tolerates phantom signal") {
  PhantomSpec spec;
  spec.spatial_shape = {128, 128};
  spec.num_coils = 4;
  spec.seed = 3;
  const StaticPhantom ph = make_static_phantom(spec);
  const double sigma2 = 1e-4;
  Rng rng(9);
  ComplexArray k({4, 128, 128});
  for (std::size_t c = 0; c < 4; ++c) {
    ComplexArray coil({128, 128});
    const std::size_t plane = 128 * 128;
    for (std::size_t i = 0; i < plane; ++i)
      coil[i] = ph.maps.maps[c * plane + i] * ph.image[i];
    const ComplexArray ck = fftshift(fft(coil, {0, 1}), {0, 1});
    for (std::size_t i = 0; i < plane; ++i) k[c * plane + i] = ck[i];
  }
  ComplexArray noise = randn_complex(rng, {4, 128, 128}, sigma2);
  k += noise;
  const double est = estimate_noise_variance(k, 0.05);
  CHECK(est == doctest::Approx(sigma2).epsilon(0.2));
}

TEST_CASE("SOS map estimation") {
  // single coil, constant image -> maps identically 1 on support
  ComplexArray k1({1, 32, 32});
  ComplexArray ones({32, 32});
  for (std::size_t i = 0; i < ones.size(); ++i) ones[i] = cdouble{1.0, 0.0};
  const ComplexArray kc = fftshift(fft(ones, {0, 1}), {0, 1});
  for (std::size_t i = 0; i < kc.size(); ++i) k1[i] = kc[i];
  const SensitivityMaps m1 = estimate_sos_maps(k1, 16);
  for (std::size_t i = 0; i < m1.maps.size(); ++i) {
    CHECK(std::abs(m1.maps[i]) == doctest::Approx(1.0).epsilon(1e-9));
  }

  // two identical coils -> each map 1/sqrt(2)
  ComplexArray k2({2, 32, 32});
  for (std::size_t i = 0; i < kc.size(); ++i) {
    k2[i] = kc[i];
    k2[kc.size() + i] = kc[i];
  }
  const SensitivityMaps m2 = estimate_sos_maps(k2, 16);
  for (std::size_t i = 0; i < m2.maps.size(); ++i) {
    CHECK(std::abs(m2.maps[i]) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
  }

  CHECK_THROWS_AS((void)estimate_sos_maps(ComplexArray({2, 16, 16}), 8), ArgumentError);
}

TEST_CASE("SOS map estimation recovers smooth phantom maps") {
  PhantomSpec spec;
  spec.spatial_shape = {64, 64};
  spec.num_coils = 4;
  spec.seed = 12;
  const StaticPhantom ph = make_static_phantom(spec);
  ComplexArray k({4, 64, 64});
  const std::size_t plane = 64 * 64;
  for (std::size_t c = 0; c < 4; ++c) {
    ComplexArray coil({64, 64});
    for (std::size_t i = 0; i < plane; ++i)
      coil[i] = ph.maps.maps[c * plane + i] * ph.image[i];
    const ComplexArray ck = fftshift(fft(coil, {0, 1}), {0, 1});
    for (std::size_t i = 0; i < plane; ++i) k[c * plane + i] = ck[i];
  }
  const SensitivityMaps est = estimate_sos_maps(k, 24);

  double peak = 0.0;
  for (std::size_t i = 0; i < plane; ++i) peak = std::max(peak, std::abs(ph.image[i]));
  std::size_t checked = 0;
  for (std::size_t i = 0; i < plane; ++i) {
    if (std::abs(ph.image[i]) < 0.5 * peak) continue;
    for (std::size_t c = 0; c < 4; ++c) {
      const double got = std::abs(est.maps[c * plane + i]);
      const double want = std::abs(ph.maps.maps[c * plane + i]);
      CHECK(std::abs(got - want) < 0.05);
    }
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("shape validation errors") {
  Rng rng(10);
  const SensitivityMaps maps = random_maps(rng, 2, 8, 8);
  const ForwardOperator op(maps, make_mask_full(8));
  CHECK_THROWS_AS((void)op.apply(ComplexArray({4, 4})), ArgumentError);
  CHECK_THROWS_AS((void)op.adjoint(ComplexArray({3})), ArgumentError);
  CHECK_THROWS_AS(ForwardOperator(maps, make_mask_full(16)), ArgumentError);
}

TEST_SUITE_END();
