#include <doctest.h>

#include <cmath>

#include "reside/errors.hpp"
#include "reside/fft.hpp"
#include "reside/rng.hpp"
#include "support/oracles.hpp"

using namespace reside;

TEST_SUITE_BEGIN("numerics");

namespace {

ComplexArray random_array(Rng& rng, std::vector<std::size_t> shape) {
  return randn_complex(rng, std::move(shape), 1.0);
}

double rel_err(const ComplexArray& a, const ComplexArray& b) {
  return norm(a - b) / std::max(1e-300, norm(b));
}

}  // namespace

TEST_CASE("fft of zeros is zeros") {
  const ComplexArray z({4, 6});
  const ComplexArray f = fft(z, {0, 1});
  CHECK(norm(f) == 0.0);
}

TEST_CASE("fft of a delta is flat with unitary normalization") {
  ComplexArray d({4});
  d[0] = cdouble{1.0, 0.0};
  const ComplexArray f = fft(d, {0});
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(f[i].real() == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(f[i].imag() == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("fft matches the direct DFT sum") {
  const std::vector<cdouble> in{{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  const ComplexArray a({4}, in);
  const ComplexArray f = fft(a, {0});
  const std::vector<cdouble> want = testing::dft_direct(in, -1);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::abs(f[i] - want[i]) < 1e-12);
  }

  Rng rng(5);
  for (std::size_t n : {5ul, 8ul, 12ul, 17ul}) {
    const ComplexArray r = random_array(rng, {n});
    const ComplexArray fr = fft(r, {0});
    const std::vector<cdouble> rv(r.data(), r.data() + n);
    const std::vector<cdouble> oracle = testing::dft_direct(rv, -1);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(fr[i] - oracle[i]) < 1e-10);
  }
}

TEST_CASE("ifft inverts fft to 1e-12") {
  Rng rng(7);
  for (auto shape : std::vector<std::vector<std::size_t>>{
           {16}, {8, 12}, {3, 5, 7}, {2, 3, 4, 5}}) {
    const ComplexArray a = random_array(rng, shape);
    std::vector<std::size_t> axes(shape.size());
    for (std::size_t i = 0; i < shape.size(); ++i) axes[i] = i;
    CHECK(rel_err(ifft(fft(a, axes), axes), a) < 1e-12);
  }
  const ComplexArray z({6, 6});
  CHECK(norm(ifft(z, {0, 1})) == 0.0);
}

TEST_CASE("fft adjoint identity and Parseval") {
  Rng rng(11);
  for (auto shape : std::vector<std::vector<std::size_t>>{
           {9}, {8, 6}, {4, 5, 6}, {3, 4, 2, 5}}) {
    std::vector<std::size_t> axes(shape.size());
    for (std::size_t i = 0; i < shape.size(); ++i) axes[i] = i;
    const ComplexArray a = random_array(rng, shape);
    const ComplexArray b = random_array(rng, shape);
    const cdouble lhs = dot(fft(a, axes), b);
    const cdouble rhs = dot(a, ifft(b, axes));
    CHECK(std::abs(lhs - rhs) < 1e-12 * std::abs(lhs));
    CHECK(norm(fft(a, axes)) == doctest::Approx(norm(a)).epsilon(1e-12));
  }
}

TEST_CASE("fft rejects bad axes") {
  const ComplexArray a({4, 4});
  CHECK_THROWS_AS((void)fft(a, {2}), ArgumentError);
  CHECK_THROWS_AS((void)fft(a, {0, 0}), ArgumentError);
  CHECK_THROWS_AS((void)fft(a, {}), ArgumentError);
}

TEST_CASE("fftshift round trip and parity") {
  Rng rng(3);
  const ComplexArray a = random_array(rng, {5, 8});
  const ComplexArray s = fftshift(a, {0, 1});
  CHECK(rel_err(ifftshift(s, {0, 1}), a) == 0.0);
  // even length: index 0 moves to n/2
  ComplexArray d({8});
  d[0] = cdouble{1.0, 0.0};
  CHECK(fftshift(d, {0})[4].real() == 1.0);
}

TEST_CASE("randn_complex variance and determinism") {
  Rng rng(42);
  const ComplexArray z = randn_complex(rng, {1000, 1000}, 1.0);
  CHECK(mean_power(z) == doctest::Approx(1.0).epsilon(0.01));

  Rng a(42), b(42);
  const ComplexArray za = randn_complex(a, {4}, 0.7);
  const ComplexArray zb = randn_complex(b, {4}, 0.7);
  for (std::size_t i = 0; i < 4; ++i) CHECK(za[i] == zb[i]);

  Rng c(1);
  const ComplexArray zero = randn_complex(c, {16}, 0.0);
  CHECK(norm(zero) == 0.0);
  CHECK_THROWS_AS((void)randn_complex(c, {4}, -1.0), ArgumentError);
}

TEST_CASE("rng streams replay and fork independently") {
  Rng a(123), b(123);
  for (int i = 0; i < 64; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng base(9);
  Rng f1 = base.fork(1);
  Rng f2 = base.fork(2);
  CHECK(f1.next_u64() != f2.next_u64());
  Rng f1_again = base.fork(1);
  f1 = base.fork(1);
  for (int i = 0; i < 16; ++i) CHECK(f1.next_u64() == f1_again.next_u64());
}

TEST_CASE("uniform_index stays in range") {
  Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    CHECK(rng.uniform_index(7) < 7);
  }
  CHECK_THROWS_AS((void)rng.uniform_index(0), ArgumentError);
}

TEST_SUITE_END();
