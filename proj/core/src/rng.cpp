#include "reside/rng.hpp"

#include <cmath>
#include <numbers>

#include "reside/errors.hpp"

namespace reside {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::next_u64() noexcept {
  ++counter_;
  return mix64(seed_ + counter_ * kGolden);
}

double Rng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() noexcept {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::uniform_index(std::uint64_t bound) {
  if (bound == 0) throw ArgumentError("uniform_index: zero bound");
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
}

Rng Rng::fork(std::uint64_t stream) const noexcept {
  return Rng(mix64(seed_ ^ mix64(stream + kGolden)));
}

ComplexArray randn_complex(Rng& rng, std::vector<std::size_t> shape, double variance) {
  if (variance < 0.0) throw ArgumentError("randn_complex: negative variance");
  ComplexArray out(std::move(shape));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double u1 = 1.0 - rng.uniform();
    const double u2 = rng.uniform();
    const double mag = std::sqrt(-variance * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    out[i] = cdouble{mag * std::cos(ang), mag * std::sin(ang)};
  }
  return out;
}

}  // namespace reside
