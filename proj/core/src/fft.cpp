#include "reside/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>

#include "reside/errors.hpp"

namespace reside {

namespace {

// The FFTW planner is not thread-safe; executes are.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void check_axes(const ComplexArray& a, const std::vector<std::size_t>& axes) {
  if (axes.empty()) throw ArgumentError("fft: no axes given");
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (axes[i] >= a.rank()) throw ArgumentError("fft: axis out of range");
    for (std::size_t j = i + 1; j < axes.size(); ++j) {
      if (axes[i] == axes[j]) throw ArgumentError("fft: duplicate axis");
    }
  }
}

// In-place 1D transforms along `axis` for every line of the array.
void transform_axis(ComplexArray& a, std::size_t axis, int sign) {
  const auto& shape = a.shape();
  const int n = static_cast<int>(shape[axis]);
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  if (n == 1) return;

  auto* base = reinterpret_cast<fftw_complex*>(a.data());
  fftw_plan plan = nullptr;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_many_dft(1, &n, static_cast<int>(inner),
                              base, nullptr, static_cast<int>(inner), 1,
                              base, nullptr, static_cast<int>(inner), 1,
                              sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  if (plan == nullptr) throw Error("fft: planner failed");
  const std::size_t slab = static_cast<std::size_t>(n) * inner;
  for (std::size_t o = 0; o < outer; ++o) {
    fftw_execute_dft(plan, base + o * slab, base + o * slab);
  }
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
}

ComplexArray transform(const ComplexArray& a, const std::vector<std::size_t>& axes, int sign) {
  check_axes(a, axes);
  ComplexArray out = a;
  double count = 1.0;
  for (std::size_t axis : axes) {
    transform_axis(out, axis, sign);
    count *= static_cast<double>(a.shape()[axis]);
  }
  const double scale = 1.0 / std::sqrt(count);
  out *= cdouble{scale, 0.0};
  return out;
}

ComplexArray roll(const ComplexArray& a, const std::vector<std::size_t>& axes,
                  bool inverse) {
  check_axes(a, axes);
  const auto& shape = a.shape();
  const auto strides = strides_of(shape);
  std::vector<std::size_t> shift(shape.size(), 0);
  for (std::size_t axis : axes) {
    const std::size_t n = shape[axis];
    shift[axis] = inverse ? (n - n / 2) % n : n / 2;
  }
  ComplexArray out(shape);
  std::vector<std::size_t> idx(shape.size(), 0);
  for (std::size_t flat = 0; flat < a.size(); ++flat) {
    std::size_t dst = 0;
    for (std::size_t d = 0; d < shape.size(); ++d) {
      std::size_t j = idx[d] + shift[d];
      if (j >= shape[d]) j -= shape[d];
      dst += j * strides[d];
    }
    out[dst] = a[flat];
    for (std::size_t d = shape.size(); d-- > 0;) {
      if (++idx[d] < shape[d]) break;
      idx[d] = 0;
    }
  }
  return out;
}

}  // namespace

ComplexArray fft(const ComplexArray& a, const std::vector<std::size_t>& axes) {
  return transform(a, axes, FFTW_FORWARD);
}

ComplexArray ifft(const ComplexArray& a, const std::vector<std::size_t>& axes) {
  return transform(a, axes, FFTW_BACKWARD);
}

ComplexArray fftshift(const ComplexArray& a, const std::vector<std::size_t>& axes) {
  return roll(a, axes, false);
}

ComplexArray ifftshift(const ComplexArray& a, const std::vector<std::size_t>& axes) {
  return roll(a, axes, true);
}

}  // namespace reside
