#include "reside/wavelet.hpp"

#include <algorithm>
#include <cmath>

#include "reside/errors.hpp"

namespace reside {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

// Approximation-box extents per level; boxes[0] is the full shape.
std::vector<std::vector<std::size_t>> level_boxes(const std::vector<std::size_t>& shape,
                                                  int levels) {
  std::vector<std::vector<std::size_t>> boxes{shape};
  for (int l = 0; l < levels; ++l) {
    std::vector<std::size_t> next = boxes.back();
    for (std::size_t& n : next) {
      if (n >= 2) n = (n + 1) / 2;
    }
    boxes.push_back(std::move(next));
  }
  return boxes;
}

void line_forward(std::vector<cdouble>& line) {
  const std::size_t n = line.size();
  const std::size_t m = n / 2;
  const std::size_t odd = n % 2;
  std::vector<cdouble> out(n);
  for (std::size_t k = 0; k < m; ++k) {
    out[k] = (line[2 * k] + line[2 * k + 1]) * kInvSqrt2;
    out[m + odd + k] = (line[2 * k] - line[2 * k + 1]) * kInvSqrt2;
  }
  if (odd) out[m] = line[n - 1];
  line = std::move(out);
}

void line_inverse(std::vector<cdouble>& line) {
  const std::size_t n = line.size();
  const std::size_t m = n / 2;
  const std::size_t odd = n % 2;
  std::vector<cdouble> out(n);
  for (std::size_t k = 0; k < m; ++k) {
    out[2 * k] = (line[k] + line[m + odd + k]) * kInvSqrt2;
    out[2 * k + 1] = (line[k] - line[m + odd + k]) * kInvSqrt2;
  }
  if (odd) out[n - 1] = line[m];
  line = std::move(out);
}

// Applies fn to every line along `axis` inside the leading box `box`.
void for_each_line(ComplexArray& a, const std::vector<std::size_t>& box,
                   std::size_t axis, void (*fn)(std::vector<cdouble>&)) {
  const auto strides = strides_of(a.shape());
  const std::size_t n = box[axis];
  if (n < 2) return;
  std::vector<std::size_t> idx(box.size(), 0);
  std::vector<cdouble> line(n);
  while (true) {
    std::size_t base = 0;
    for (std::size_t d = 0; d < box.size(); ++d) base += idx[d] * strides[d];
    for (std::size_t k = 0; k < n; ++k) line[k] = a[base + k * strides[axis]];
    fn(line);
    for (std::size_t k = 0; k < n; ++k) a[base + k * strides[axis]] = line[k];
    // next index over all axes except `axis`
    std::size_t d = box.size();
    bool done = true;
    while (d-- > 0) {
      if (d == axis) continue;
      if (++idx[d] < box[d]) {
        done = false;
        break;
      }
      idx[d] = 0;
    }
    if (done) break;
  }
}

void check(const ComplexArray& a, int levels) {
  if (a.rank() == 0 || a.size() == 0) throw ArgumentError("haar: empty array");
  if (levels < 0) throw ArgumentError("haar: negative level count");
}

}  // namespace

ComplexArray haar_forward(const ComplexArray& a, int levels) {
  check(a, levels);
  ComplexArray out = a;
  const auto boxes = level_boxes(a.shape(), levels);
  for (int l = 0; l < levels; ++l) {
    for (std::size_t axis = 0; axis < a.rank(); ++axis) {
      for_each_line(out, boxes[l], axis, line_forward);
    }
  }
  return out;
}

ComplexArray haar_inverse(const ComplexArray& a, int levels) {
  check(a, levels);
  ComplexArray out = a;
  const auto boxes = level_boxes(a.shape(), levels);
  for (int l = levels; l-- > 0;) {
    for (std::size_t axis = a.rank(); axis-- > 0;) {
      for_each_line(out, boxes[l], axis, line_inverse);
    }
  }
  return out;
}

double soft_threshold(double value, double strength) {
  if (value > strength) return value - strength;
  if (value < -strength) return value + strength;
  return 0.0;
}

ComplexArray baseline_shrink_denoiser(const ComplexArray& u, double strength,
                                      int levels) {
  if (strength < 0.0) throw ArgumentError("baseline denoiser: negative strength");
  ComplexArray w = haar_forward(u, levels);
  const auto boxes = level_boxes(u.shape(), levels);
  const auto& approx = boxes.back();
  const auto& shape = u.shape();

  std::vector<std::size_t> idx(shape.size(), 0);
  for (std::size_t flat = 0; flat < w.size(); ++flat) {
    bool in_approx = true;
    for (std::size_t d = 0; d < shape.size(); ++d) {
      if (idx[d] >= approx[d]) {
        in_approx = false;
        break;
      }
    }
    if (!in_approx) {
      w[flat] = cdouble{soft_threshold(w[flat].real(), strength),
                        soft_threshold(w[flat].imag(), strength)};
    }
    for (std::size_t d = shape.size(); d-- > 0;) {
      if (++idx[d] < shape[d]) break;
      idx[d] = 0;
    }
  }
  return haar_inverse(w, levels);
}

}  // namespace reside
