#include "reside/array.hpp"

#include <cmath>

#include "reside/errors.hpp"

namespace reside {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

std::vector<std::size_t> strides_of(const std::vector<std::size_t>& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
  return s;
}

ComplexArray::ComplexArray(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
  for (std::size_t d : shape_) {
    if (d == 0) throw ArgumentError("ComplexArray: zero-sized dimension");
  }
  data_.assign(shape_size(shape_), cdouble{0.0, 0.0});
}

ComplexArray::ComplexArray(std::vector<std::size_t> shape, std::vector<cdouble> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_))
    throw ArgumentError("ComplexArray: data length does not match shape");
}

std::size_t ComplexArray::dim(std::size_t axis) const {
  if (axis >= shape_.size()) throw ArgumentError("ComplexArray: axis out of range");
  return shape_[axis];
}

std::size_t ComplexArray::offset(const std::vector<std::size_t>& index) const {
  if (index.size() != shape_.size()) throw ArgumentError("ComplexArray: index rank mismatch");
  std::size_t off = 0, stride = 1;
  for (std::size_t i = shape_.size(); i-- > 0;) {
    if (index[i] >= shape_[i]) throw ArgumentError("ComplexArray: index out of bounds");
    off += index[i] * stride;
    stride *= shape_[i];
  }
  return off;
}

bool ComplexArray::all_finite() const {
  for (const cdouble& v : data_) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  }
  return true;
}

double norm_sq(const ComplexArray& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(a[i]);
  return s;
}

double norm(const ComplexArray& a) { return std::sqrt(norm_sq(a)); }

double max_abs(const ComplexArray& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i]));
  return m;
}

double mean_power(const ComplexArray& a) {
  if (a.size() == 0) throw ArgumentError("mean_power: empty array");
  return norm_sq(a) / static_cast<double>(a.size());
}

cdouble dot(const ComplexArray& a, const ComplexArray& b) {
  if (!a.same_shape(b)) throw ArgumentError("dot: shape mismatch");
  cdouble s{0.0, 0.0};
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

ComplexArray operator+(const ComplexArray& a, const ComplexArray& b) {
  ComplexArray r = a;
  r += b;
  return r;
}

ComplexArray operator-(const ComplexArray& a, const ComplexArray& b) {
  ComplexArray r = a;
  r -= b;
  return r;
}

ComplexArray operator*(cdouble s, const ComplexArray& a) {
  ComplexArray r = a;
  r *= s;
  return r;
}

ComplexArray& operator+=(ComplexArray& a, const ComplexArray& b) {
  if (!a.same_shape(b)) throw ArgumentError("operator+=: shape mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

ComplexArray& operator-=(ComplexArray& a, const ComplexArray& b) {
  if (!a.same_shape(b)) throw ArgumentError("operator-=: shape mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}

ComplexArray& operator*=(ComplexArray& a, cdouble s) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] *= s;
  return a;
}

ComplexArray hadamard(const ComplexArray& a, const ComplexArray& b) {
  if (!a.same_shape(b)) throw ArgumentError("hadamard: shape mismatch");
  ComplexArray r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] *= b[i];
  return r;
}

void axpy(cdouble alpha, const ComplexArray& x, ComplexArray& y) {
  if (!x.same_shape(y)) throw ArgumentError("axpy: shape mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

ComplexArray conjugate(const ComplexArray& a) {
  ComplexArray r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = std::conj(r[i]);
  return r;
}

}  // namespace reside
