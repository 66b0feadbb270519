#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace reside {

using cdouble = std::complex<double>;

/// Dense n-dimensional complex array, row-major storage.
class ComplexArray {
 public:
  ComplexArray() = default;
  explicit ComplexArray(std::vector<std::size_t> shape);
  ComplexArray(std::vector<std::size_t> shape, std::vector<cdouble> data);

  static ComplexArray zeros(std::vector<std::size_t> shape) {
    return ComplexArray(std::move(shape));
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const;
  bool empty() const { return data_.empty(); }

  cdouble* data() { return data_.data(); }
  const cdouble* data() const { return data_.data(); }
  cdouble& operator[](std::size_t i) { return data_[i]; }
  const cdouble& operator[](std::size_t i) const { return data_[i]; }

  /// Flat offset of a multi-index (size must equal rank, bounds-checked).
  std::size_t offset(const std::vector<std::size_t>& index) const;
  cdouble& at(const std::vector<std::size_t>& index) { return data_[offset(index)]; }
  const cdouble& at(const std::vector<std::size_t>& index) const { return data_[offset(index)]; }

  bool same_shape(const ComplexArray& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<cdouble> data_;
};

/// Row-major strides for a shape.
std::vector<std::size_t> strides_of(const std::vector<std::size_t>& shape);
std::size_t shape_size(const std::vector<std::size_t>& shape);

double norm_sq(const ComplexArray& a);
double norm(const ComplexArray& a);
double max_abs(const ComplexArray& a);
double mean_power(const ComplexArray& a);  // mean |a_i|^2

/// Inner product sum_i conj(a_i) * b_i.
cdouble dot(const ComplexArray& a, const ComplexArray& b);

ComplexArray operator+(const ComplexArray& a, const ComplexArray& b);
ComplexArray operator-(const ComplexArray& a, const ComplexArray& b);
ComplexArray operator*(cdouble s, const ComplexArray& a);
ComplexArray& operator+=(ComplexArray& a, const ComplexArray& b);
ComplexArray& operator-=(ComplexArray& a, const ComplexArray& b);
ComplexArray& operator*=(ComplexArray& a, cdouble s);

/// Elementwise product a .* b.
ComplexArray hadamard(const ComplexArray& a, const ComplexArray& b);
/// y += alpha * x
void axpy(cdouble alpha, const ComplexArray& x, ComplexArray& y);
ComplexArray conjugate(const ComplexArray& a);

}  // namespace reside
