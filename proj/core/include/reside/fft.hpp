#pragma once

#include <vector>

#include "reside/array.hpp"

namespace reside {

/// Unitary DFT along the given axes (scale 1/sqrt(N) per axis), so the
/// transform is orthonormal and ifft is both the inverse and the adjoint.
ComplexArray fft(const ComplexArray& a, const std::vector<std::size_t>& axes);
ComplexArray ifft(const ComplexArray& a, const std::vector<std::size_t>& axes);

/// Circular roll moving index 0 to floor(n/2) along each axis (and back).
ComplexArray fftshift(const ComplexArray& a, const std::vector<std::size_t>& axes);
ComplexArray ifftshift(const ComplexArray& a, const std::vector<std::size_t>& axes);

}  // namespace reside
