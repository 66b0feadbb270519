#pragma once

#include "reside/array.hpp"

namespace reside {

/// Orthonormal Haar analysis over `levels` dyadic scales along every axis;
/// approximation coefficients occupy the leading block at each scale and
/// odd-length tails pass through to the next scale unchanged.
ComplexArray haar_forward(const ComplexArray& a, int levels);
ComplexArray haar_inverse(const ComplexArray& a, int levels);

double soft_threshold(double value, double strength);

/// Wavelet-shrinkage denoiser: Haar transform, soft-threshold every detail
/// coefficient (real and imaginary channels independently), transform back.
ComplexArray baseline_shrink_denoiser(const ComplexArray& u, double strength,
                                      int levels = 3);

}  // namespace reside
