#pragma once

// Independent reference computations used by the test suites. These stay
// deliberately naive (O(N^2) sums, dense matrices, direct formulas) and do
// not share code with the library paths they check.

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "reside/array.hpp"
#include "reside/forward_model.hpp"

namespace reside::testing {

/// Direct O(N^2) unitary DFT along a single 1D vector.
inline std::vector<cdouble> dft_direct(const std::vector<cdouble>& in, int sign) {
  const std::size_t n = in.size();
  std::vector<cdouble> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cdouble acc{0.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) {
      const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(k * j) /
                         static_cast<double>(n);
      acc += in[j] * cdouble{std::cos(ang), std::sin(ang)};
    }
    out[k] = acc / std::sqrt(static_cast<double>(n));
  }
  return out;
}

/// Dense matrix of a linear operator, built column by column from unit
/// vectors: entry (i, j) = (A e_j)_i.
inline std::vector<std::vector<cdouble>> materialize(const ForwardOperator& op) {
  const std::size_t n = shape_size(op.image_shape());
  const std::size_t m = op.measurement_count();
  std::vector<std::vector<cdouble>> mat(m, std::vector<cdouble>(n));
  for (std::size_t j = 0; j < n; ++j) {
    ComplexArray e(op.image_shape());
    e[j] = cdouble{1.0, 0.0};
    const ComplexArray col = op.apply(e);
    for (std::size_t i = 0; i < m; ++i) mat[i][j] = col[i];
  }
  return mat;
}

inline std::vector<cdouble> mat_vec(const std::vector<std::vector<cdouble>>& mat,
                                    const std::vector<cdouble>& v) {
  std::vector<cdouble> out(mat.size(), cdouble{0.0, 0.0});
  for (std::size_t i = 0; i < mat.size(); ++i) {
    for (std::size_t j = 0; j < v.size(); ++j) out[i] += mat[i][j] * v[j];
  }
  return out;
}

inline std::vector<cdouble> mat_vec_adjoint(const std::vector<std::vector<cdouble>>& mat,
                                            const std::vector<cdouble>& v) {
  const std::size_t n = mat.empty() ? 0 : mat[0].size();
  std::vector<cdouble> out(n, cdouble{0.0, 0.0});
  for (std::size_t i = 0; i < mat.size(); ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j] += std::conj(mat[i][j]) * v[i];
  }
  return out;
}

/// Largest eigenvalue of the Hermitian matrix A^H A via a cyclic Jacobi
/// eigensolve of the real-symmetric embedding [[Re, -Im], [Im, Re]].
inline double top_eig_normal_matrix(const std::vector<std::vector<cdouble>>& mat) {
  const std::size_t n = mat.empty() ? 0 : mat[0].size();
  // H = A^H A (n x n Hermitian).
  std::vector<std::vector<cdouble>> h(n, std::vector<cdouble>(n, cdouble{0.0, 0.0}));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      cdouble acc{0.0, 0.0};
      for (std::size_t i = 0; i < mat.size(); ++i) acc += std::conj(mat[i][a]) * mat[i][b];
      h[a][b] = acc;
    }
  }
  const std::size_t m = 2 * n;
  std::vector<std::vector<double>> s(m, std::vector<double>(m, 0.0));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      s[a][b] = h[a][b].real();
      s[a][n + b] = -h[a][b].imag();
      s[n + a][b] = h[a][b].imag();
      s[n + a][n + b] = h[a][b].real();
    }
  }
  // Cyclic Jacobi sweeps.
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < m; ++p) {
      for (std::size_t q = p + 1; q < m; ++q) off += s[p][q] * s[p][q];
    }
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < m; ++p) {
      for (std::size_t q = p + 1; q < m; ++q) {
        if (std::abs(s[p][q]) < 1e-18) continue;
        const double theta = 0.5 * std::atan2(2.0 * s[p][q], s[q][q] - s[p][p]);
        const double c = std::cos(theta), sn = std::sin(theta);
        for (std::size_t k = 0; k < m; ++k) {
          const double skp = s[k][p], skq = s[k][q];
          s[k][p] = c * skp - sn * skq;
          s[k][q] = sn * skp + c * skq;
        }
        for (std::size_t k = 0; k < m; ++k) {
          const double spk = s[p][k], sqk = s[q][k];
          s[p][k] = c * spk - sn * sqk;
          s[q][k] = sn * spk + c * sqk;
        }
      }
    }
  }
  double top = 0.0;
  for (std::size_t p = 0; p < m; ++p) top = std::max(top, s[p][p]);
  return top;
}

/// Direct windowed SSIM with an 11x11 Gaussian (sigma 1.5), K1/K2 defaults,
/// windows fully inside the image.
inline double ssim_direct(const std::vector<double>& a, const std::vector<double>& b,
                          std::size_t h, std::size_t w, double range) {
  const int win = 11;
  const double sigma = 1.5;
  std::vector<double> g(static_cast<std::size_t>(win) * win);
  double gsum = 0.0;
  for (int i = 0; i < win; ++i) {
    for (int j = 0; j < win; ++j) {
      const double di = i - win / 2, dj = j - win / 2;
      g[i * win + j] = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
      gsum += g[i * win + j];
    }
  }
  for (double& v : g) v /= gsum;
  const double c1 = std::pow(0.01 * range, 2), c2 = std::pow(0.03 * range, 2);

  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t y = 0; y + win <= h; ++y) {
    for (std::size_t x = 0; x + win <= w; ++x) {
      double mu1 = 0, mu2 = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          mu1 += g[i * win + j] * a[(y + i) * w + x + j];
          mu2 += g[i * win + j] * b[(y + i) * w + x + j];
        }
      double v1 = 0, v2 = 0, cov = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          const double da = a[(y + i) * w + x + j] - mu1;
          const double db = b[(y + i) * w + x + j] - mu2;
          v1 += g[i * win + j] * da * da;
          v2 += g[i * win + j] * db * db;
          cov += g[i * win + j] * da * db;
        }
      total += ((2 * mu1 * mu2 + c1) * (2 * cov + c2)) /
               ((mu1 * mu1 + mu2 * mu2 + c1) * (v1 + v2 + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace reside::testing
