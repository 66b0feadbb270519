#include "reside/metrics.hpp"

#include <cmath>
#include <limits>

#include "reside/errors.hpp"

namespace reside {

double rsnr(const ComplexArray& truth, const ComplexArray& recon) {
  if (!truth.same_shape(recon)) throw ArgumentError("rsnr: shape mismatch");
  const double signal = norm(truth);
  if (signal == 0.0) throw ArgumentError("rsnr: zero reference");
  double err_sq = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) err_sq += std::norm(truth[i] - recon[i]);
  if (err_sq == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(signal / std::sqrt(err_sq));
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

const std::vector<double>& gaussian_window() {
  static const std::vector<double> w = [] {
    std::vector<double> v(kWindow * kWindow);
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      for (int j = 0; j < kWindow; ++j) {
        const double di = i - kWindow / 2, dj = j - kWindow / 2;
        v[i * kWindow + j] = std::exp(-(di * di + dj * dj) / (2.0 * kSigma * kSigma));
        sum += v[i * kWindow + j];
      }
    }
    for (double& x : v) x /= sum;
    return v;
  }();
  return w;
}

double ssim_plane(const double* a, const double* b, std::size_t h, std::size_t w,
                  double dynamic_range) {
  if (h < kWindow || w < kWindow)
    throw ArgumentError("ssim: image smaller than the 11x11 window");
  const double c1 = (kK1 * dynamic_range) * (kK1 * dynamic_range);
  const double c2 = (kK2 * dynamic_range) * (kK2 * dynamic_range);
  const auto& win = gaussian_window();

  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t y = 0; y + kWindow <= h; ++y) {
    for (std::size_t x = 0; x + kWindow <= w; ++x) {
      double mu_a = 0.0, mu_b = 0.0;
      for (int i = 0; i < kWindow; ++i) {
        for (int j = 0; j < kWindow; ++j) {
          const double wt = win[i * kWindow + j];
          mu_a += wt * a[(y + i) * w + (x + j)];
          mu_b += wt * b[(y + i) * w + (x + j)];
        }
      }
      double var_a = 0.0, var_b = 0.0, cov = 0.0;
      for (int i = 0; i < kWindow; ++i) {
        for (int j = 0; j < kWindow; ++j) {
          const double wt = win[i * kWindow + j];
          const double da = a[(y + i) * w + (x + j)] - mu_a;
          const double db = b[(y + i) * w + (x + j)] - mu_b;
          var_a += wt * da * da;
          var_b += wt * db * db;
          cov += wt * da * db;
        }
      }
      const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
      const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
      total += num / den;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

std::vector<double> magnitude(const ComplexArray& a) {
  std::vector<double> m(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) m[i] = std::abs(a[i]);
  return m;
}

}  // namespace

double ssim(const ComplexArray& truth, const ComplexArray& recon) {
  if (!truth.same_shape(recon)) throw ArgumentError("ssim: shape mismatch");
  if (truth.rank() != 2 && truth.rank() != 3)
    throw ArgumentError("ssim: expect a 2D image or a [frames, pe, ro] series");
  const std::vector<double> a = magnitude(truth);
  const std::vector<double> b = magnitude(recon);
  double range = 0.0;
  for (double v : a) range = std::max(range, v);
  if (range == 0.0) throw ArgumentError("ssim: zero reference");

  if (truth.rank() == 2) {
    return ssim_plane(a.data(), b.data(), truth.dim(0), truth.dim(1), range);
  }
  const std::size_t frames = truth.dim(0);
  const std::size_t plane = truth.dim(1) * truth.dim(2);
  double total = 0.0;
  for (std::size_t f = 0; f < frames; ++f) {
    total += ssim_plane(a.data() + f * plane, b.data() + f * plane, truth.dim(1),
                        truth.dim(2), range);
  }
  return total / static_cast<double>(frames);
}

QualityReport assess(const ComplexArray& truth, const ComplexArray& recon) {
  QualityReport report;
  report.rsnr_db = rsnr(truth, recon);
  report.ssim = ssim(truth, recon);
  if (truth.rank() == 3) {
    const std::size_t frames = truth.dim(0);
    const std::vector<std::size_t> plane_shape{truth.dim(1), truth.dim(2)};
    const std::size_t plane = plane_shape[0] * plane_shape[1];
    for (std::size_t f = 0; f < frames; ++f) {
      ComplexArray t(plane_shape), r(plane_shape);
      for (std::size_t i = 0; i < plane; ++i) {
        t[i] = truth[f * plane + i];
        r[i] = recon[f * plane + i];
      }
      report.frames.push_back({rsnr(t, r), ssim(t, r)});
    }
  }
  return report;
}

}  // namespace reside
