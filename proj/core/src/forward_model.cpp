#include "reside/forward_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "reside/errors.hpp"
#include "reside/fft.hpp"

namespace reside {

std::vector<std::size_t> SensitivityMaps::image_shape() const {
  if (maps.rank() < 2) throw ArgumentError("SensitivityMaps: need [coils, image...]");
  return {maps.shape().begin() + 1, maps.shape().end()};
}

namespace {

std::vector<std::size_t> spatial_axes(const std::vector<std::size_t>& image_shape) {
  // Last two axes are spatial (pe, readout); a leading axis is time.
  if (image_shape.size() == 2) return {0, 1};
  if (image_shape.size() == 3) return {1, 2};
  throw ArgumentError("forward model: image must be [pe, ro] or [frames, pe, ro]");
}

}  // namespace

ForwardOperator::ForwardOperator(SensitivityMaps sens, SamplingMask mask)
    : sens_(std::move(sens)), mask_(std::move(mask)) {
  image_shape_ = sens_.image_shape();
  if (sens_.num_coils() == 0) throw ArgumentError("ForwardOperator: no coils");
  if (image_shape_.size() != 2 && image_shape_.size() != 3)
    throw ArgumentError("ForwardOperator: image must be [pe, ro] or [frames, pe, ro]");
  if (image_shape_.size() == 3) {
    frames_ = image_shape_[0];
    pe_ = image_shape_[1];
    readout_ = image_shape_[2];
    // Maps are per-coil spatial profiles shared across frames.
    if (sens_.maps.rank() == 4)
      throw ArgumentError("ForwardOperator: maps must be [coils, pe, ro]");
  } else {
    frames_ = 1;
    pe_ = image_shape_[0];
    readout_ = image_shape_[1];
  }
  if (sens_.maps.rank() != 3)
    throw ArgumentError("ForwardOperator: maps must be [coils, pe, ro]");
  if (sens_.maps.dim(1) != pe_ || sens_.maps.dim(2) != readout_)
    throw ArgumentError("ForwardOperator: map shape does not match image");
  if (mask_.num_lines != pe_ || mask_.num_frames != frames_)
    throw ArgumentError("ForwardOperator: mask does not match image shape");

  lines_per_frame_.resize(frames_);
  std::size_t sampled = 0;
  for (std::size_t f = 0; f < frames_; ++f) {
    lines_per_frame_[f] = mask_.sampled_lines(f);
    if (lines_per_frame_[f].empty())
      throw ArgumentError("ForwardOperator: a frame samples no lines");
    sampled += lines_per_frame_[f].size();
  }
  measurements_ = sens_.num_coils() * sampled * readout_;
}

ComplexArray ForwardOperator::apply(const ComplexArray& x) const {
  if (x.shape() != image_shape_) throw ArgumentError("apply: image shape mismatch");
  const std::size_t coils = num_coils();
  const std::vector<std::size_t> axes = spatial_axes(image_shape_);
  ComplexArray y({measurements_});
  const std::size_t plane = pe_ * readout_;
  std::size_t out = 0;
  for (std::size_t c = 0; c < coils; ++c) {
    const cdouble* map = sens_.maps.data() + c * plane;
    ComplexArray weighted(image_shape_);
    for (std::size_t f = 0; f < frames_; ++f) {
      const cdouble* src = x.data() + f * plane;
      cdouble* dst = weighted.data() + f * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] = map[i] * src[i];
    }
    const ComplexArray k = fftshift(fft(weighted, axes), axes);
    for (std::size_t f = 0; f < frames_; ++f) {
      for (std::size_t line : lines_per_frame_[f]) {
        const cdouble* row = k.data() + f * plane + line * readout_;
        for (std::size_t r = 0; r < readout_; ++r) y[out++] = row[r];
      }
    }
  }
  return y;
}

ComplexArray ForwardOperator::adjoint(const ComplexArray& y) const {
  if (y.rank() != 1 || y.size() != measurements_)
    throw ArgumentError("adjoint: measurement length mismatch");
  const std::size_t coils = num_coils();
  const std::vector<std::size_t> axes = spatial_axes(image_shape_);
  const std::size_t plane = pe_ * readout_;
  ComplexArray x(image_shape_);
  std::size_t in = 0;
  for (std::size_t c = 0; c < coils; ++c) {
    ComplexArray k(image_shape_);
    for (std::size_t f = 0; f < frames_; ++f) {
      for (std::size_t line : lines_per_frame_[f]) {
        cdouble* row = k.data() + f * plane + line * readout_;
        for (std::size_t r = 0; r < readout_; ++r) row[r] = y[in++];
      }
    }
    const ComplexArray img = ifft(ifftshift(k, axes), axes);
    const cdouble* map = sens_.maps.data() + c * plane;
    for (std::size_t f = 0; f < frames_; ++f) {
      const cdouble* src = img.data() + f * plane;
      cdouble* dst = x.data() + f * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] += std::conj(map[i]) * src[i];
    }
  }
  return x;
}

double operator_norm_sq(const ForwardOperator& op, Rng& rng, int iters, double tol) {
  if (iters < 1) throw ArgumentError("operator_norm_sq: iters must be >= 1");
  ComplexArray b = randn_complex(rng, op.image_shape(), 1.0);
  double lambda = 0.0;
  for (int it = 0; it < iters; ++it) {
    const double nb = norm(b);
    if (nb == 0.0) {  // pathologically unlucky start; reseed
      b = randn_complex(rng, op.image_shape(), 1.0);
      continue;
    }
    b *= cdouble{1.0 / nb, 0.0};
    const ComplexArray next = op.adjoint(op.apply(b));
    const double estimate = std::real(dot(b, next));  // Rayleigh quotient
    const bool settled = it > 0 && std::abs(estimate - lambda) <= tol * std::abs(estimate);
    lambda = estimate;
    b = next;
    if (settled) break;
  }
  return lambda;
}

double estimate_noise_variance(const ComplexArray& full_kspace, double fringe_fraction) {
  if (!(fringe_fraction > 0.0 && fringe_fraction < 0.5))
    throw ArgumentError("estimate_noise_variance: fringe fraction must be in (0, 0.5)");
  if (full_kspace.rank() < 3)
    throw ArgumentError("estimate_noise_variance: expect [coils, ..., pe, ro]");
  const std::size_t ro = full_kspace.dim(full_kspace.rank() - 1);
  const std::size_t pe = full_kspace.dim(full_kspace.rank() - 2);
  const auto edge = [fringe_fraction](std::size_t n) {
    return static_cast<std::size_t>(std::floor(fringe_fraction * static_cast<double>(n)));
  };
  const std::size_t pe_edge = edge(pe), ro_edge = edge(ro);
  if (pe_edge == 0 || ro_edge == 0)
    throw ArgumentError("estimate_noise_variance: fringe region is empty");

  const std::size_t plane = pe * ro;
  const std::size_t outer = full_kspace.size() / plane;  // coils (x frames)
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t o = 0; o < outer; ++o) {
    const cdouble* p = full_kspace.data() + o * plane;
    for (std::size_t l = 0; l < pe; ++l) {
      if (l >= pe_edge && l < pe - pe_edge) continue;
      for (std::size_t r = 0; r < ro; ++r) {
        if (r >= ro_edge && r < ro - ro_edge) continue;
        acc += std::norm(p[l * ro + r]);
        ++count;
      }
    }
  }
  return acc / static_cast<double>(count);
}

SensitivityMaps sos_normalize(ComplexArray maps) {
  if (maps.rank() != 3) throw ArgumentError("sos_normalize: maps must be [coils, pe, ro]");
  const std::size_t coils = maps.dim(0);
  const std::size_t plane = maps.dim(1) * maps.dim(2);
  std::vector<double> rss(plane, 0.0);
  for (std::size_t c = 0; c < coils; ++c) {
    const cdouble* p = maps.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) rss[i] += std::norm(p[i]);
  }
  double peak = 0.0;
  for (std::size_t i = 0; i < plane; ++i) {
    rss[i] = std::sqrt(rss[i]);
    peak = std::max(peak, rss[i]);
  }
  if (peak == 0.0) throw ArgumentError("sos_normalize: all-zero maps");
  const double floor = 1e-6 * peak;
  for (std::size_t c = 0; c < coils; ++c) {
    cdouble* p = maps.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      p[i] = rss[i] < floor ? cdouble{0.0, 0.0} : p[i] / rss[i];
    }
  }
  return SensitivityMaps{std::move(maps)};
}

SensitivityMaps estimate_sos_maps(const ComplexArray& acs_or_timeavg_kspace,
                                  std::size_t acs_width) {
  const ComplexArray& k = acs_or_timeavg_kspace;
  if (k.rank() != 3) throw ArgumentError("estimate_sos_maps: expect [coils, pe, ro]");
  if (norm_sq(k) == 0.0) throw ArgumentError("estimate_sos_maps: all-zero k-space");
  if (acs_width < 2) throw ArgumentError("estimate_sos_maps: ACS width must be >= 2");
  const std::size_t coils = k.dim(0), pe = k.dim(1), ro = k.dim(2);

  const auto hamming = [](std::size_t n, std::size_t width) {
    std::vector<double> w(n, 0.0);
    const std::size_t use = std::min(width, n);
    const std::size_t start = n / 2 - use / 2;
    for (std::size_t j = 0; j < use; ++j) {
      w[start + j] =
          0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(j) /
                                 static_cast<double>(use - 1));
    }
    return w;
  };
  const std::vector<double> wl = hamming(pe, acs_width);
  const std::vector<double> wr = hamming(ro, acs_width);

  ComplexArray windowed = k;
  for (std::size_t c = 0; c < coils; ++c) {
    cdouble* p = windowed.data() + c * pe * ro;
    for (std::size_t l = 0; l < pe; ++l) {
      for (std::size_t r = 0; r < ro; ++r) p[l * ro + r] *= wl[l] * wr[r];
    }
  }
  const std::vector<std::size_t> axes{1, 2};
  ComplexArray low_res = ifft(ifftshift(windowed, axes), axes);
  return sos_normalize(std::move(low_res));
}

}  // namespace reside
