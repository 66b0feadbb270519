#pragma once

#include <cstddef>
#include <vector>

#include "reside/array.hpp"
#include "reside/rng.hpp"
#include "reside/sampling.hpp"

namespace reside {

/// Per-coil complex sensitivity profiles, stored as [coils, image shape].
/// Maps are expected to be SOS-normalized: sum_c |s_c|^2 == 1 on the object
/// support (and 0 where the support vanishes), which bounds the forward
/// operator's spectral norm by 1.
struct SensitivityMaps {
  ComplexArray maps;

  std::size_t num_coils() const { return maps.rank() == 0 ? 0 : maps.dim(0); }
  std::vector<std::size_t> image_shape() const;
};

/// Multi-coil k-space measurements packed coil-major, then frame, sampled
/// line, readout sample in raster order.
struct KSpaceData {
  ComplexArray y;
  double sigma2 = 0.0;  // per-sample complex noise variance
};

/// Linear acquisition operator: coil weighting, centered unitary 2D FFT over
/// the spatial axes, and line subsampling. Immutable after construction and
/// safe for concurrent apply/adjoint.
class ForwardOperator {
 public:
  ForwardOperator(SensitivityMaps sens, SamplingMask mask);

  const std::vector<std::size_t>& image_shape() const { return image_shape_; }
  std::size_t num_coils() const { return sens_.num_coils(); }
  std::size_t measurement_count() const { return measurements_; }
  bool dynamic() const { return frames_ > 1; }
  const SamplingMask& mask() const { return mask_; }
  const SensitivityMaps& sens() const { return sens_; }

  ComplexArray apply(const ComplexArray& x) const;
  ComplexArray adjoint(const ComplexArray& y) const;

 private:
  SensitivityMaps sens_;
  SamplingMask mask_;
  std::vector<std::size_t> image_shape_;
  std::vector<std::vector<std::size_t>> lines_per_frame_;
  std::size_t frames_ = 1;
  std::size_t pe_ = 0;       // phase-encode lines
  std::size_t readout_ = 0;  // fully sampled direction
  std::size_t measurements_ = 0;
};

/// Largest squared singular value of A via power iteration on A^H A.
/// Deterministic given the generator state.
double operator_norm_sq(const ForwardOperator& op, Rng& rng, int iters = 100,
                        double tol = 1e-10);

/// Mean |.|^2 over the signal-free corners of centered k-space: the
/// outermost fringe_fraction of lines at both phase-encode and readout
/// extremes, over all coils (and frames).
double estimate_noise_variance(const ComplexArray& full_kspace, double fringe_fraction);

/// Sensitivity maps from fully sampled (or time-averaged) k-space
/// [coils, pe, readout]: Hamming-windowed low-pass of width acs_width around
/// the k-space center, inverse FFT, then division by the root-sum-of-squares.
/// Pixels whose RSS falls below 1e-6 of its maximum are zeroed.
SensitivityMaps estimate_sos_maps(const ComplexArray& acs_or_timeavg_kspace,
                                  std::size_t acs_width);

/// Divides maps by their per-pixel RSS (zeroing sub-threshold pixels).
SensitivityMaps sos_normalize(ComplexArray maps);

}  // namespace reside
