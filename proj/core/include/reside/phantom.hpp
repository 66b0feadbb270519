#pragma once

#include <cstdint>
#include <vector>

#include "reside/array.hpp"
#include "reside/forward_model.hpp"
#include "reside/rng.hpp"
#include "reside/sampling.hpp"

namespace reside {

/// Gamma-variate bolus curve, peak value 1 at frame == peak_frame.
struct ContrastCurve {
  double peak_frame = 4.0;
  double sharpness = 2.5;
  double amplitude = 0.4;

  double value(double frame) const;
};

struct PhantomSpec {
  std::vector<std::size_t> spatial_shape{128, 128};  // [pe, ro]
  std::size_t num_coils = 4;
  bool dynamic = false;
  std::size_t num_frames = 16;
  /// Dynamic tissue classes; defaults: early sharp blood pool, later broader
  /// tissue ring. Order matches DynamicPhantom::class_fields.
  std::vector<ContrastCurve> curves;
  std::uint64_t seed = 0;
};

struct StaticPhantom {
  ComplexArray image;  // [pe, ro], magnitude normalized to max 1
  SensitivityMaps maps;
};

/// Dynamic series decomposed as
///   frames[f] = static_part + sum_c class_fields[c] * curves[c](f),
/// all fields sharing one global normalization.
struct DynamicPhantom {
  ComplexArray frames;  // [frames, pe, ro]
  SensitivityMaps maps;
  ComplexArray static_part;                // [pe, ro]
  std::vector<ComplexArray> class_fields;  // [pe, ro] each
  std::vector<ContrastCurve> curves;
};

/// Piecewise-smooth composite with multi-scale structure: ellipse anatomy,
/// a line grating, point pairs, small disks, seeded smooth texture blobs and
/// a smooth nonzero phase. Coil profiles are Gaussian, SOS-normalized.
StaticPhantom make_static_phantom(const PhantomSpec& spec);

DynamicPhantom make_dynamic_phantom(const PhantomSpec& spec);

struct SimulatedAcquisition {
  ComplexArray truth;
  SensitivityMaps maps;
  SamplingMask mask;
  ComplexArray y;
  double sigma2 = 0.0;     // 0 when noise is disabled
  double achieved_R = 1.0;
  double target_snr_db = 0.0;
};

/// y = A x + noise, with the noise variance chosen so that
/// 10*log10(mean |Ax|^2 / sigma2) equals target_snr_db over sampled
/// locations. Pass +infinity to disable noise (sigma2 recorded as 0).
SimulatedAcquisition simulate_acquisition(const ComplexArray& x,
                                          const SensitivityMaps& maps,
                                          const SamplingMask& mask,
                                          double target_snr_db, Rng& rng);

}  // namespace reside
