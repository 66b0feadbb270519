#pragma once

#include <vector>

#include "reside/array.hpp"

namespace reside {

struct FrameQuality {
  double rsnr_db = 0.0;
  double ssim = 0.0;
};

struct QualityReport {
  double rsnr_db = 0.0;
  double ssim = 0.0;
  std::vector<FrameQuality> frames;  // per-frame breakdown for dynamic data
};

/// Reconstruction SNR in dB: 20*log10(||truth|| / ||truth - recon||) over
/// complex values. Returns +infinity when the arguments are identical.
double rsnr(const ComplexArray& truth, const ComplexArray& recon);

/// Mean structural similarity of the magnitude images: 11x11 Gaussian window
/// (sigma 1.5), K1=0.01, K2=0.03, dynamic range = max |truth|. Windows are
/// evaluated fully inside the image; rank-3 arrays are scored frame-wise on
/// spatial windows and averaged.
double ssim(const ComplexArray& truth, const ComplexArray& recon);

/// rsnr + ssim, with a per-frame breakdown for rank-3 (dynamic) inputs.
QualityReport assess(const ComplexArray& truth, const ComplexArray& recon);

}  // namespace reside
