#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "reside/rng.hpp"

namespace reside {

enum class MaskKind { m1, m2, m3, custom };

std::string to_string(MaskKind kind);
MaskKind mask_kind_from_string(const std::string& name);

/// Cartesian phase-encode sampling pattern: one boolean per (frame, line).
/// The readout direction is always fully sampled.
struct SamplingMask {
  MaskKind kind = MaskKind::custom;
  std::size_t num_lines = 0;
  std::size_t num_frames = 1;
  std::size_t acs_width = 0;  // 0 when there is no frame-local ACS block
  std::vector<std::uint8_t> lines;  // [num_frames][num_lines], row-major

  bool sampled(std::size_t frame, std::size_t line) const {
    return lines[frame * num_lines + line] != 0;
  }
  std::size_t sampled_count(std::size_t frame) const;
  std::size_t sampled_total() const;
  /// Line indices sampled in one frame, ascending.
  std::vector<std::size_t> sampled_lines(std::size_t frame) const;
};

/// Fully sampled single-frame mask.
SamplingMask make_mask_full(std::size_t num_lines);

/// Pseudo-random 1D mask: centered ACS block plus one line drawn per
/// stratified bin of the remaining budget. The within-bin draw is windowed so
/// consecutive sampled lines are never farther apart than twice the uniform
/// spacing num_lines/budget.
SamplingMask make_mask_m1(Rng& rng, std::size_t num_lines, double target_R,
                          std::size_t acs_width);

/// Random 1D mask: centered ACS block plus uniform draws without replacement.
SamplingMask make_mask_m2(Rng& rng, std::size_t num_lines, double target_R,
                          std::size_t acs_width);

/// Interleaved dynamic mask: per-frame stratified draws cycled so the union
/// of frames covers every line; no frame-local ACS region.
SamplingMask make_mask_m3(Rng& rng, std::size_t num_lines, std::size_t num_frames,
                          double target_R);

/// R = C*N/M where M counts measured complex samples across coils.
/// num_pixels must be divisible by the mask's line-slot count.
double acceleration_rate(const SamplingMask& mask, std::size_t num_pixels,
                         std::size_t num_coils);

/// First line of the centered ACS block for a given width.
std::size_t acs_start(std::size_t num_lines, std::size_t acs_width);

}  // namespace reside
