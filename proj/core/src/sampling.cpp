#include "reside/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "reside/errors.hpp"

namespace reside {

std::string to_string(MaskKind kind) {
  switch (kind) {
    case MaskKind::m1: return "m1";
    case MaskKind::m2: return "m2";
    case MaskKind::m3: return "m3";
    case MaskKind::custom: return "custom";
  }
  return "custom";
}

MaskKind mask_kind_from_string(const std::string& name) {
  if (name == "m1") return MaskKind::m1;
  if (name == "m2") return MaskKind::m2;
  if (name == "m3") return MaskKind::m3;
  if (name == "custom") return MaskKind::custom;
  throw ArgumentError("unknown mask kind: " + name);
}

std::size_t SamplingMask::sampled_count(std::size_t frame) const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < num_lines; ++l) n += sampled(frame, l) ? 1 : 0;
  return n;
}

std::size_t SamplingMask::sampled_total() const {
  std::size_t n = 0;
  for (std::uint8_t v : lines) n += v ? 1 : 0;
  return n;
}

std::vector<std::size_t> SamplingMask::sampled_lines(std::size_t frame) const {
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l < num_lines; ++l) {
    if (sampled(frame, l)) out.push_back(l);
  }
  return out;
}

std::size_t acs_start(std::size_t num_lines, std::size_t acs_width) {
  return num_lines / 2 - acs_width / 2;
}

SamplingMask make_mask_full(std::size_t num_lines) {
  SamplingMask m;
  m.kind = MaskKind::custom;
  m.num_lines = num_lines;
  m.num_frames = 1;
  m.acs_width = num_lines;
  m.lines.assign(num_lines, 1);
  return m;
}

namespace {

struct Budget {
  std::size_t total;      // sampled lines per frame
  std::size_t remainder;  // outside the ACS block
};

Budget line_budget(std::size_t num_lines, double target_R, std::size_t acs_width) {
  if (num_lines == 0) throw ArgumentError("mask: num_lines must be positive");
  if (target_R < 1.0) throw ArgumentError("mask: target acceleration must be >= 1");
  if (acs_width > num_lines) throw ArgumentError("mask: ACS wider than k-space");
  const auto total = static_cast<std::size_t>(
      std::llround(static_cast<double>(num_lines) / target_R));
  if (total < acs_width)
    throw ArgumentError("mask: line budget smaller than the ACS block");
  if (total == 0) throw ArgumentError("mask: line budget is zero");
  return {std::min(total, num_lines), std::min(total, num_lines) - acs_width};
}

// Line indices outside the ACS block, ascending.
std::vector<std::size_t> non_acs_lines(std::size_t num_lines, std::size_t acs_width) {
  const std::size_t start = acs_start(num_lines, acs_width);
  std::vector<std::size_t> out;
  out.reserve(num_lines - acs_width);
  for (std::size_t l = 0; l < num_lines; ++l) {
    if (l < start || l >= start + acs_width) out.push_back(l);
  }
  return out;
}

SamplingMask blank_mask(MaskKind kind, std::size_t num_lines, std::size_t num_frames,
                        std::size_t acs_width) {
  SamplingMask m;
  m.kind = kind;
  m.num_lines = num_lines;
  m.num_frames = num_frames;
  m.acs_width = acs_width;
  m.lines.assign(num_lines * num_frames, 0);
  return m;
}

void mark_acs(SamplingMask& m) {
  const std::size_t start = acs_start(m.num_lines, m.acs_width);
  for (std::size_t f = 0; f < m.num_frames; ++f) {
    for (std::size_t l = start; l < start + m.acs_width; ++l) {
      m.lines[f * m.num_lines + l] = 1;
    }
  }
}

}  // namespace

SamplingMask make_mask_m1(Rng& rng, std::size_t num_lines, double target_R,
                          std::size_t acs_width) {
  const Budget budget = line_budget(num_lines, target_R, acs_width);
  SamplingMask m = blank_mask(MaskKind::m1, num_lines, 1, acs_width);
  mark_acs(m);
  if (budget.remainder == 0) return m;

  const std::vector<std::size_t> pool = non_acs_lines(num_lines, acs_width);
  const std::size_t rem = budget.remainder;
  const double gap_cap = 2.0 * static_cast<double>(num_lines) /
                         static_cast<double>(budget.total);
  const std::size_t bin_max =
      (pool.size() + rem - 1) / rem;  // largest stratified bin

  for (std::size_t j = 0; j < rem; ++j) {
    const std::size_t lo = j * pool.size() / rem;
    const std::size_t hi = (j + 1) * pool.size() / rem;  // exclusive
    const std::size_t bin = hi - lo;
    // Restrict the draw to a centered window so that bin_max + window span
    // never exceeds the documented 2x-uniform-spacing gap bound.
    std::size_t span = bin - 1;
    if (gap_cap > static_cast<double>(bin_max)) {
      span = std::min<std::size_t>(
          span, static_cast<std::size_t>(gap_cap - static_cast<double>(bin_max)));
    } else {
      span = 0;
    }
    const std::size_t off0 = (bin - 1 - span) / 2;
    const std::size_t pick = lo + off0 + rng.uniform_index(span + 1);
    m.lines[pool[pick]] = 1;
  }
  return m;
}

SamplingMask make_mask_m2(Rng& rng, std::size_t num_lines, double target_R,
                          std::size_t acs_width) {
  const Budget budget = line_budget(num_lines, target_R, acs_width);
  SamplingMask m = blank_mask(MaskKind::m2, num_lines, 1, acs_width);
  mark_acs(m);
  if (budget.remainder == 0) return m;

  std::vector<std::size_t> pool = non_acs_lines(num_lines, acs_width);
  // Partial Fisher-Yates: the first `remainder` entries become the draw.
  for (std::size_t j = 0; j < budget.remainder; ++j) {
    const std::size_t k = j + rng.uniform_index(pool.size() - j);
    std::swap(pool[j], pool[k]);
    m.lines[pool[j]] = 1;
  }
  return m;
}

SamplingMask make_mask_m3(Rng& rng, std::size_t num_lines, std::size_t num_frames,
                          double target_R) {
  if (num_frames == 0) throw ArgumentError("mask: num_frames must be >= 1");
  if (target_R < 1.0) throw ArgumentError("mask: target acceleration must be >= 1");
  if (target_R > static_cast<double>(num_lines))
    throw ArgumentError("mask: acceleration exceeds line count");
  const auto per_frame = static_cast<std::size_t>(
      std::llround(static_cast<double>(num_lines) / target_R));
  if (per_frame == 0) throw ArgumentError("mask: line budget is zero");

  SamplingMask m = blank_mask(MaskKind::m3, num_lines, num_frames, 0);

  // One stratum per sampled line; a seeded permutation per stratum cycles
  // across frames so that every cell is visited once per cycle.
  const std::size_t strata = per_frame;
  std::vector<std::vector<std::size_t>> order(strata);
  for (std::size_t s = 0; s < strata; ++s) {
    const std::size_t lo = s * num_lines / strata;
    const std::size_t hi = (s + 1) * num_lines / strata;
    order[s].resize(hi - lo);
    std::iota(order[s].begin(), order[s].end(), lo);
    for (std::size_t j = order[s].size(); j-- > 1;) {
      std::swap(order[s][j], order[s][rng.uniform_index(j + 1)]);
    }
  }
  for (std::size_t f = 0; f < num_frames; ++f) {
    for (std::size_t s = 0; s < strata; ++s) {
      const std::size_t line = order[s][f % order[s].size()];
      m.lines[f * num_lines + line] = 1;
    }
  }

  // Unequal stratum sizes can leave a line unseen inside the first cycle;
  // deterministically reassign redundant picks until the union covers.
  const std::size_t cycle = std::min<std::size_t>(
      num_frames, static_cast<std::size_t>(std::ceil(target_R)));
  if (static_cast<double>(num_frames) >= target_R) {
    std::vector<std::size_t> cover(num_lines, 0);
    for (std::size_t f = 0; f < num_frames; ++f) {
      for (std::size_t l = 0; l < num_lines; ++l) cover[l] += m.sampled(f, l) ? 1 : 0;
    }
    for (std::size_t l = 0; l < num_lines; ++l) {
      if (cover[l] > 0) continue;
      // Find the stratum holding line l, then a frame whose pick in that
      // stratum is covered elsewhere too.
      std::size_t s = 0;
      while (!((s * num_lines / strata) <= l && l < ((s + 1) * num_lines / strata))) ++s;
      for (std::size_t f = 0; f < cycle; ++f) {
        const std::size_t picked = order[s][f % order[s].size()];
        if (m.sampled(f, picked) && cover[picked] > 1) {
          m.lines[f * num_lines + picked] = 0;
          m.lines[f * num_lines + l] = 1;
          --cover[picked];
          ++cover[l];
          break;
        }
      }
    }
  }
  return m;
}

double acceleration_rate(const SamplingMask& mask, std::size_t num_pixels,
                         std::size_t num_coils) {
  const std::size_t slots = mask.num_lines * mask.num_frames;
  if (slots == 0 || mask.lines.empty()) throw ArgumentError("acceleration_rate: empty mask");
  const std::size_t sampled = mask.sampled_total();
  if (sampled == 0) throw ArgumentError("acceleration_rate: no sampled locations");
  if (num_coils == 0) throw ArgumentError("acceleration_rate: zero coils");
  if (num_pixels % slots != 0)
    throw ArgumentError("acceleration_rate: pixel count not divisible by line slots");
  const std::size_t readout = num_pixels / slots;
  const double m = static_cast<double>(num_coils) * static_cast<double>(sampled) *
                   static_cast<double>(readout);
  return static_cast<double>(num_coils) * static_cast<double>(num_pixels) / m;
}

}  // namespace reside
