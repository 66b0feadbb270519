#include "reside/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "reside/errors.hpp"

namespace reside {

double ContrastCurve::value(double frame) const {
  if (frame <= 0.0 || peak_frame <= 0.0) return 0.0;
  const double r = frame / peak_frame;
  return std::pow(r, sharpness) * std::exp(sharpness * (1.0 - r));
}

namespace {

struct Grid {
  std::size_t h, w;
  double x(std::size_t j) const {
    return w > 1 ? 2.0 * static_cast<double>(j) / static_cast<double>(w - 1) - 1.0 : 0.0;
  }
  double y(std::size_t i) const {
    return h > 1 ? 2.0 * static_cast<double>(i) / static_cast<double>(h - 1) - 1.0 : 0.0;
  }
};

bool inside_ellipse(double x, double y, double cx, double cy, double a, double b,
                    double rot_rad) {
  const double dx = x - cx, dy = y - cy;
  const double c = std::cos(rot_rad), s = std::sin(rot_rad);
  const double u = dx * c + dy * s, v = -dx * s + dy * c;
  return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
}

void paint_ellipse(std::vector<double>& mag, const Grid& g, double cx, double cy,
                   double a, double b, double rot_deg, double delta) {
  const double rot = rot_deg * std::numbers::pi / 180.0;
  for (std::size_t i = 0; i < g.h; ++i) {
    for (std::size_t j = 0; j < g.w; ++j) {
      if (inside_ellipse(g.x(j), g.y(i), cx, cy, a, b, rot)) mag[i * g.w + j] += delta;
    }
  }
}

void paint_gaussian(std::vector<double>& mag, const Grid& g, double cx, double cy,
                    double sigma, double amp) {
  for (std::size_t i = 0; i < g.h; ++i) {
    for (std::size_t j = 0; j < g.w; ++j) {
      const double dx = g.x(j) - cx, dy = g.y(i) - cy;
      mag[i * g.w + j] += amp * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }
  }
}

// Fine stripes inside a small box; stripe period about 6 pixels.
void paint_grating(std::vector<double>& mag, const Grid& g, double cx, double cy,
                   double half_w, double half_h, double angle_deg, double amp) {
  const double ang = angle_deg * std::numbers::pi / 180.0;
  const double freq = 0.35 * static_cast<double>(std::min(g.h, g.w));
  for (std::size_t i = 0; i < g.h; ++i) {
    for (std::size_t j = 0; j < g.w; ++j) {
      const double x = g.x(j), y = g.y(i);
      if (std::abs(x - cx) > half_w || std::abs(y - cy) > half_h) continue;
      const double u = (x - cx) * std::cos(ang) + (y - cy) * std::sin(ang);
      mag[i * g.w + j] += amp * (std::sin(std::numbers::pi * freq * u) > 0.0 ? 1.0 : -1.0);
    }
  }
}

double smooth_phase(double x, double y) {
  return 0.7 * std::sin(1.4 * x + 0.5) * std::cos(1.1 * y - 0.4) + 0.25 * (x + y);
}

// Seeded low-amplitude smooth blobs confined to the interior.
void paint_texture(std::vector<double>& mag, const Grid& g, Rng& rng, int blobs,
                   double amp) {
  for (int b = 0; b < blobs; ++b) {
    const double cx = -0.6 + 1.2 * rng.uniform();
    const double cy = -0.6 + 1.2 * rng.uniform();
    const double sigma = 0.03 + 0.09 * rng.uniform();
    const double a = amp * (2.0 * rng.uniform() - 1.0);
    paint_gaussian(mag, g, cx, cy, sigma, a);
  }
}

ComplexArray to_complex_image(const std::vector<double>& mag, const Grid& g) {
  ComplexArray img({g.h, g.w});
  for (std::size_t i = 0; i < g.h; ++i) {
    for (std::size_t j = 0; j < g.w; ++j) {
      const double m = std::max(0.0, mag[i * g.w + j]);
      const double ph = smooth_phase(g.x(j), g.y(i));
      img[i * g.w + j] = cdouble{m * std::cos(ph), m * std::sin(ph)};
    }
  }
  return img;
}

SensitivityMaps make_coil_maps(const Grid& g, std::size_t coils, Rng& rng) {
  ComplexArray maps({coils, g.h, g.w});
  for (std::size_t c = 0; c < coils; ++c) {
    const double ang = 2.0 * std::numbers::pi * static_cast<double>(c) /
                           static_cast<double>(coils) +
                       0.37;
    const double cx = 1.3 * std::cos(ang), cy = 1.3 * std::sin(ang);
    const double width = 1.35 + 0.1 * rng.uniform();
    const double px = 0.6 * (2.0 * rng.uniform() - 1.0);
    const double py = 0.6 * (2.0 * rng.uniform() - 1.0);
    const double p0 = 2.0 * std::numbers::pi * rng.uniform();
    for (std::size_t i = 0; i < g.h; ++i) {
      for (std::size_t j = 0; j < g.w; ++j) {
        const double x = g.x(j), y = g.y(i);
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        const double m = 0.08 + std::exp(-d2 / (width * width));
        const double ph = px * x + py * y + p0;
        maps[(c * g.h + i) * g.w + j] = cdouble{m * std::cos(ph), m * std::sin(ph)};
      }
    }
  }
  return sos_normalize(std::move(maps));
}

void check_spatial(const PhantomSpec& spec) {
  if (spec.spatial_shape.size() != 2)
    throw ArgumentError("phantom: spatial shape must be [pe, ro]");
  if (spec.spatial_shape[0] < 32 || spec.spatial_shape[1] < 32)
    throw ArgumentError("phantom: shape must be at least 32x32");
  if (spec.num_coils == 0) throw ArgumentError("phantom: need at least one coil");
}

}  // namespace

StaticPhantom make_static_phantom(const PhantomSpec& spec) {
  check_spatial(spec);
  const Grid g{spec.spatial_shape[0], spec.spatial_shape[1]};
  Rng rng = Rng(spec.seed).fork(0x70617468ull);

  std::vector<double> mag(g.h * g.w, 0.0);
  paint_ellipse(mag, g, 0.0, 0.0, 0.92, 0.88, 0.0, 0.85);   // skull
  paint_ellipse(mag, g, 0.0, 0.0, 0.84, 0.80, 0.0, -0.40);  // tissue interior
  paint_ellipse(mag, g, 0.24, 0.05, 0.12, 0.32, 18.0, 0.18);
  paint_ellipse(mag, g, -0.24, 0.05, 0.16, 0.38, -18.0, -0.14);
  paint_ellipse(mag, g, 0.0, -0.42, 0.20, 0.14, 0.0, 0.16);
  // multi-scale disks
  paint_ellipse(mag, g, 0.42, -0.30, 0.030, 0.030, 0.0, 0.22);
  paint_ellipse(mag, g, -0.42, -0.30, 0.060, 0.060, 0.0, -0.16);
  paint_ellipse(mag, g, 0.0, 0.10, 0.120, 0.120, 0.0, 0.10);
  // fine detail: stripes and point pairs
  paint_grating(mag, g, 0.0, 0.48, 0.28, 0.10, 10.0, 0.20);
  for (int p = 0; p < 3; ++p) {
    const double cx = -0.35 + 0.35 * p;
    const double sep = 3.0 / static_cast<double>(g.w - 1);  // ~1.5 px gap
    paint_gaussian(mag, g, cx - sep, -0.62, 0.012, 0.30);
    paint_gaussian(mag, g, cx + sep, -0.62, 0.012, 0.30);
  }
  paint_texture(mag, g, rng, 24, 0.06);

  double peak = 0.0;
  for (double& v : mag) {
    v = std::max(0.0, v);
    peak = std::max(peak, v);
  }
  for (double& v : mag) v /= peak;

  StaticPhantom out;
  out.image = to_complex_image(mag, g);
  Rng coil_rng = rng.fork(0x636f696cull);
  out.maps = make_coil_maps(g, spec.num_coils, coil_rng);
  return out;
}

DynamicPhantom make_dynamic_phantom(const PhantomSpec& spec) {
  check_spatial(spec);
  if (spec.num_frames < 2) throw ArgumentError("phantom: dynamic needs >= 2 frames");
  const Grid g{spec.spatial_shape[0], spec.spatial_shape[1]};
  const double f_count = static_cast<double>(spec.num_frames);
  Rng rng = Rng(spec.seed).fork(0x64796e70ull);

  std::vector<ContrastCurve> curves = spec.curves;
  if (curves.empty()) {
    curves.push_back({0.28 * f_count, 2.5, 0.45});  // blood pool: early, sharp
    curves.push_back({0.55 * f_count, 2.0, 0.30});  // tissue: later, broader
  }

  // Static anatomy.
  std::vector<double> base(g.h * g.w, 0.0);
  paint_ellipse(base, g, 0.0, 0.0, 0.86, 0.72, 0.0, 0.50);
  paint_ellipse(base, g, -0.45, -0.35, 0.18, 0.14, 25.0, 0.18);
  paint_ellipse(base, g, 0.45, -0.35, 0.18, 0.14, -25.0, -0.12);
  paint_grating(base, g, 0.0, 0.45, 0.22, 0.08, 0.0, 0.12);
  paint_texture(base, g, rng, 16, 0.05);

  // Dynamic classes: central pool, then concentric rings outward.
  std::vector<std::vector<double>> fields;
  for (std::size_t c = 0; c < curves.size(); ++c) {
    std::vector<double> f(g.h * g.w, 0.0);
    const double r_in = c == 0 ? 0.0 : 0.24 + 0.18 * static_cast<double>(c - 1);
    const double r_out = c == 0 ? 0.20 : 0.24 + 0.18 * static_cast<double>(c);
    for (std::size_t i = 0; i < g.h; ++i) {
      for (std::size_t j = 0; j < g.w; ++j) {
        const double dx = g.x(j), dy = g.y(i) + 0.08;
        const double r = std::sqrt(dx * dx + dy * dy * 1.4);
        if (r >= r_in && r < r_out) f[i * g.w + j] = curves[c].amplitude;
      }
    }
    fields.push_back(std::move(f));
  }

  // Global normalization factor from the brightest frame.
  double peak = 1e-300;
  for (std::size_t fr = 0; fr < spec.num_frames; ++fr) {
    for (std::size_t i = 0; i < g.h * g.w; ++i) {
      double v = std::max(0.0, base[i]);
      for (std::size_t c = 0; c < curves.size(); ++c) {
        v += fields[c][i] * curves[c].value(static_cast<double>(fr));
      }
      peak = std::max(peak, v);
    }
  }

  DynamicPhantom out;
  out.curves = curves;
  for (double& v : base) v = std::max(0.0, v) / peak;
  out.static_part = to_complex_image(base, g);
  for (auto& f : fields) {
    for (double& v : f) v /= peak;
    // Class fields carry the same smooth phase as the static anatomy.
    out.class_fields.push_back(to_complex_image(f, g));
  }

  out.frames = ComplexArray({spec.num_frames, g.h, g.w});
  for (std::size_t fr = 0; fr < spec.num_frames; ++fr) {
    cdouble* dst = out.frames.data() + fr * g.h * g.w;
    for (std::size_t i = 0; i < g.h * g.w; ++i) {
      cdouble v = out.static_part[i];
      for (std::size_t c = 0; c < curves.size(); ++c) {
        v += out.class_fields[c][i] * curves[c].value(static_cast<double>(fr));
      }
      dst[i] = v;
    }
  }
  Rng coil_rng = rng.fork(0x636f696cull);
  out.maps = make_coil_maps(g, spec.num_coils, coil_rng);
  return out;
}

SimulatedAcquisition simulate_acquisition(const ComplexArray& x,
                                          const SensitivityMaps& maps,
                                          const SamplingMask& mask,
                                          double target_snr_db, Rng& rng) {
  ForwardOperator op(maps, mask);
  ComplexArray clean = op.apply(x);
  const double signal_power = mean_power(clean);
  if (signal_power == 0.0) throw ArgumentError("simulate_acquisition: zero-signal image");

  SimulatedAcquisition out;
  out.truth = x;
  out.maps = maps;
  out.mask = mask;
  out.target_snr_db = target_snr_db;
  out.achieved_R = acceleration_rate(mask, x.size(), maps.num_coils());
  if (std::isinf(target_snr_db) && target_snr_db > 0.0) {
    out.sigma2 = 0.0;
    out.y = std::move(clean);
    return out;
  }
  out.sigma2 = signal_power / std::pow(10.0, target_snr_db / 10.0);
  ComplexArray noise = randn_complex(rng, {clean.size()}, out.sigma2);
  out.y = std::move(clean);
  out.y += noise;
  return out;
}

}  // namespace reside
