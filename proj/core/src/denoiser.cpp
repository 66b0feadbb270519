#include "reside/denoiser.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "reside/io.hpp"
#include "reside/threading.hpp"

namespace reside {

namespace {

std::size_t taps_for(int spatial_dims) {
  return spatial_dims == 2 ? 9 : 27;
}

void check_architecture(const DenoiserParams& p) {
  if (p.spatial_dims != 2 && p.spatial_dims != 3)
    throw ArgumentError("denoiser: spatial_dims must be 2 or 3");
  if (p.layers.empty()) throw ArgumentError("denoiser: no layers");
  if (p.layers.front().in_channels != 2 || p.layers.back().out_channels != 2)
    throw ArgumentError("denoiser: network must map 2 channels to 2 channels");
  const std::size_t taps = taps_for(p.spatial_dims);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const ConvLayer& L = p.layers[l];
    if (L.weights.size() != L.out_channels * L.in_channels * taps ||
        L.bias.size() != L.out_channels)
      throw ArgumentError("denoiser: layer buffer sizes inconsistent");
    if (l + 1 < p.layers.size() &&
        L.out_channels != p.layers[l + 1].in_channels)
      throw ArgumentError("denoiser: channel counts do not chain");
  }
}

// ---- convolution kernels -------------------------------------------------
// Feature maps are [channels][spatial] in one contiguous double buffer.
// Kernels are 3 taps per axis with zero padding, so shapes are preserved.

void conv2d_forward(const double* in, std::size_t cin, std::size_t h, std::size_t w,
                    const ConvLayer& L, double* out) {
  const std::size_t hw = h * w;
  for (std::size_t oc = 0; oc < L.out_channels; ++oc) {
    std::fill(out + oc * hw, out + (oc + 1) * hw, L.bias[oc]);
  }
  for (std::size_t oc = 0; oc < L.out_channels; ++oc) {
    double* o = out + oc * hw;
    for (std::size_t ic = 0; ic < cin; ++ic) {
      const double* x = in + ic * hw;
      const double* wk = L.weights.data() + (oc * cin + ic) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const std::ptrdiff_t dy = ky - 1;
        const std::size_t y0 = ky == 0 ? 1 : 0;
        const std::size_t y1 = ky == 2 ? h - 1 : h;
        for (int kx = 0; kx < 3; ++kx) {
          const double wv = wk[ky * 3 + kx];
          if (wv == 0.0) continue;
          const std::ptrdiff_t dx = kx - 1;
          const std::size_t x0 = kx == 0 ? 1 : 0;
          const std::size_t x1 = kx == 2 ? w - 1 : w;
          for (std::size_t y = y0; y < y1; ++y) {
            const double* src = x + (y + dy) * w + x0 + dx;
            double* dst = o + y * w + x0;
            const std::size_t len = x1 - x0;
            for (std::size_t i = 0; i < len; ++i) dst[i] += wv * src[i];
          }
        }
      }
    }
  }
}

void conv2d_backward_input(const double* gout, std::size_t cin, std::size_t h,
                           std::size_t w, const ConvLayer& L, double* gin) {
  const std::size_t hw = h * w;
  for (std::size_t oc = 0; oc < L.out_channels; ++oc) {
    const double* g = gout + oc * hw;
    for (std::size_t ic = 0; ic < cin; ++ic) {
      double* gi = gin + ic * hw;
      const double* wk = L.weights.data() + (oc * cin + ic) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const std::ptrdiff_t dy = ky - 1;
        const std::size_t y0 = ky == 0 ? 1 : 0;
        const std::size_t y1 = ky == 2 ? h - 1 : h;
        for (int kx = 0; kx < 3; ++kx) {
          const double wv = wk[ky * 3 + kx];
          if (wv == 0.0) continue;
          const std::ptrdiff_t dx = kx - 1;
          const std::size_t x0 = kx == 0 ? 1 : 0;
          const std::size_t x1 = kx == 2 ? w - 1 : w;
          for (std::size_t y = y0; y < y1; ++y) {
            double* dst = gi + (y + dy) * w + x0 + dx;
            const double* src = g + y * w + x0;
            const std::size_t len = x1 - x0;
            for (std::size_t i = 0; i < len; ++i) dst[i] += wv * src[i];
          }
        }
      }
    }
  }
}

void conv2d_backward_params(const double* in, const double* gout, std::size_t cin,
                            std::size_t h, std::size_t w, const ConvLayer& L,
                            double* gw, double* gb) {
  const std::size_t hw = h * w;
  for (std::size_t oc = 0; oc < L.out_channels; ++oc) {
    const double* g = gout + oc * hw;
    double acc_b = 0.0;
    for (std::size_t i = 0; i < hw; ++i) acc_b += g[i];
    gb[oc] += acc_b;
    for (std::size_t ic = 0; ic < cin; ++ic) {
      const double* x = in + ic * hw;
      double* wk = gw + (oc * cin + ic) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const std::ptrdiff_t dy = ky - 1;
        const std::size_t y0 = ky == 0 ? 1 : 0;
        const std::size_t y1 = ky == 2 ? h - 1 : h;
        for (int kx = 0; kx < 3; ++kx) {
          const std::ptrdiff_t dx = kx - 1;
          const std::size_t x0 = kx == 0 ? 1 : 0;
          const std::size_t x1 = kx == 2 ? w - 1 : w;
          double acc = 0.0;
          for (std::size_t y = y0; y < y1; ++y) {
            const double* src = x + (y + dy) * w + x0 + dx;
            const double* gr = g + y * w + x0;
            const std::size_t len = x1 - x0;
            for (std::size_t i = 0; i < len; ++i) acc += gr[i] * src[i];
          }
          wk[ky * 3 + kx] += acc;
        }
      }
    }
  }
}

void conv3d_forward(const double* in, std::size_t cin, std::size_t d, std::size_t h,
                    std::size_t w, const ConvLayer& L, double* out) {
  const std::size_t hw = h * w, dhw = d * hw;
  for (std::size_t oc = 0; oc < L.out_channels; ++oc) {
    std::fill(out + oc * dhw, out + (oc + 1) * dhw, L.bias[oc]);
  }
  for (std::size_t oc = 0; oc < L.out_channels; ++oc) {
    double* o = out + oc * dhw;
    for (std::size_t ic = 0; ic < cin; ++ic) {
      const double* x = in + ic * dhw;
      const double* wk = L.weights.data() + (oc * cin + ic) * 27;
      for (int kz = 0; kz < 3; ++kz) {
        const std::ptrdiff_t dz = kz - 1;
        const std::size_t z0 = kz == 0 ? 1 : 0;
        const std::size_t z1 = kz == 2 ? d - 1 : d;
        for (int ky = 0; ky < 3; ++ky) {
          const std::ptrdiff_t dy = ky - 1;
          const std::size_t y0 = ky == 0 ? 1 : 0;
          const std::size_t y1 = ky == 2 ? h - 1 : h;
          for (int kx = 0; kx < 3; ++kx) {
            const double wv = wk[(kz * 3 + ky) * 3 + kx];
            if (wv == 0.0) continue;
            const std::ptrdiff_t dx = kx - 1;
            const std::size_t x0 = kx == 0 ? 1 : 0;
            const std::size_t x1 = kx == 2 ? w - 1 : w;
            for (std::size_t z = z0; z < z1; ++z) {
              for (std::size_t y = y0; y < y1; ++y) {
                const double* src = x + (z + dz) * hw + (y + dy) * w + x0 + dx;
                double* dst = o + z * hw + y * w + x0;
                const std::size_t len = x1 - x0;
                for (std::size_t i = 0; i < len; ++i) dst[i] += wv * src[i];
              }
            }
          }
        }
      }
    }
  }
}

void conv3d_backward_input(const double* gout, std::size_t cin, std::size_t d,
                           std::size_t h, std::size_t w, const ConvLayer& L,
                           double* gin) {
  const std::size_t hw = h * w, dhw = d * hw;
  for (std::size_t oc = 0; oc < L.out_channels; ++oc) {
    const double* g = gout + oc * dhw;
    for (std::size_t ic = 0; ic < cin; ++ic) {
      double* gi = gin + ic * dhw;
      const double* wk = L.weights.data() + (oc * cin + ic) * 27;
      for (int kz = 0; kz < 3; ++kz) {
        const std::ptrdiff_t dz = kz - 1;
        const std::size_t z0 = kz == 0 ? 1 : 0;
        const std::size_t z1 = kz == 2 ? d - 1 : d;
        for (int ky = 0; ky < 3; ++ky) {
          const std::ptrdiff_t dy = ky - 1;
          const std::size_t y0 = ky == 0 ? 1 : 0;
          const std::size_t y1 = ky == 2 ? h - 1 : h;
          for (int kx = 0; kx < 3; ++kx) {
            const double wv = wk[(kz * 3 + ky) * 3 + kx];
            if (wv == 0.0) continue;
            const std::ptrdiff_t dx = kx - 1;
            const std::size_t x0 = kx == 0 ? 1 : 0;
            const std::size_t x1 = kx == 2 ? w - 1 : w;
            for (std::size_t z = z0; z < z1; ++z) {
              for (std::size_t y = y0; y < y1; ++y) {
                double* dst = gi + (z + dz) * hw + (y + dy) * w + x0 + dx;
                const double* src = g + z * hw + y * w + x0;
                const std::size_t len = x1 - x0;
                for (std::size_t i = 0; i < len; ++i) dst[i] += wv * src[i];
              }
            }
          }
        }
      }
    }
  }
}

void conv3d_backward_params(const double* in, const double* gout, std::size_t cin,
                            std::size_t d, std::size_t h, std::size_t w,
                            const ConvLayer& L, double* gw, double* gb) {
  const std::size_t hw = h * w, dhw = d * hw;
  for (std::size_t oc = 0; oc < L.out_channels; ++oc) {
    const double* g = gout + oc * dhw;
    double acc_b = 0.0;
    for (std::size_t i = 0; i < dhw; ++i) acc_b += g[i];
    gb[oc] += acc_b;
    for (std::size_t ic = 0; ic < cin; ++ic) {
      const double* x = in + ic * dhw;
      double* wk = gw + (oc * cin + ic) * 27;
      for (int kz = 0; kz < 3; ++kz) {
        const std::ptrdiff_t dz = kz - 1;
        const std::size_t z0 = kz == 0 ? 1 : 0;
        const std::size_t z1 = kz == 2 ? d - 1 : d;
        for (int ky = 0; ky < 3; ++ky) {
          const std::ptrdiff_t dy = ky - 1;
          const std::size_t y0 = ky == 0 ? 1 : 0;
          const std::size_t y1 = ky == 2 ? h - 1 : h;
          for (int kx = 0; kx < 3; ++kx) {
            const std::ptrdiff_t dx = kx - 1;
            const std::size_t x0 = kx == 0 ? 1 : 0;
            const std::size_t x1 = kx == 2 ? w - 1 : w;
            double acc = 0.0;
            for (std::size_t z = z0; z < z1; ++z) {
              for (std::size_t y = y0; y < y1; ++y) {
                const double* src = x + (z + dz) * hw + (y + dy) * w + x0 + dx;
                const double* gr = g + z * hw + y * w + x0;
                const std::size_t len = x1 - x0;
                for (std::size_t i = 0; i < len; ++i) acc += gr[i] * src[i];
              }
            }
            wk[(kz * 3 + ky) * 3 + kx] += acc;
          }
        }
      }
    }
  }
}

struct SpatialDims {
  std::size_t d = 1, h = 0, w = 0;
  std::size_t npix() const { return d * h * w; }
};

SpatialDims spatial_of(const DenoiserParams& p, const std::vector<std::size_t>& shape) {
  if (static_cast<int>(shape.size()) != p.spatial_dims)
    throw ArgumentError("denoiser: input rank does not match the network dimensionality");
  SpatialDims s;
  if (p.spatial_dims == 2) {
    s.h = shape[0];
    s.w = shape[1];
  } else {
    s.d = shape[0];
    s.h = shape[1];
    s.w = shape[2];
  }
  return s;
}

void conv_forward(const DenoiserParams& p, const SpatialDims& s, const double* in,
                  std::size_t cin, const ConvLayer& L, double* out) {
  if (p.spatial_dims == 2) {
    conv2d_forward(in, cin, s.h, s.w, L, out);
  } else {
    conv3d_forward(in, cin, s.d, s.h, s.w, L, out);
  }
}

void relu_inplace(double* v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) v[i] = v[i] > 0.0 ? v[i] : 0.0;
}

// Runs the network body on a 2-channel input; returns all post-layer
// activations (ReLU applied everywhere except after the last layer).
std::vector<std::vector<double>> net_forward(const DenoiserParams& p,
                                             const SpatialDims& s,
                                             const std::vector<double>& x0) {
  std::vector<std::vector<double>> acts;
  acts.reserve(p.layers.size());
  const std::vector<double>* cur = &x0;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const ConvLayer& L = p.layers[l];
    std::vector<double> out(L.out_channels * s.npix());
    conv_forward(p, s, cur->data(), L.in_channels, L, out.data());
    if (l + 1 < p.layers.size()) relu_inplace(out.data(), out.size());
    acts.push_back(std::move(out));
    cur = &acts.back();
  }
  return acts;
}

std::vector<double> split_channels(const ComplexArray& u) {
  std::vector<double> x(2 * u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    x[i] = u[i].real();
    x[u.size() + i] = u[i].imag();
  }
  return x;
}

DenoiserParams zero_like(const DenoiserParams& p) {
  DenoiserParams g;
  g.spatial_dims = p.spatial_dims;
  g.iteration = p.iteration;
  g.layers.reserve(p.layers.size());
  for (const ConvLayer& L : p.layers) {
    ConvLayer z;
    z.in_channels = L.in_channels;
    z.out_channels = L.out_channels;
    z.weights.assign(L.weights.size(), 0.0);
    z.bias.assign(L.bias.size(), 0.0);
    g.layers.push_back(std::move(z));
  }
  return g;
}

// Accumulates loss (unnormalized sum of squared errors) and, when grad is
// non-null, d(loss)/d(params) scaled by `grad_scale`, for one patch.
double patch_loss_grad(const DenoiserParams& p, const SpatialDims& s,
                       const ComplexArray& noisy, const ComplexArray& clean,
                       double grad_scale, DenoiserParams* grad) {
  const std::size_t npix = s.npix();
  const std::vector<double> x0 = split_channels(noisy);
  const auto acts = net_forward(p, s, x0);
  const std::vector<double>& n_out = acts.back();

  // f(noisy) = noisy - net(noisy); error e = f(noisy) - clean.
  double loss = 0.0;
  std::vector<double> g(2 * npix);
  for (std::size_t i = 0; i < npix; ++i) {
    const double e_re = (noisy[i].real() - n_out[i]) - clean[i].real();
    const double e_im = (noisy[i].imag() - n_out[npix + i]) - clean[i].imag();
    loss += e_re * e_re + e_im * e_im;
    // dL/d(net output) = -2 e * grad_scale
    g[i] = -2.0 * e_re * grad_scale;
    g[npix + i] = -2.0 * e_im * grad_scale;
  }
  if (grad == nullptr) return loss;

  for (std::size_t l = p.layers.size(); l-- > 0;) {
    const ConvLayer& L = p.layers[l];
    const std::vector<double>& input = l == 0 ? x0 : acts[l - 1];
    ConvLayer& GL = grad->layers[l];
    if (p.spatial_dims == 2) {
      conv2d_backward_params(input.data(), g.data(), L.in_channels, s.h, s.w, L,
                             GL.weights.data(), GL.bias.data());
    } else {
      conv3d_backward_params(input.data(), g.data(), L.in_channels, s.d, s.h, s.w, L,
                             GL.weights.data(), GL.bias.data());
    }
    if (l == 0) break;
    std::vector<double> gin(L.in_channels * npix, 0.0);
    if (p.spatial_dims == 2) {
      conv2d_backward_input(g.data(), L.in_channels, s.h, s.w, L, gin.data());
    } else {
      conv3d_backward_input(g.data(), L.in_channels, s.d, s.h, s.w, L, gin.data());
    }
    const std::vector<double>& mask = acts[l - 1];  // post-ReLU values
    for (std::size_t i = 0; i < gin.size(); ++i) {
      if (mask[i] <= 0.0) gin[i] = 0.0;
    }
    g = std::move(gin);
  }
  return loss;
}

void add_params(DenoiserParams& into, const DenoiserParams& from) {
  for (std::size_t l = 0; l < into.layers.size(); ++l) {
    ConvLayer& a = into.layers[l];
    const ConvLayer& b = from.layers[l];
    for (std::size_t i = 0; i < a.weights.size(); ++i) a.weights[i] += b.weights[i];
    for (std::size_t i = 0; i < a.bias.size(); ++i) a.bias[i] += b.bias[i];
  }
}

LossGrad loss_and_grad_span(const DenoiserParams& p,
                            const ComplexArray* const* noisy,
                            const ComplexArray* const* clean, std::size_t count) {
  check_architecture(p);
  if (count == 0) throw ArgumentError("loss_and_grad: empty patch set");
  const SpatialDims dims = spatial_of(p, noisy[0]->shape());
  for (std::size_t i = 0; i < count; ++i) {
    if (!noisy[i]->same_shape(*clean[i]) || noisy[i]->shape() != noisy[0]->shape())
      throw ArgumentError("loss_and_grad: patch shapes differ");
  }
  const double inv_norm =
      1.0 / (static_cast<double>(count) * static_cast<double>(dims.npix()));

  // Fixed number of accumulation slots keeps the reduction order independent
  // of the worker count.
  const std::size_t slots = std::min<std::size_t>(count, 8);
  std::vector<DenoiserParams> grads;
  std::vector<double> losses(slots, 0.0);
  grads.reserve(slots);
  for (std::size_t sl = 0; sl < slots; ++sl) grads.push_back(zero_like(p));

  parallel_for(slots, [&](std::size_t sl) {
    const std::size_t begin = sl * count / slots;
    const std::size_t end = (sl + 1) * count / slots;
    for (std::size_t i = begin; i < end; ++i) {
      losses[sl] +=
          patch_loss_grad(p, dims, *noisy[i], *clean[i], inv_norm, &grads[sl]);
    }
  });

  LossGrad out;
  out.grad = std::move(grads[0]);
  out.loss = losses[0];
  for (std::size_t sl = 1; sl < slots; ++sl) {
    add_params(out.grad, grads[sl]);
    out.loss += losses[sl];
  }
  out.loss *= inv_norm;
  return out;
}

}  // namespace

DenoiserParams DenoiserParams::init(int spatial_dims, int num_layers, int kernels,
                                    Rng& rng) {
  if (spatial_dims != 2 && spatial_dims != 3)
    throw ArgumentError("denoiser: spatial_dims must be 2 or 3");
  if (num_layers < 1) throw ArgumentError("denoiser: need at least one layer");
  if (kernels < 1) throw ArgumentError("denoiser: need at least one kernel");

  DenoiserParams p;
  p.spatial_dims = spatial_dims;
  const std::size_t taps = taps_for(spatial_dims);
  for (int l = 0; l < num_layers; ++l) {
    ConvLayer L;
    L.in_channels = l == 0 ? 2 : static_cast<std::size_t>(kernels);
    L.out_channels = l == num_layers - 1 ? 2 : static_cast<std::size_t>(kernels);
    L.weights.assign(L.out_channels * L.in_channels * taps, 0.0);
    L.bias.assign(L.out_channels, 0.0);
    if (l < num_layers - 1) {  // final layer stays zero: identity start
      const double stddev =
          std::sqrt(2.0 / static_cast<double>(L.in_channels * taps));
      for (double& w : L.weights) w = stddev * rng.gaussian();
    }
    p.layers.push_back(std::move(L));
  }
  return p;
}

std::size_t DenoiserParams::parameter_count() const {
  std::size_t n = 0;
  for (const ConvLayer& L : layers) n += L.weights.size() + L.bias.size();
  return n;
}

int DenoiserParams::kernels_per_layer() const {
  return layers.empty() ? 0 : static_cast<int>(layers.front().out_channels);
}

bool DenoiserParams::same_architecture(const DenoiserParams& o) const {
  if (spatial_dims != o.spatial_dims || layers.size() != o.layers.size()) return false;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].in_channels != o.layers[l].in_channels ||
        layers[l].out_channels != o.layers[l].out_channels)
      return false;
  }
  return true;
}

bool DenoiserParams::all_finite() const {
  for (const ConvLayer& L : layers) {
    for (double v : L.weights) {
      if (!std::isfinite(v)) return false;
    }
    for (double v : L.bias) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

ComplexArray denoiser_forward(const DenoiserParams& p, const ComplexArray& u) {
  check_architecture(p);
  const SpatialDims s = spatial_of(p, u.shape());
  const std::vector<double> x0 = split_channels(u);
  const auto acts = net_forward(p, s, x0);
  const std::vector<double>& n_out = acts.back();
  ComplexArray out(u.shape());
  const std::size_t npix = s.npix();
  for (std::size_t i = 0; i < npix; ++i) {
    out[i] = cdouble{u[i].real() - n_out[i], u[i].imag() - n_out[npix + i]};
  }
  return out;
}

PatchSet sample_patches(const std::vector<const ComplexArray*>& images,
                        std::size_t count, const std::vector<std::size_t>& patch_shape,
                        Rng& rng) {
  if (images.empty()) throw ArgumentError("sample_patches: no source images");
  if (count == 0) throw ArgumentError("sample_patches: zero patch count");
  for (const ComplexArray* img : images) {
    if (img->rank() != patch_shape.size())
      throw ArgumentError("sample_patches: patch rank does not match images");
    for (std::size_t d = 0; d < patch_shape.size(); ++d) {
      if (patch_shape[d] == 0 || patch_shape[d] > img->dim(d))
        throw ArgumentError("sample_patches: patch larger than image");
    }
  }

  PatchSet set;
  const std::size_t k = images.size();
  for (std::size_t which = 0; which < k; ++which) {
    const std::size_t quota = count / k + (which < count % k ? 1 : 0);
    const ComplexArray& img = *images[which];
    const auto img_strides = strides_of(img.shape());
    const auto patch_strides = strides_of(patch_shape);
    const std::size_t patch_len = shape_size(patch_shape);
    for (std::size_t q = 0; q < quota; ++q) {
      std::vector<std::size_t> corner(patch_shape.size());
      for (std::size_t d = 0; d < patch_shape.size(); ++d) {
        corner[d] = rng.uniform_index(img.dim(d) - patch_shape[d] + 1);
      }
      ComplexArray patch(patch_shape);
      std::vector<std::size_t> idx(patch_shape.size(), 0);
      for (std::size_t flat = 0; flat < patch_len; ++flat) {
        std::size_t src = 0;
        for (std::size_t d = 0; d < patch_shape.size(); ++d)
          src += (corner[d] + idx[d]) * img_strides[d];
        patch[flat] = img[src];
        for (std::size_t d = patch_shape.size(); d-- > 0;) {
          if (++idx[d] < patch_shape[d]) break;
          idx[d] = 0;
        }
      }
      set.patches.push_back(std::move(patch));
      set.sources.push_back({which, corner});
    }
  }
  return set;
}

PatchSet sample_patches(const std::vector<ComplexArray>& images, std::size_t count,
                        const std::vector<std::size_t>& patch_shape, Rng& rng) {
  std::vector<const ComplexArray*> refs;
  refs.reserve(images.size());
  for (const ComplexArray& img : images) refs.push_back(&img);
  return sample_patches(refs, count, patch_shape, rng);
}

double snr_to_variance(const std::vector<const ComplexArray*>& signals, double snr_db) {
  double power = 0.0;
  std::size_t count = 0;
  for (const ComplexArray* s : signals) {
    power += norm_sq(*s);
    count += s->size();
  }
  if (count == 0 || power == 0.0)
    throw ArgumentError("snr_to_variance: zero signal");
  const double mean = power / static_cast<double>(count);
  return mean / std::pow(10.0, snr_db / 10.0);
}

double snr_to_variance(const ComplexArray& signal, double snr_db) {
  return snr_to_variance(std::vector<const ComplexArray*>{&signal}, snr_db);
}

LossGrad loss_and_grad(const DenoiserParams& p, const std::vector<ComplexArray>& noisy,
                       const std::vector<ComplexArray>& clean) {
  if (noisy.size() != clean.size())
    throw ArgumentError("loss_and_grad: patch count mismatch");
  std::vector<const ComplexArray*> np, cp;
  np.reserve(noisy.size());
  cp.reserve(clean.size());
  for (const auto& a : noisy) np.push_back(&a);
  for (const auto& a : clean) cp.push_back(&a);
  return loss_and_grad_span(p, np.data(), cp.data(), np.size());
}

namespace {

struct AdamState {
  std::vector<double> m, v;
  long step = 0;
};

// Applies one Adam step; grad and params are traversed in declaration order.
void adam_step(DenoiserParams& p, const DenoiserParams& g, AdamState& st, double lr) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++st.step;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
  std::size_t k = 0;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto update = [&](double& theta, double grad) {
      st.m[k] = b1 * st.m[k] + (1.0 - b1) * grad;
      st.v[k] = b2 * st.v[k] + (1.0 - b2) * grad * grad;
      theta -= lr * (st.m[k] / c1) / (std::sqrt(st.v[k] / c2) + eps);
      ++k;
    };
    for (std::size_t i = 0; i < p.layers[l].weights.size(); ++i)
      update(p.layers[l].weights[i], g.layers[l].weights[i]);
    for (std::size_t i = 0; i < p.layers[l].bias.size(); ++i)
      update(p.layers[l].bias[i], g.layers[l].bias[i]);
  }
}

}  // namespace

TrainResult train(DenoiserParams initial, const PatchSet& patches,
                  const TrainConfig& cfg, Rng& rng) {
  check_architecture(initial);
  if (patches.size() == 0) throw ArgumentError("train: empty patch set");
  if (cfg.epochs < 1) throw ArgumentError("train: epochs must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw ArgumentError("train: learning rate must be > 0");
  if (cfg.batch_size < 1) throw ArgumentError("train: batch size must be >= 1");
  if (cfg.noise_variance < 0.0) throw ArgumentError("train: negative noise variance");

  const std::size_t count = patches.size();
  const std::size_t batch = std::min<std::size_t>(cfg.batch_size, count);

  TrainResult result;
  result.params = std::move(initial);
  AdamState adam;
  adam.m.assign(result.params.parameter_count(), 0.0);
  adam.v.assign(adam.m.size(), 0.0);
  DenoiserParams last_finite = result.params;

  std::vector<ComplexArray> noisy(count);
  std::vector<std::size_t> order(count);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fresh noise per patch, redrawn every epoch.
    for (std::size_t i = 0; i < count; ++i) {
      noisy[i] = patches.patches[i];
      if (cfg.noise_variance > 0.0) {
        ComplexArray eta =
            randn_complex(rng, patches.patches[i].shape(), cfg.noise_variance);
        noisy[i] += eta;
      }
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t j = count; j-- > 1;) {
      std::swap(order[j], order[rng.uniform_index(j + 1)]);
    }

    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < count; start += batch) {
      const std::size_t n = std::min(batch, count - start);
      std::vector<const ComplexArray*> np(n), cp(n);
      for (std::size_t i = 0; i < n; ++i) {
        np[i] = &noisy[order[start + i]];
        cp[i] = &patches.patches[order[start + i]];
      }
      const LossGrad lg = loss_and_grad_span(result.params, np.data(), cp.data(), n);
      if (!std::isfinite(lg.loss) || !lg.grad.all_finite()) {
        throw TrainingError("train: loss diverged to a non-finite value",
                            std::move(last_finite));
      }
      last_finite = result.params;
      adam_step(result.params, lg.grad, adam, cfg.learning_rate);
      epoch_loss += lg.loss * static_cast<double>(n);
      seen += n;
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(seen));
  }
  return result;
}

// ---- serialization ---------------------------------------------------------

namespace {

constexpr std::array<char, 8> kParamMagic{'R', 'S', 'D', 'N', 'P', 'R', 'M', '\0'};
constexpr std::uint32_t kParamVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double v) {
  const std::uint64_t u = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& is, const std::filesystem::path& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw FormatError("denoiser file truncated: " + path.string());
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is, const std::filesystem::path& path) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8))
    throw FormatError("denoiser file truncated: " + path.string());
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

std::string theta_filename(int iteration) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "theta_%04d.bin", iteration);
  return buf;
}

}  // namespace

void save_params(const DenoiserParams& p, const std::filesystem::path& path) {
  check_architecture(p);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  os.write(kParamMagic.data(), kParamMagic.size());
  put_u32(os, kParamVersion);
  put_u32(os, static_cast<std::uint32_t>(p.spatial_dims));
  put_u32(os, static_cast<std::uint32_t>(p.iteration));
  put_u32(os, static_cast<std::uint32_t>(p.layers.size()));
  for (const ConvLayer& L : p.layers) {
    put_u32(os, static_cast<std::uint32_t>(L.in_channels));
    put_u32(os, static_cast<std::uint32_t>(L.out_channels));
    for (double v : L.weights) put_f64(os, v);
    for (double v : L.bias) put_f64(os, v);
  }
  if (!os) throw FormatError("write failed: " + path.string());
}

DenoiserParams load_params(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open: " + path.string());
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kParamMagic)
    throw FormatError("not a denoiser parameter file: " + path.string());
  if (get_u32(is, path) != kParamVersion)
    throw FormatError("unsupported denoiser file version: " + path.string());

  DenoiserParams p;
  p.spatial_dims = static_cast<int>(get_u32(is, path));
  if (p.spatial_dims != 2 && p.spatial_dims != 3)
    throw FormatError("bad dimensionality in " + path.string());
  p.iteration = static_cast<int>(get_u32(is, path));
  const std::uint32_t num_layers = get_u32(is, path);
  if (num_layers == 0 || num_layers > 1024)
    throw FormatError("implausible layer count in " + path.string());
  const std::size_t taps = taps_for(p.spatial_dims);
  for (std::uint32_t l = 0; l < num_layers; ++l) {
    ConvLayer L;
    L.in_channels = get_u32(is, path);
    L.out_channels = get_u32(is, path);
    if (L.in_channels == 0 || L.out_channels == 0 || L.in_channels > 65536 ||
        L.out_channels > 65536)
      throw FormatError("implausible channel count in " + path.string());
    L.weights.resize(L.out_channels * L.in_channels * taps);
    L.bias.resize(L.out_channels);
    for (double& v : L.weights) v = get_f64(is, path);
    for (double& v : L.bias) v = get_f64(is, path);
    p.layers.push_back(std::move(L));
  }
  char extra;
  if (is.read(&extra, 1))
    throw FormatError("trailing bytes in " + path.string());
  check_architecture(p);
  return p;
}

const DenoiserParams& DenoiserBank::for_iteration(int t) const {
  if (entries.empty()) throw ConfigError("denoiser bank is empty");
  // Nearest stored entry at or before t.
  std::size_t best = entries.size();
  for (std::size_t i = 0; i < stored_iterations.size(); ++i) {
    if (stored_iterations[i] <= t) best = i;
  }
  if (best == entries.size())
    throw ConfigError("denoiser bank has no entry at or before iteration " +
                      std::to_string(t));
  return entries[best];
}

void save_bank(const DenoiserBank& bank, const std::filesystem::path& dir) {
  if (bank.entries.empty()) throw ArgumentError("save_bank: empty bank");
  if (bank.entries.size() != bank.stored_iterations.size())
    throw ArgumentError("save_bank: entries/iterations size mismatch");
  std::filesystem::create_directories(dir);

  KeyValueFile m;
  m.set_int("format_version", 1);
  m.set_int("iterations", bank.iterations);
  m.set_int("thin_stride", bank.thin_stride);
  m.set_int("spatial_dims", bank.entries.front().spatial_dims);
  m.set_int("num_layers", static_cast<long long>(bank.entries.front().layers.size()));
  m.set_int("kernels", bank.entries.front().kernels_per_layer());
  m.set_double("nu", bank.nu);
  m.set_double("sigma2", bank.sigma2);
  m.set_double("op_norm_sq", bank.op_norm_sq);
  std::string stored;
  for (std::size_t i = 0; i < bank.stored_iterations.size(); ++i) {
    if (i) stored += ',';
    stored += std::to_string(bank.stored_iterations[i]);
  }
  m.set("stored", stored);
  for (std::size_t t = 0; t < bank.s_sq_schedule.size(); ++t) {
    m.set_double("s_sq_" + std::to_string(t + 1), bank.s_sq_schedule[t]);
  }
  m.save(dir / "manifest.txt");

  for (std::size_t i = 0; i < bank.entries.size(); ++i) {
    save_params(bank.entries[i], dir / theta_filename(bank.stored_iterations[i]));
  }
}

DenoiserBank load_bank(const std::filesystem::path& dir) {
  const KeyValueFile m = KeyValueFile::load(dir / "manifest.txt");
  if (m.require_int("format_version") != 1)
    throw FormatError("unsupported bank version in " + dir.string());

  DenoiserBank bank;
  bank.iterations = static_cast<int>(m.require_int("iterations"));
  bank.thin_stride = static_cast<int>(m.require_int("thin_stride"));
  bank.nu = m.require_double("nu");
  bank.sigma2 = m.require_double("sigma2");
  bank.op_norm_sq = m.require_double("op_norm_sq");

  const std::string stored = m.require("stored");
  std::size_t pos = 0;
  while (pos < stored.size()) {
    std::size_t next = stored.find(',', pos);
    if (next == std::string::npos) next = stored.size();
    bank.stored_iterations.push_back(std::stoi(stored.substr(pos, next - pos)));
    pos = next + 1;
  }
  if (bank.stored_iterations.empty())
    throw FormatError("bank manifest lists no stored iterations: " + dir.string());

  for (int t = 1; t <= bank.iterations; ++t) {
    if (auto v = m.get("s_sq_" + std::to_string(t))) {
      bank.s_sq_schedule.push_back(parse_double(*v));
    }
  }

  int prev = 0;
  for (int t : bank.stored_iterations) {
    if (t <= prev) throw FormatError("bank iterations not ascending: " + dir.string());
    prev = t;
    DenoiserParams p = load_params(dir / theta_filename(t));
    if (p.iteration != t)
      throw FormatError("bank entry iteration tag mismatch: " + dir.string());
    if (!bank.entries.empty() && !p.same_architecture(bank.entries.front()))
      throw FormatError("bank entries disagree on architecture: " + dir.string());
    bank.entries.push_back(std::move(p));
  }
  return bank;
}

}  // namespace reside
