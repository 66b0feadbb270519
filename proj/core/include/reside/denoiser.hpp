#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "reside/array.hpp"
#include "reside/errors.hpp"
#include "reside/rng.hpp"

namespace reside {

struct ConvLayer {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::vector<double> weights;  // [out][in][3^dims] taps, row-major
  std::vector<double> bias;     // [out]
};

/// Residual convolutional denoiser: the complex image is split into two real
/// channels, passed through L conv layers (3^d kernels, zero padding, ReLU
/// between layers, none after the last) and recombined as
/// output = input - network(input). A zero final layer therefore makes the
/// denoiser the exact identity, which is also how fresh parameters start.
struct DenoiserParams {
  int spatial_dims = 2;  // 2 or 3
  int iteration = 0;     // outer-iteration tag, kept through serialization
  std::vector<ConvLayer> layers;

  /// He-normal weights, zero biases, zero final layer.
  static DenoiserParams init(int spatial_dims, int num_layers, int kernels, Rng& rng);

  std::size_t parameter_count() const;
  int kernels_per_layer() const;
  bool same_architecture(const DenoiserParams& o) const;
  bool all_finite() const;
};

ComplexArray denoiser_forward(const DenoiserParams& p, const ComplexArray& u);

struct PatchRef {
  std::size_t image = 0;
  std::vector<std::size_t> corner;
};

struct PatchSet {
  std::vector<ComplexArray> patches;
  std::vector<PatchRef> sources;

  std::size_t size() const { return patches.size(); }
};

/// Uniformly positioned crops, split across source images as evenly as the
/// count allows (the first count%K images receive one extra patch).
PatchSet sample_patches(const std::vector<const ComplexArray*>& images,
                        std::size_t count, const std::vector<std::size_t>& patch_shape,
                        Rng& rng);
PatchSet sample_patches(const std::vector<ComplexArray>& images, std::size_t count,
                        const std::vector<std::size_t>& patch_shape, Rng& rng);

/// Noise variance that puts the pooled signal at the requested SNR:
/// s^2 = mean |pixel|^2 / 10^(snr_db/10).
double snr_to_variance(const std::vector<const ComplexArray*>& signals, double snr_db);
double snr_to_variance(const ComplexArray& signal, double snr_db);

struct LossGrad {
  double loss = 0.0;
  DenoiserParams grad;  // same shapes as the parameters
};

/// Mean squared error over patches, pixels and both channels, with the exact
/// reverse-mode gradient for every weight and bias.
LossGrad loss_and_grad(const DenoiserParams& p, const std::vector<ComplexArray>& noisy,
                       const std::vector<ComplexArray>& clean);

struct TrainConfig {
  int epochs = 10;
  double learning_rate = 1e-3;
  int batch_size = 32;
  double noise_variance = 0.0;  // s^2 of the per-epoch synthetic noise
};

/// Thrown when the loss leaves the finite range; carries the last finite
/// parameters.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, DenoiserParams last)
      : Error(what), last_(std::move(last)) {}
  const DenoiserParams& last_params() const { return last_; }

 private:
  DenoiserParams last_;
};

struct TrainResult {
  DenoiserParams params;
  std::vector<double> epoch_loss;
};

/// Minibatch Adam (beta1 0.9, beta2 0.999, eps 1e-8) on (patch + fresh noise,
/// patch) pairs; the noise is redrawn every epoch.
TrainResult train(DenoiserParams initial, const PatchSet& patches,
                  const TrainConfig& cfg, Rng& rng);

/// Bit-exact parameter container; includes architecture metadata and the
/// iteration tag.
void save_params(const DenoiserParams& p, const std::filesystem::path& path);
DenoiserParams load_params(const std::filesystem::path& path);

/// Ordered denoiser sequence {theta_t} with the quantities needed to replay
/// the producing reconstruction chain. Stored as one file per kept iteration
/// plus a manifest.
struct DenoiserBank {
  int iterations = 0;  // T
  int thin_stride = 1;
  double nu = 1.0;
  double sigma2 = 0.0;      // pooled measurement noise variance at training
  double op_norm_sq = 1.0;  // pooled operator norm used for the dual scale
  std::vector<double> s_sq_schedule;   // realized s_t^2, t = 1..T
  std::vector<int> stored_iterations;  // ascending subset of 1..T
  std::vector<DenoiserParams> entries;

  bool empty() const { return entries.empty(); }
  /// Entry for iteration t: the stored denoiser at t, else the nearest
  /// earlier one.
  const DenoiserParams& for_iteration(int t) const;
};

void save_bank(const DenoiserBank& bank, const std::filesystem::path& dir);
DenoiserBank load_bank(const std::filesystem::path& dir);

}  // namespace reside
