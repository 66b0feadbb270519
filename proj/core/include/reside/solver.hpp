#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "reside/array.hpp"
#include "reside/denoiser.hpp"
#include "reside/errors.hpp"
#include "reside/forward_model.hpp"
#include "reside/rng.hpp"

namespace reside {

enum class DenoiserKind { cnn, baseline, identity };

struct SolverConfig {
  double nu = 1.0;     // primal step scale (maps are SOS-normalized, so ~1)
  double tau = 0.9;    // discrepancy target scale
  double alpha = 0.1;  // correction exponent
  double sigma2 = 0.0;  // measurement noise variance; must be > 0 to solve

  // Initial denoiser training SNR in dB, converted against u_1 once;
  // s0_sq overrides with an absolute variance.
  double initial_snr_db = 5.0;
  std::optional<double> s0_sq;

  int iterations = 80;  // T
  std::size_t patch_count = 576;
  std::vector<std::size_t> patch_shape{64, 64};
  TrainConfig train;       // epochs, learning rate, batch size
  bool warm_start = false;  // reuse theta_{t-1} as the next training start
  DenoiserKind denoiser = DenoiserKind::cnn;
  double baseline_strength = 0.02;
  int num_layers = 5;
  int kernels = 128;
  int bank_thin = 1;  // store every j-th denoiser

  // Abort when the residual stays above ratio x its running minimum for
  // divergence_window consecutive iterations (single-iteration spikes are a
  // normal start-up transient of the splitting when nu/sigma^2 is large).
  double divergence_ratio = 10.0;
  int divergence_window = 5;
  int norm_iterations = 100;  // power iteration budget
  double norm_tol = 1e-10;

  void validate() const;
};

struct TraceRow {
  int t = 0;
  double residual_sq = 0.0;
  double c_t = 0.0;      // NaN when the run does not adapt
  double s_sq = 0.0;     // NaN likewise
  double rsnr_db = 0.0;  // NaN without ground truth
};
using Trace = std::vector<TraceRow>;

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, Trace trace, int iteration)
      : Error(what), trace_(std::move(trace)), iteration_(iteration) {}
  const Trace& trace() const { return trace_; }
  int iteration() const { return iteration_; }

 private:
  Trace trace_;
  int iteration_;
};

struct DiscrepancyStep {
  double c_t = 1.0;
  double s_sq_new = 0.0;
};

/// c_t = (tau * M * sigma^2 / residual_sq)^alpha and s_new^2 = c_t * s_prev^2.
/// A zero residual signals an exact data fit (DegenerateFitError).
DiscrepancyStep discrepancy_update(double s_sq_prev, double residual_sq,
                                   std::size_t measurement_count, double sigma2,
                                   double tau, double alpha);

struct ReconResult {
  ComplexArray x;
  Trace trace;
};

/// Denoising callback; the int is the 1-based outer iteration.
using DenoiserFn = std::function<ComplexArray(const ComplexArray&, int)>;

/// Primal-dual splitting with a fixed plug-in denoiser:
///   gamma = (nu/sigma^2) ||A||^2, x_0 = A^H y, z_0 = A x_0 - y,
///   u_t = x_{t-1} - (nu/sigma^2) A^H z_{t-1}, x_t = f(u_t),
///   z_t = gamma/(1+gamma) z_{t-1} + (A(2 x_t - x_{t-1}) - y)/(1+gamma).
ReconResult pds_pnp(const ForwardOperator& op, const ComplexArray& y,
                    const DenoiserFn& f, const SolverConfig& cfg, Rng& rng,
                    const ComplexArray* truth = nullptr);

/// One undersampled acquisition in a joint reconstruction.
struct Measurement {
  const ForwardOperator* op = nullptr;
  const ComplexArray* y = nullptr;
  double sigma2 = 0.0;
};

struct MeasurementSet {
  std::vector<Measurement> sets;

  std::size_t total_measurements() const;
  /// Member sigma^2 averaged with measurement-count weights.
  double pooled_sigma2() const;
};

struct ResideResult {
  ComplexArray x;
  Trace trace;
  DenoiserBank bank;  // empty unless requested
};

/// Scan-specific reconstruction: the PDS loop where each iteration samples
/// patches of u_t, trains the denoiser on (patch + noise(s_{t-1}^2), patch)
/// pairs, denoises u_t, then adapts s_t^2 with the discrepancy correction.
ResideResult reside_s(const ForwardOperator& op, const ComplexArray& y,
                      const SolverConfig& cfg, Rng& rng,
                      const ComplexArray* truth = nullptr, bool keep_bank = false);

struct ResideTrainResult {
  DenoiserBank bank;
  std::vector<ComplexArray> x;
  std::vector<Trace> traces;
};

/// Joint training over K coupled chains sharing one denoiser per iteration:
/// patches pool evenly across the K intermediate images and one discrepancy
/// update drives the pooled residual toward tau * (sum M_k) * pooled sigma^2.
/// With K = 1 this is exactly reside_s.
ResideTrainResult reside_m_train(const MeasurementSet& msets, const SolverConfig& cfg,
                                 Rng& rng,
                                 const std::vector<const ComplexArray*>& truths = {});

/// PnP inference with the stored denoiser sequence; no training happens.
/// With replay_gamma the dual scale is rebuilt from the bank's recorded
/// nu/sigma2/operator norm so a training chain can be replayed bit-exactly.
ReconResult reside_m_infer(const ForwardOperator& op, const ComplexArray& y,
                           const DenoiserBank& bank, const SolverConfig& cfg, Rng& rng,
                           const ComplexArray* truth = nullptr,
                           bool replay_gamma = false);

}  // namespace reside
