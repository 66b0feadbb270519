#include "reside/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "reside/metrics.hpp"
#include "reside/wavelet.hpp"

namespace reside {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// One measurement chain of the splitting loop. Both the training engine and
// bank inference step through this struct so their arithmetic is identical.
struct Chain {
  const ForwardOperator* op;
  const ComplexArray* y;
  ComplexArray x;
  ComplexArray z;
  double residual_sq = 0.0;

  Chain(const ForwardOperator& fwd, const ComplexArray& data) : op(&fwd), y(&data) {
    x = op->adjoint(*y);
    ComplexArray r = op->apply(x);
    r -= *y;
    residual_sq = norm_sq(r);
    z = std::move(r);
  }

  ComplexArray intermediate(double step) const {
    ComplexArray u = op->adjoint(z);
    u *= cdouble{-step, 0.0};
    u += x;
    return u;
  }

  void accept(ComplexArray x_new, double gamma) {
    ComplexArray extrapolated = x_new;
    extrapolated *= cdouble{2.0, 0.0};
    extrapolated -= x;
    ComplexArray za = op->apply(extrapolated);
    za -= *y;
    z *= cdouble{gamma / (1.0 + gamma), 0.0};
    axpy(cdouble{1.0 / (1.0 + gamma), 0.0}, za, z);
    x = std::move(x_new);

    ComplexArray r = op->apply(x);
    r -= *y;
    residual_sq = norm_sq(r);
  }

  bool finite() const { return x.all_finite() && z.all_finite(); }
};

double rsnr_or_nan(const ComplexArray* truth, const ComplexArray& x) {
  return truth == nullptr ? kNaN : rsnr(*truth, x);
}

// Declares divergence only after the residual has stayed above
// ratio x running-minimum for `window` consecutive iterations.
struct DivergenceGuard {
  double ratio;
  int window;
  double min_seen = std::numeric_limits<double>::max();
  int strikes = 0;

  bool tripped(double residual_sq) {
    min_seen = std::min(min_seen, residual_sq);
    if (residual_sq > ratio * min_seen) {
      ++strikes;
    } else {
      strikes = 0;
    }
    return strikes >= window;
  }
};

void require_sigma2(double sigma2) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
    throw ArgumentError("solver: sigma2 must be positive and finite");
}

}  // namespace

void SolverConfig::validate() const {
  if (!(nu > 0.0)) throw ArgumentError("solver: nu must be > 0");
  if (!(tau > 0.0)) throw ArgumentError("solver: tau must be > 0");
  if (!(alpha > 0.0)) throw ArgumentError("solver: alpha must be > 0");
  if (iterations < 1) throw ArgumentError("solver: iterations must be >= 1");
  if (bank_thin < 1) throw ArgumentError("solver: bank_thin must be >= 1");
  if (!(divergence_ratio > 1.0))
    throw ArgumentError("solver: divergence ratio must exceed 1");
  if (norm_iterations < 1) throw ArgumentError("solver: norm_iterations must be >= 1");
  if (s0_sq && !(*s0_sq > 0.0)) throw ArgumentError("solver: s0_sq must be > 0");
  if (denoiser == DenoiserKind::cnn) {
    if (patch_count < 1) throw ArgumentError("solver: patch count must be >= 1");
    if (patch_shape.empty()) throw ArgumentError("solver: empty patch shape");
    for (std::size_t d : patch_shape) {
      if (d == 0) throw ArgumentError("solver: zero patch dimension");
    }
    if (num_layers < 1 || kernels < 1)
      throw ArgumentError("solver: bad denoiser architecture");
    if (train.epochs < 1) throw ArgumentError("solver: epochs must be >= 1");
    if (!(train.learning_rate > 0.0))
      throw ArgumentError("solver: learning rate must be > 0");
    if (train.batch_size < 1) throw ArgumentError("solver: batch size must be >= 1");
  }
  if (denoiser == DenoiserKind::baseline && baseline_strength < 0.0)
    throw ArgumentError("solver: negative baseline strength");
}

DiscrepancyStep discrepancy_update(double s_sq_prev, double residual_sq,
                                   std::size_t measurement_count, double sigma2,
                                   double tau, double alpha) {
  if (!(tau > 0.0) || !(alpha > 0.0))
    throw ArgumentError("discrepancy_update: tau and alpha must be > 0");
  if (measurement_count == 0)
    throw ArgumentError("discrepancy_update: zero measurement count");
  require_sigma2(sigma2);
  if (!(residual_sq >= 0.0) || !std::isfinite(residual_sq))
    throw ArgumentError("discrepancy_update: residual must be finite and >= 0");
  if (residual_sq == 0.0)
    throw DegenerateFitError("discrepancy_update: exact data fit");
  const double target = tau * static_cast<double>(measurement_count) * sigma2;
  DiscrepancyStep out;
  out.c_t = std::pow(target / residual_sq, alpha);
  out.s_sq_new = out.c_t * s_sq_prev;
  return out;
}

ReconResult pds_pnp(const ForwardOperator& op, const ComplexArray& y,
                    const DenoiserFn& f, const SolverConfig& cfg, Rng& rng,
                    const ComplexArray* truth) {
  cfg.validate();
  require_sigma2(cfg.sigma2);
  if (!f) throw ArgumentError("pds_pnp: missing denoiser");

  Rng norm_rng = rng.fork(0x6e6f726dull);
  const double norm_sq_a = operator_norm_sq(op, norm_rng, cfg.norm_iterations, cfg.norm_tol);
  const double step = cfg.nu / cfg.sigma2;
  const double gamma = step * norm_sq_a;

  Chain chain(op, y);
  DivergenceGuard guard{cfg.divergence_ratio, cfg.divergence_window};
  ReconResult result;
  for (int t = 1; t <= cfg.iterations; ++t) {
    ComplexArray u = chain.intermediate(step);
    ComplexArray x_new = f(u, t);
    if (!x_new.same_shape(chain.x))
      throw ArgumentError("pds_pnp: denoiser changed the image shape");
    chain.accept(std::move(x_new), gamma);
    result.trace.push_back({t, chain.residual_sq, kNaN, kNaN,
                            rsnr_or_nan(truth, chain.x)});
    if (!chain.finite() || !std::isfinite(chain.residual_sq)) {
      throw DivergenceError("pds_pnp: non-finite iterate at t=" + std::to_string(t),
                            std::move(result.trace), t);
    }
    if (guard.tripped(chain.residual_sq)) {
      throw DivergenceError("pds_pnp: residual grew past the divergence guard at t=" +
                                std::to_string(t),
                            std::move(result.trace), t);
    }
  }
  result.x = std::move(chain.x);
  return result;
}

std::size_t MeasurementSet::total_measurements() const {
  std::size_t m = 0;
  for (const Measurement& s : sets) m += s.op->measurement_count();
  return m;
}

double MeasurementSet::pooled_sigma2() const {
  double num = 0.0, den = 0.0;
  for (const Measurement& s : sets) {
    const double m = static_cast<double>(s.op->measurement_count());
    num += m * s.sigma2;
    den += m;
  }
  if (den == 0.0) throw ArgumentError("MeasurementSet: no measurements");
  return num / den;
}

namespace {

struct EngineResult {
  std::vector<ComplexArray> x;
  std::vector<Trace> traces;
  DenoiserBank bank;
};

// Joint ReSiDe chains: K couplings of the splitting loop around one denoiser
// trained per iteration on pooled patches of the intermediate images.
EngineResult run_reside_chains(const MeasurementSet& msets, const SolverConfig& cfg,
                               Rng& rng, const std::vector<const ComplexArray*>& truths,
                               bool keep_bank) {
  cfg.validate();
  if (cfg.denoiser != DenoiserKind::cnn)
    throw ArgumentError("reside: denoiser kind must be cnn");
  if (msets.sets.empty()) throw ArgumentError("reside: no measurement sets");
  if (!truths.empty() && truths.size() != msets.sets.size())
    throw ArgumentError("reside: truth count mismatch");
  for (const Measurement& s : msets.sets) {
    if (s.op == nullptr || s.y == nullptr)
      throw ArgumentError("reside: null measurement entry");
    require_sigma2(s.sigma2);
    if (s.op->image_shape().size() != cfg.patch_shape.size())
      throw ArgumentError("reside: patch rank does not match image rank");
  }
  const int dims = static_cast<int>(cfg.patch_shape.size());
  const std::size_t k_sets = msets.sets.size();

  const double sigma2 = msets.pooled_sigma2();
  const std::size_t m_total = msets.total_measurements();

  Rng norm_rng = rng.fork(0x6e6f726dull);
  double norm_sq_a = 0.0;
  for (const Measurement& s : msets.sets) {
    norm_sq_a = std::max(norm_sq_a, operator_norm_sq(*s.op, norm_rng,
                                                     cfg.norm_iterations, cfg.norm_tol));
  }
  const double step = cfg.nu / sigma2;
  const double gamma = step * norm_sq_a;

  Rng train_rng = rng.fork(0x7472696eull);

  std::vector<Chain> chains;
  chains.reserve(k_sets);
  for (const Measurement& s : msets.sets) chains.emplace_back(*s.op, *s.y);

  EngineResult result;
  result.traces.resize(k_sets);
  result.bank.iterations = cfg.iterations;
  result.bank.thin_stride = cfg.bank_thin;
  result.bank.nu = cfg.nu;
  result.bank.sigma2 = sigma2;
  result.bank.op_norm_sq = norm_sq_a;

  double s_sq = cfg.s0_sq.value_or(0.0);
  DivergenceGuard guard{cfg.divergence_ratio, cfg.divergence_window};
  DenoiserParams theta;
  bool have_theta = false;

  for (int t = 1; t <= cfg.iterations; ++t) {
    std::vector<ComplexArray> us;
    us.reserve(k_sets);
    for (Chain& c : chains) us.push_back(c.intermediate(step));

    if (t == 1 && !cfg.s0_sq) {
      std::vector<const ComplexArray*> refs;
      for (const ComplexArray& u : us) refs.push_back(&u);
      s_sq = snr_to_variance(refs, cfg.initial_snr_db);
    }

    DenoiserParams init =
        (cfg.warm_start && have_theta)
            ? theta
            : DenoiserParams::init(dims, cfg.num_layers, cfg.kernels, train_rng);
    PatchSet patches = sample_patches(
        [&] {
          std::vector<const ComplexArray*> refs;
          for (const ComplexArray& u : us) refs.push_back(&u);
          return refs;
        }(),
        cfg.patch_count, cfg.patch_shape, train_rng);

    TrainConfig tc = cfg.train;
    tc.noise_variance = s_sq;
    TrainResult trained = train(std::move(init), patches, tc, train_rng);
    theta = std::move(trained.params);
    theta.iteration = t;
    have_theta = true;

    double pooled_residual = 0.0;
    for (std::size_t k = 0; k < k_sets; ++k) {
      ComplexArray x_new = denoiser_forward(theta, us[k]);
      chains[k].accept(std::move(x_new), gamma);
      pooled_residual += chains[k].residual_sq;
    }

    double c_t = 1.0;
    try {
      const DiscrepancyStep stepped =
          discrepancy_update(s_sq, pooled_residual, m_total, sigma2, cfg.tau, cfg.alpha);
      c_t = stepped.c_t;
      s_sq = stepped.s_sq_new;
    } catch (const DegenerateFitError&) {
      // Exact fit this iteration: keep the current denoiser strength.
    }

    for (std::size_t k = 0; k < k_sets; ++k) {
      const ComplexArray* truth = truths.empty() ? nullptr : truths[k];
      result.traces[k].push_back(
          {t, chains[k].residual_sq, c_t, s_sq, rsnr_or_nan(truth, chains[k].x)});
    }
    for (std::size_t k = 0; k < k_sets; ++k) {
      if (!chains[k].finite() || !std::isfinite(chains[k].residual_sq)) {
        throw DivergenceError("reside: non-finite iterate at t=" + std::to_string(t),
                              std::move(result.traces[k]), t);
      }
    }
    if (guard.tripped(pooled_residual)) {
      throw DivergenceError("reside: residual grew past the divergence guard at t=" +
                                std::to_string(t),
                            std::move(result.traces[0]), t);
    }

    result.bank.s_sq_schedule.push_back(s_sq);
    if (keep_bank && (t - 1) % cfg.bank_thin == 0) {
      result.bank.stored_iterations.push_back(t);
      result.bank.entries.push_back(theta);
    }
  }

  for (Chain& c : chains) result.x.push_back(std::move(c.x));
  return result;
}

}  // namespace

ResideResult reside_s(const ForwardOperator& op, const ComplexArray& y,
                      const SolverConfig& cfg, Rng& rng, const ComplexArray* truth,
                      bool keep_bank) {
  MeasurementSet mset;
  mset.sets.push_back({&op, &y, cfg.sigma2});
  std::vector<const ComplexArray*> truths;
  if (truth != nullptr) truths.push_back(truth);
  EngineResult engine = run_reside_chains(mset, cfg, rng, truths, keep_bank);
  ResideResult out;
  out.x = std::move(engine.x[0]);
  out.trace = std::move(engine.traces[0]);
  out.bank = std::move(engine.bank);
  return out;
}

ResideTrainResult reside_m_train(const MeasurementSet& msets, const SolverConfig& cfg,
                                 Rng& rng,
                                 const std::vector<const ComplexArray*>& truths) {
  EngineResult engine = run_reside_chains(msets, cfg, rng, truths, true);
  ResideTrainResult out;
  out.bank = std::move(engine.bank);
  out.x = std::move(engine.x);
  out.traces = std::move(engine.traces);
  return out;
}

ReconResult reside_m_infer(const ForwardOperator& op, const ComplexArray& y,
                           const DenoiserBank& bank, const SolverConfig& cfg, Rng& rng,
                           const ComplexArray* truth, bool replay_gamma) {
  cfg.validate();
  if (bank.empty()) throw ConfigError("reside_m_infer: empty denoiser bank");
  if (bank.iterations < cfg.iterations)
    throw ConfigError("reside_m_infer: bank holds fewer iterations than requested");
  if (bank.entries.front().spatial_dims !=
      static_cast<int>(op.image_shape().size()))
    throw ConfigError("reside_m_infer: bank dimensionality does not match the image");

  double nu = cfg.nu, sigma2 = cfg.sigma2, norm_sq_a = 0.0;
  if (replay_gamma) {
    nu = bank.nu;
    sigma2 = bank.sigma2;
    norm_sq_a = bank.op_norm_sq;
  } else {
    require_sigma2(sigma2);
    Rng norm_rng = rng.fork(0x6e6f726dull);
    norm_sq_a = operator_norm_sq(op, norm_rng, cfg.norm_iterations, cfg.norm_tol);
  }
  require_sigma2(sigma2);
  const double step = nu / sigma2;
  const double gamma = step * norm_sq_a;

  Chain chain(op, y);
  DivergenceGuard guard{cfg.divergence_ratio, cfg.divergence_window};
  ReconResult result;
  for (int t = 1; t <= cfg.iterations; ++t) {
    ComplexArray u = chain.intermediate(step);
    ComplexArray x_new = denoiser_forward(bank.for_iteration(t), u);
    chain.accept(std::move(x_new), gamma);
    const double s_sq = static_cast<std::size_t>(t) <= bank.s_sq_schedule.size()
                            ? bank.s_sq_schedule[t - 1]
                            : kNaN;
    result.trace.push_back({t, chain.residual_sq, kNaN, s_sq,
                            rsnr_or_nan(truth, chain.x)});
    if (!chain.finite() || !std::isfinite(chain.residual_sq)) {
      throw DivergenceError("reside_m_infer: non-finite iterate at t=" + std::to_string(t),
                            std::move(result.trace), t);
    }
    if (guard.tripped(chain.residual_sq)) {
      throw DivergenceError(
          "reside_m_infer: residual grew past the divergence guard at t=" +
              std::to_string(t),
          std::move(result.trace), t);
    }
  }
  result.x = std::move(chain.x);
  return result;
}

}  // namespace reside
