#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <memory>

#include "png.hpp"
#include "reside/denoiser.hpp"
#include "reside/errors.hpp"
#include "reside/io.hpp"
#include "reside/metrics.hpp"
#include "reside/phantom.hpp"
#include "reside/sampling.hpp"
#include "reside/solver.hpp"
#include "reside/threading.hpp"
#include "reside/wavelet.hpp"

namespace reside::cli {

namespace {

namespace fs = std::filesystem;

// ---- option plumbing -------------------------------------------------------

// One settable knob: a CLI flag plus its config-file key. Flags win over the
// config file; everything lands in the resolved-config emitted next to the
// outputs.
struct Binding {
  CLI::Option* opt = nullptr;
  std::function<void(const std::string&)> apply;
  std::function<std::string()> render;
};

using Bindings = std::map<std::string, Binding>;

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("not a boolean: '" + v + "'");
}

long long parse_int(const std::string& v) {
  std::size_t pos = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("not an integer: '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError("not an integer: '" + v + "'");
  return out;
}

void bind_double(Bindings& b, CLI::App* app, const std::string& key, double& var,
                 const std::string& desc) {
  CLI::Option* opt = app->add_option("--" + key, var, desc);
  b[key] = {opt, [&var](const std::string& v) { var = parse_double(v); },
            [&var] { return format_double(var); }};
}

void bind_int(Bindings& b, CLI::App* app, const std::string& key, int& var,
              const std::string& desc) {
  CLI::Option* opt = app->add_option("--" + key, var, desc);
  b[key] = {opt, [&var](const std::string& v) { var = static_cast<int>(parse_int(v)); },
            [&var] { return std::to_string(var); }};
}

void bind_uint64(Bindings& b, CLI::App* app, const std::string& key,
                 unsigned long long& var, const std::string& desc) {
  CLI::Option* opt = app->add_option("--" + key, var, desc);
  b[key] = {opt,
            [&var](const std::string& v) { var = std::stoull(v); },
            [&var] { return std::to_string(var); }};
}

void bind_string(Bindings& b, CLI::App* app, const std::string& key, std::string& var,
                 const std::string& desc) {
  CLI::Option* opt = app->add_option("--" + key, var, desc);
  b[key] = {opt, [&var](const std::string& v) { var = v; },
            [&var] { return var; }};
}

void bind_flag(Bindings& b, CLI::App* app, const std::string& key, bool& var,
               const std::string& desc) {
  CLI::Option* opt = app->add_flag("--" + key, var, desc);
  b[key] = {opt, [&var](const std::string& v) { var = parse_bool(v); },
            [&var] { return var ? "true" : "false"; }};
}

void bind_string_list(Bindings& b, CLI::App* app, const std::string& key,
                      std::vector<std::string>& var, const std::string& desc) {
  CLI::Option* opt = app->add_option("--" + key, var, desc);
  b[key] = {opt,
            [&var](const std::string& v) {
              var.clear();
              std::size_t pos = 0;
              while (pos <= v.size()) {
                std::size_t next = v.find(',', pos);
                if (next == std::string::npos) next = v.size();
                if (next > pos) var.push_back(v.substr(pos, next - pos));
                pos = next + 1;
              }
            },
            [&var] {
              std::string out;
              for (std::size_t i = 0; i < var.size(); ++i) {
                if (i) out += ',';
                out += var[i];
              }
              return out;
            }};
}

/// Applies a config file under "flags override file" semantics; unknown keys
/// are rejected.
void apply_config_file(const Bindings& bindings, const std::string& path) {
  if (path.empty()) return;
  const KeyValueFile kv = KeyValueFile::load(path);
  for (const auto& [key, value] : kv.entries()) {
    auto it = bindings.find(key);
    if (it == bindings.end()) throw ConfigError("unknown config key: " + key);
    if (it->second.opt != nullptr && it->second.opt->count() > 0) continue;
    try {
      it->second.apply(value);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("bad value for " + key + ": " + e.what());
    }
  }
}

KeyValueFile render_resolved(const Bindings& bindings,
                             const std::vector<std::string>& order) {
  KeyValueFile kv;
  for (const std::string& key : order) {
    const auto it = bindings.find(key);
    if (it != bindings.end()) kv.set(key, it->second.render());
  }
  return kv;
}

// ---- shared solver options --------------------------------------------------

struct SolverOptions {
  std::string config_path;
  double nu = 0.0;  // 0 = auto: 2 * sigma2, giving a unit-scale primal step
  double tau = 0.9;
  double alpha = 0.1;
  int iterations = 80;
  int patches = 576;
  std::string patch_shape;  // empty = rank-based default
  int epochs = 10;
  double learning_rate = 1e-3;
  int batch_size = 32;
  int kernels = 128;
  int layers = 5;
  double initial_snr_db = 5.0;
  double s0_sq = 0.0;  // 0 = derive from initial-snr-db
  bool warm_start = false;
  double baseline_strength = 0.02;
  int bank_thin = 1;
  double sigma2 = 0.0;        // 0 = take the dataset value
  double sigma2_floor = 0.0;  // 0 = auto: 1e-4 * mean |y|^2
  unsigned long long seed = 0;
  int threads = 0;
  bool png = false;
};

void bind_solver_options(Bindings& b, CLI::App* app, SolverOptions& o) {
  app->add_option("--config", o.config_path,
                  "key=value file; command-line flags take precedence");
  bind_double(b, app, "nu", o.nu,
              "primal step scale nu (0 = auto: 2*sigma2 so nu/sigma2 is O(1))");
  bind_double(b, app, "tau", o.tau, "discrepancy target scale");
  bind_double(b, app, "alpha", o.alpha, "discrepancy correction exponent");
  bind_int(b, app, "iterations", o.iterations, "outer iterations T");
  bind_int(b, app, "patches", o.patches, "training patches per iteration");
  bind_string(b, app, "patch-shape", o.patch_shape,
              "patch extent, e.g. 32x32 or 8x24x24 (frames first)");
  bind_int(b, app, "epochs", o.epochs, "training epochs per iteration");
  bind_double(b, app, "learning-rate", o.learning_rate, "Adam learning rate");
  bind_int(b, app, "batch-size", o.batch_size, "minibatch size");
  bind_int(b, app, "kernels", o.kernels, "kernels per conv layer");
  bind_int(b, app, "layers", o.layers, "conv layers");
  bind_double(b, app, "initial-snr-db", o.initial_snr_db,
              "initial denoiser training SNR (dB)");
  bind_double(b, app, "s0-sq", o.s0_sq, "absolute initial training noise variance");
  bind_flag(b, app, "warm-start", o.warm_start,
            "start each training from the previous iteration's weights");
  bind_double(b, app, "baseline-strength", o.baseline_strength,
              "wavelet soft-threshold for the pnp-baseline method");
  bind_int(b, app, "bank-thin", o.bank_thin, "store every j-th denoiser");
  bind_double(b, app, "sigma2", o.sigma2, "override measurement noise variance");
  bind_double(b, app, "sigma2-floor", o.sigma2_floor,
              "variance substituted when the dataset records sigma2 = 0");
  bind_uint64(b, app, "seed", o.seed, "master seed");
  bind_int(b, app, "threads", o.threads, "worker threads (0 = hardware)");
  bind_flag(b, app, "png", o.png, "also write PNG previews");
}

std::vector<std::size_t> default_patch_shape(std::size_t rank) {
  return rank == 3 ? std::vector<std::size_t>{8, 24, 24}
                   : std::vector<std::size_t>{64, 64};
}

SolverConfig solver_config_from(const SolverOptions& o, std::size_t image_rank) {
  SolverConfig cfg;
  cfg.nu = o.nu;  // finalized by finish_config once sigma2 is known
  cfg.tau = o.tau;
  cfg.alpha = o.alpha;
  cfg.iterations = o.iterations;
  cfg.patch_count = static_cast<std::size_t>(std::max(0, o.patches));
  cfg.patch_shape = o.patch_shape.empty() ? default_patch_shape(image_rank)
                                          : parse_shape(o.patch_shape);
  cfg.train.epochs = o.epochs;
  cfg.train.learning_rate = o.learning_rate;
  cfg.train.batch_size = o.batch_size;
  cfg.kernels = o.kernels;
  cfg.num_layers = o.layers;
  cfg.initial_snr_db = o.initial_snr_db;
  if (o.s0_sq > 0.0) cfg.s0_sq = o.s0_sq;
  cfg.warm_start = o.warm_start;
  cfg.baseline_strength = o.baseline_strength;
  cfg.bank_thin = o.bank_thin;
  return cfg;
}

void apply_threads(int threads) {
  if (threads > 0) {
    set_worker_threads(static_cast<unsigned>(threads));
    return;
  }
  if (const char* env = std::getenv("RESIDE_THREADS")) {
    const long long n = parse_int(env);
    if (n > 0) set_worker_threads(static_cast<unsigned>(n));
  }
}

// Fills the sigma2-dependent pieces: the auto nu default keeps the primal
// step nu/sigma2 at 2 regardless of the measurement scale.
void finish_config(SolverConfig& cfg, const SolverOptions& o, double sigma2) {
  cfg.sigma2 = sigma2;
  if (o.nu <= 0.0) cfg.nu = 2.0 * sigma2;
}

double resolve_sigma2(const SolverOptions& o, const Dataset& ds) {
  if (o.sigma2 > 0.0) return o.sigma2;
  if (ds.kspace.sigma2 > 0.0) return ds.kspace.sigma2;
  if (o.sigma2_floor > 0.0) return o.sigma2_floor;
  return 1e-4 * mean_power(ds.kspace.y);
}

// ---- output helpers ---------------------------------------------------------

std::string csv_cell(double v) { return std::isnan(v) ? "" : format_double(v); }

void write_trace_csv(const fs::path& path, const Trace& trace) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  os << "t,residual_sq,c_t,s_t_sq,rsnr_db\n";
  for (const TraceRow& row : trace) {
    os << row.t << ',' << csv_cell(row.residual_sq) << ',' << csv_cell(row.c_t) << ','
       << csv_cell(row.s_sq) << ',' << csv_cell(row.rsnr_db) << '\n';
  }
  if (!os) throw FormatError("write failed: " + path.string());
}

std::vector<std::uint8_t> to_gray8(const std::vector<double>& values, double scale) {
  std::vector<std::uint8_t> px(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = std::clamp(values[i] * scale, 0.0, 1.0);
    px[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return px;
}

// Magnitude preview; rank-3 arrays show their first frame.
void write_magnitude_png(const fs::path& path, const ComplexArray& a,
                         double amplification = 1.0) {
  std::size_t h = 0, w = 0, offset = 0;
  if (a.rank() == 2) {
    h = a.dim(0);
    w = a.dim(1);
  } else if (a.rank() == 3) {
    h = a.dim(1);
    w = a.dim(2);
  } else {
    throw ArgumentError("png preview: expect a rank-2 or rank-3 array");
  }
  std::vector<double> mag(h * w);
  double peak = 0.0;
  for (std::size_t i = 0; i < h * w; ++i) {
    mag[i] = std::abs(a[offset + i]);
    peak = std::max(peak, mag[i]);
  }
  if (peak == 0.0) peak = 1.0;
  write_png_gray8(path, w, h, to_gray8(mag, amplification / peak));
}

void write_error_png(const fs::path& path, const ComplexArray& truth,
                     const ComplexArray& recon) {
  std::size_t h = 0, w = 0;
  if (truth.rank() == 2) {
    h = truth.dim(0);
    w = truth.dim(1);
  } else {
    h = truth.dim(1);
    w = truth.dim(2);
  }
  std::vector<double> err(h * w);
  double peak = 0.0;
  for (std::size_t i = 0; i < h * w; ++i) {
    err[i] = std::abs(truth[i] - recon[i]);
    peak = std::max(peak, std::abs(truth[i]));
  }
  if (peak == 0.0) peak = 1.0;
  // Fivefold amplification relative to the truth's dynamic range.
  write_png_gray8(path, w, h, to_gray8(err, 5.0 / peak));
}

nlohmann::json quality_json(const QualityReport& report) {
  nlohmann::json j;
  if (std::isinf(report.rsnr_db)) {
    j["rsnr_db"] = "+inf";
  } else {
    j["rsnr_db"] = report.rsnr_db;
  }
  j["ssim"] = report.ssim;
  if (!report.frames.empty()) {
    nlohmann::json frames = nlohmann::json::array();
    for (const FrameQuality& f : report.frames) {
      nlohmann::json jf;
      if (std::isinf(f.rsnr_db)) {
        jf["rsnr_db"] = "+inf";
      } else {
        jf["rsnr_db"] = f.rsnr_db;
      }
      jf["ssim"] = f.ssim;
      frames.push_back(jf);
    }
    j["frames"] = frames;
  }
  return j;
}

void report_quality(const ComplexArray& truth, const ComplexArray& recon) {
  const QualityReport q = assess(truth, recon);
  std::cout << "rsnr_db=" << (std::isinf(q.rsnr_db) ? "+inf" : format_double(q.rsnr_db))
            << " ssim=" << format_double(q.ssim) << '\n';
}

// Zero-filled time-averaged k-space [coils, pe, ro] regridded from the packed
// measurement vector; used when maps are re-estimated from the data.
ComplexArray grid_time_averaged(const Dataset& ds) {
  const std::size_t coils = ds.maps.num_coils();
  const std::size_t frames = ds.mask.num_frames;
  const std::size_t pe = ds.mask.num_lines;
  const auto ishape = ds.maps.image_shape();
  const std::size_t ro = ishape.back();
  ComplexArray grid({coils, pe, ro});
  std::vector<double> count(pe, 0.0);
  std::size_t in = 0;
  for (std::size_t c = 0; c < coils; ++c) {
    for (std::size_t f = 0; f < frames; ++f) {
      for (std::size_t l = 0; l < pe; ++l) {
        if (!ds.mask.sampled(f, l)) continue;
        for (std::size_t r = 0; r < ro; ++r) {
          grid[(c * pe + l) * ro + r] += ds.kspace.y[in++];
        }
        if (c == 0) count[l] += 1.0;
      }
    }
  }
  for (std::size_t c = 0; c < coils; ++c) {
    for (std::size_t l = 0; l < pe; ++l) {
      if (count[l] == 0.0) continue;
      for (std::size_t r = 0; r < ro; ++r) grid[(c * pe + l) * ro + r] *= 1.0 / count[l];
    }
  }
  return grid;
}

// ---- subcommands ------------------------------------------------------------

struct SimulateOptions {
  bool is_static = false;
  bool is_dynamic = false;
  std::string shape = "128x128";
  int frames = 16;
  int coils = 4;
  std::string mask = "m1";
  double accel = 4.0;
  int acs = 32;
  double snr_db = 30.0;
  bool no_noise = false;
  unsigned long long seed = 0;
  std::string out;
  bool png = false;
};

int cmd_simulate(const SimulateOptions& o) {
  if (o.is_static && o.is_dynamic)
    throw ArgumentError("simulate: choose one of --static/--dynamic");
  const bool dynamic = o.is_dynamic;

  PhantomSpec spec;
  spec.spatial_shape = parse_shape(o.shape);
  if (spec.spatial_shape.size() != 2)
    throw ArgumentError("simulate: --shape must be 2D (pe x ro)");
  if (o.coils < 1) throw ArgumentError("simulate: need at least one coil");
  spec.num_coils = static_cast<std::size_t>(o.coils);
  spec.dynamic = dynamic;
  if (dynamic) {
    if (o.frames < 2) throw ArgumentError("simulate: dynamic needs --frames >= 2");
    spec.num_frames = static_cast<std::size_t>(o.frames);
  }
  spec.seed = o.seed;

  Rng master(o.seed);
  Rng mask_rng = master.fork(0x6d61736bull);
  Rng noise_rng = master.fork(0x6e6f6973ull);

  const MaskKind kind = mask_kind_from_string(o.mask);
  ComplexArray truth;
  SensitivityMaps maps;
  const std::size_t pe = spec.spatial_shape[0];
  if (dynamic) {
    DynamicPhantom ph = make_dynamic_phantom(spec);
    truth = std::move(ph.frames);
    maps = std::move(ph.maps);
  } else {
    StaticPhantom ph = make_static_phantom(spec);
    truth = std::move(ph.image);
    maps = std::move(ph.maps);
  }

  SamplingMask mask;
  switch (kind) {
    case MaskKind::m1:
      if (dynamic) throw ArgumentError("simulate: m1 is a single-frame mask");
      mask = make_mask_m1(mask_rng, pe, o.accel, static_cast<std::size_t>(o.acs));
      break;
    case MaskKind::m2:
      if (dynamic) throw ArgumentError("simulate: m2 is a single-frame mask");
      mask = make_mask_m2(mask_rng, pe, o.accel, static_cast<std::size_t>(o.acs));
      break;
    case MaskKind::m3:
      mask = make_mask_m3(mask_rng, pe, dynamic ? spec.num_frames : 1, o.accel);
      break;
    case MaskKind::custom:
      throw ArgumentError("simulate: mask must be one of m1, m2, m3");
  }

  const double snr = o.no_noise ? std::numeric_limits<double>::infinity() : o.snr_db;
  SimulatedAcquisition acq = simulate_acquisition(truth, maps, mask, snr, noise_rng);

  KeyValueFile extra;
  extra.set("phantom", dynamic ? "dynamic" : "static");
  extra.set_uint("seed", o.seed);
  extra.set_double("target_accel", o.accel);
  save_dataset(o.out, acq, extra);
  if (o.png) write_magnitude_png(fs::path(o.out) / "truth.png", acq.truth);

  std::cout << "wrote " << o.out << " (R=" << format_double(acq.achieved_R)
            << ", sigma2=" << format_double(acq.sigma2) << ")\n";
  return exit_ok;
}

struct ReconstructOptions {
  SolverOptions solver;
  std::string data;
  std::string out;
  std::string method = "reside-s";
  std::string maps_file;
  bool estimate_maps = false;
  int acs = 0;  // window for --estimate-maps when the mask has no ACS
};

int cmd_reconstruct(ReconstructOptions& o, const Bindings& bindings,
                    const std::vector<std::string>& key_order) {
  apply_config_file(bindings, o.solver.config_path);
  apply_threads(o.solver.threads);
  if (o.data.empty() || o.out.empty())
    throw ArgumentError("reconstruct: --data and --out are required");

  Dataset ds = load_dataset(o.data);
  SensitivityMaps maps = ds.maps;
  if (!o.maps_file.empty()) {
    maps.maps = load_array(o.maps_file);
  } else if (o.estimate_maps) {
    std::size_t width = ds.mask.acs_width;
    if (o.acs > 0) width = static_cast<std::size_t>(o.acs);
    if (width == 0) width = ds.mask.num_lines / 4;
    maps = estimate_sos_maps(grid_time_averaged(ds), width);
  }
  ForwardOperator op(maps, ds.mask);

  SolverConfig cfg = solver_config_from(o.solver, op.image_shape().size());
  finish_config(cfg, o.solver, resolve_sigma2(o.solver, ds));

  Rng master(o.solver.seed);
  const ComplexArray* truth = ds.has_truth() ? &ds.truth : nullptr;

  ReconResult result;
  if (o.method == "reside-s") {
    cfg.denoiser = DenoiserKind::cnn;
    ResideResult r = reside_s(op, ds.kspace.y, cfg, master, truth);
    result.x = std::move(r.x);
    result.trace = std::move(r.trace);
  } else if (o.method == "pnp-baseline") {
    cfg.denoiser = DenoiserKind::baseline;
    const double strength = cfg.baseline_strength;
    result = pds_pnp(
        op, ds.kspace.y,
        [strength](const ComplexArray& u, int) {
          return baseline_shrink_denoiser(u, strength);
        },
        cfg, master, truth);
  } else if (o.method == "pnp-identity") {
    cfg.denoiser = DenoiserKind::identity;
    result = pds_pnp(
        op, ds.kspace.y, [](const ComplexArray& u, int) { return u; }, cfg, master,
        truth);
  } else {
    throw ArgumentError("reconstruct: unknown method '" + o.method + "'");
  }

  fs::create_directories(o.out);
  save_array(fs::path(o.out) / "xhat.rsa", result.x);
  write_trace_csv(fs::path(o.out) / "trace.csv", result.trace);
  KeyValueFile resolved = render_resolved(bindings, key_order);
  resolved.set_double("sigma2", cfg.sigma2);  // record the effective values
  resolved.set_double("nu", cfg.nu);
  resolved.save(fs::path(o.out) / "resolved-config.txt");
  if (o.solver.png) {
    write_magnitude_png(fs::path(o.out) / "xhat.png", result.x);
    if (truth != nullptr)
      write_error_png(fs::path(o.out) / "error.png", *truth, result.x);
  }
  if (truth != nullptr) report_quality(*truth, result.x);
  return exit_ok;
}

struct TrainOptions {
  SolverOptions solver;
  std::vector<std::string> data;
  std::string out;
  int k = 0;
};

int cmd_train(TrainOptions& o, const Bindings& bindings,
              const std::vector<std::string>& key_order) {
  apply_config_file(bindings, o.solver.config_path);
  apply_threads(o.solver.threads);
  if (o.data.empty()) throw ArgumentError("train: at least one --data directory");
  if (o.out.empty()) throw ArgumentError("train: --out bank directory required");
  if (o.k > 0 && static_cast<std::size_t>(o.k) != o.data.size())
    throw ConfigError("train: --k disagrees with the number of --data directories");

  std::vector<Dataset> datasets;
  datasets.reserve(o.data.size());
  for (const std::string& dir : o.data) datasets.push_back(load_dataset(dir));

  std::vector<ForwardOperator> ops;
  ops.reserve(datasets.size());
  for (Dataset& ds : datasets) ops.emplace_back(ds.maps, ds.mask);

  MeasurementSet mset;
  std::vector<const ComplexArray*> truths;
  bool all_truth = true;
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    mset.sets.push_back(
        {&ops[i], &datasets[i].kspace.y, resolve_sigma2(o.solver, datasets[i])});
    all_truth = all_truth && datasets[i].has_truth();
  }
  if (all_truth) {
    for (const Dataset& ds : datasets) truths.push_back(&ds.truth);
  }

  SolverConfig cfg = solver_config_from(o.solver, ops.front().image_shape().size());
  finish_config(cfg, o.solver, mset.pooled_sigma2());

  Rng master(o.solver.seed);
  ResideTrainResult result = reside_m_train(mset, cfg, master, truths);

  save_bank(result.bank, o.out);
  for (std::size_t k = 0; k < result.x.size(); ++k) {
    save_array(fs::path(o.out) / ("xhat_" + std::to_string(k) + ".rsa"), result.x[k]);
    write_trace_csv(fs::path(o.out) / ("trace_" + std::to_string(k) + ".csv"),
                    result.traces[k]);
  }
  KeyValueFile resolved = render_resolved(bindings, key_order);
  resolved.set_double("nu", cfg.nu);
  resolved.save(fs::path(o.out) / "resolved-config.txt");
  std::cout << "stored " << result.bank.entries.size() << " denoisers in " << o.out
            << '\n';
  return exit_ok;
}

struct InferOptions {
  SolverOptions solver;
  std::string data;
  std::string bank;
  std::string out;
  bool replay_gamma = false;
};

int cmd_infer(InferOptions& o, const Bindings& bindings,
              const std::vector<std::string>& key_order, bool iterations_given) {
  apply_config_file(bindings, o.solver.config_path);
  apply_threads(o.solver.threads);
  if (o.data.empty() || o.bank.empty() || o.out.empty())
    throw ArgumentError("infer: --data, --bank and --out are required");

  Dataset ds = load_dataset(o.data);
  DenoiserBank bank = load_bank(o.bank);
  ForwardOperator op(ds.maps, ds.mask);

  SolverConfig cfg = solver_config_from(o.solver, op.image_shape().size());
  if (!iterations_given) cfg.iterations = bank.iterations;
  finish_config(cfg, o.solver, resolve_sigma2(o.solver, ds));

  Rng master(o.solver.seed);
  const ComplexArray* truth = ds.has_truth() ? &ds.truth : nullptr;
  ReconResult result =
      reside_m_infer(op, ds.kspace.y, bank, cfg, master, truth, o.replay_gamma);

  fs::create_directories(o.out);
  save_array(fs::path(o.out) / "xhat.rsa", result.x);
  write_trace_csv(fs::path(o.out) / "trace.csv", result.trace);
  KeyValueFile resolved = render_resolved(bindings, key_order);
  resolved.set_double("sigma2", cfg.sigma2);
  resolved.set_double("nu", cfg.nu);
  resolved.set_int("iterations", cfg.iterations);
  resolved.save(fs::path(o.out) / "resolved-config.txt");
  if (o.solver.png) {
    write_magnitude_png(fs::path(o.out) / "xhat.png", result.x);
    if (truth != nullptr)
      write_error_png(fs::path(o.out) / "error.png", *truth, result.x);
  }
  if (truth != nullptr) report_quality(*truth, result.x);
  return exit_ok;
}

struct MetricsOptions {
  std::string truth;
  std::string recon;
  std::string out;
};

int cmd_metrics(const MetricsOptions& o) {
  const ComplexArray truth = load_array(o.truth);
  const ComplexArray recon = load_array(o.recon);
  const QualityReport report = assess(truth, recon);
  const nlohmann::json j = quality_json(report);
  std::cout << j.dump(2) << '\n';
  if (!o.out.empty()) {
    std::ofstream os(o.out, std::ios::trunc);
    if (!os) throw FormatError("cannot open for writing: " + o.out);
    os << j.dump(2) << '\n';
  }
  return exit_ok;
}

struct ConvertOptions {
  std::string in;
  std::string csv;
  std::string png;
};

int cmd_convert(const ConvertOptions& o) {
  if (o.csv.empty() && o.png.empty())
    throw ArgumentError("convert: pass --csv and/or --png");
  const ElementType type = peek_element_type(o.in);

  if (!o.csv.empty()) {
    std::ofstream os(o.csv, std::ios::trunc);
    if (!os) throw FormatError("cannot open for writing: " + o.csv);
    if (type == ElementType::complex64 || type == ElementType::complex128) {
      const ComplexArray a = load_array(o.in);
      os << "# shape: " << format_shape(a.shape()) << "\nindex,re,im\n";
      for (std::size_t i = 0; i < a.size(); ++i) {
        os << i << ',' << format_double(a[i].real()) << ','
           << format_double(a[i].imag()) << '\n';
      }
    } else if (type == ElementType::float64) {
      const auto [shape, values] = load_real_array(o.in);
      os << "# shape: " << format_shape(shape) << "\nindex,value\n";
      for (std::size_t i = 0; i < values.size(); ++i)
        os << i << ',' << format_double(values[i]) << '\n';
    } else {
      const auto [shape, values] = load_bool_array(o.in);
      os << "# shape: " << format_shape(shape) << "\nindex,value\n";
      for (std::size_t i = 0; i < values.size(); ++i)
        os << i << ',' << int(values[i]) << '\n';
    }
    if (!os) throw FormatError("write failed: " + o.csv);
  }

  if (!o.png.empty()) {
    if (type == ElementType::complex64 || type == ElementType::complex128) {
      write_magnitude_png(o.png, load_array(o.in));
    } else if (type == ElementType::float64) {
      const auto [shape, values] = load_real_array(o.in);
      if (shape.size() != 2) throw ArgumentError("convert: png needs a 2D array");
      double peak = 0.0;
      for (double v : values) peak = std::max(peak, std::abs(v));
      if (peak == 0.0) peak = 1.0;
      write_png_gray8(o.png, shape[1], shape[0], to_gray8(values, 1.0 / peak));
    } else {
      const auto [shape, values] = load_bool_array(o.in);
      if (shape.size() != 2) throw ArgumentError("convert: png needs a 2D array");
      std::vector<std::uint8_t> px(values.size());
      for (std::size_t i = 0; i < values.size(); ++i) px[i] = values[i] ? 255 : 0;
      write_png_gray8(o.png, shape[1], shape[0], px);
    }
  }
  return exit_ok;
}

const char* kExitCodeHelp =
    "Exit codes: 0 ok, 1 other failure, 2 argument error, 3 format error, "
    "4 config error, 5 divergence, 6 training failure.";

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"reside: self-calibrated plug-and-play MRI reconstruction"};
  app.footer(kExitCodeHelp);
  app.require_subcommand(1);

  SimulateOptions sim;
  CLI::App* s = app.add_subcommand("simulate", "generate a synthetic dataset");
  s->add_flag("--static", sim.is_static, "static phantom (default)");
  s->add_flag("--dynamic", sim.is_dynamic, "dynamic perfusion-like phantom");
  s->add_option("--shape", sim.shape, "spatial shape, pe x ro (default 128x128)");
  s->add_option("--frames", sim.frames, "frames for --dynamic (default 16)");
  s->add_option("--coils", sim.coils, "receive coils (default 4)");
  s->add_option("--mask", sim.mask, "sampling mask: m1, m2 or m3");
  s->add_option("--accel", sim.accel, "target acceleration R");
  s->add_option("--acs", sim.acs, "ACS width for m1/m2 (default 32)");
  s->add_option("--snr-db", sim.snr_db, "measurement SNR in dB (default 30)");
  s->add_flag("--no-noise", sim.no_noise, "disable measurement noise");
  s->add_option("--seed", sim.seed, "master seed");
  s->add_option("--out", sim.out, "output dataset directory")->required();
  s->add_flag("--png", sim.png, "also write truth.png");

  ReconstructOptions rec;
  Bindings rec_bind;
  CLI::App* r = app.add_subcommand("reconstruct", "reconstruct one dataset");
  bind_string(rec_bind, r, "data", rec.data, "dataset directory");
  bind_string(rec_bind, r, "out", rec.out, "output directory");
  bind_string(rec_bind, r, "method", rec.method,
              "reside-s | pnp-baseline | pnp-identity");
  bind_string(rec_bind, r, "maps", rec.maps_file, "override sensitivity maps file");
  bind_flag(rec_bind, r, "estimate-maps", rec.estimate_maps,
            "re-estimate maps from the measured data");
  bind_int(rec_bind, r, "acs", rec.acs, "window width for --estimate-maps");
  bind_solver_options(rec_bind, r, rec.solver);
  const std::vector<std::string> rec_keys{
      "method",        "data",          "out",
      "maps",          "estimate-maps", "acs",
      "nu",            "tau",           "alpha",
      "iterations",    "patches",       "patch-shape",
      "epochs",        "learning-rate", "batch-size",
      "kernels",       "layers",        "initial-snr-db",
      "s0-sq",         "warm-start",    "baseline-strength",
      "bank-thin",     "sigma2",        "sigma2-floor",
      "seed",          "threads",       "png"};

  TrainOptions trn;
  Bindings trn_bind;
  CLI::App* t = app.add_subcommand("train", "joint training over several datasets");
  bind_string_list(trn_bind, t, "data", trn.data,
                   "dataset directory (repeat or comma-separate)");
  bind_string(trn_bind, t, "out", trn.out, "output bank directory");
  bind_int(trn_bind, t, "k", trn.k, "expected dataset count (checked)");
  bind_solver_options(trn_bind, t, trn.solver);
  const std::vector<std::string> trn_keys{
      "data",      "out",           "k",
      "nu",        "tau",           "alpha",
      "iterations", "patches",      "patch-shape",
      "epochs",    "learning-rate", "batch-size",
      "kernels",   "layers",        "initial-snr-db",
      "s0-sq",     "warm-start",    "bank-thin",
      "sigma2",    "sigma2-floor",  "seed",
      "threads",   "png"};

  InferOptions inf;
  Bindings inf_bind;
  CLI::App* i = app.add_subcommand("infer", "reconstruct with a stored denoiser bank");
  bind_string(inf_bind, i, "data", inf.data, "dataset directory");
  bind_string(inf_bind, i, "bank", inf.bank, "denoiser bank directory");
  bind_string(inf_bind, i, "out", inf.out, "output directory");
  bind_flag(inf_bind, i, "replay-gamma", inf.replay_gamma,
            "reuse the bank's recorded nu/sigma2/operator norm");
  bind_solver_options(inf_bind, i, inf.solver);
  const std::vector<std::string> inf_keys{
      "data",   "bank",          "out",          "replay-gamma", "nu",
      "tau",    "alpha",         "iterations",   "sigma2",       "sigma2-floor",
      "seed",   "threads",       "png"};

  MetricsOptions met;
  CLI::App* m = app.add_subcommand("metrics", "image quality report (JSON)");
  m->add_option("--truth", met.truth, "reference array file")->required();
  m->add_option("--recon", met.recon, "reconstruction array file")->required();
  m->add_option("--out", met.out, "also write the JSON report here");

  ConvertOptions cvt;
  CLI::App* c = app.add_subcommand("convert", "dump an array file to CSV/PNG");
  c->add_option("--in", cvt.in, "input array file")->required();
  c->add_option("--csv", cvt.csv, "CSV output path");
  c->add_option("--png", cvt.png, "PNG output path");

  std::vector<std::string> argv_like(args.rbegin(), args.rend());
  try {
    app.parse(argv_like);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_argument;
  }

  try {
    if (s->parsed()) return cmd_simulate(sim);
    if (r->parsed()) return cmd_reconstruct(rec, rec_bind, rec_keys);
    if (t->parsed()) return cmd_train(trn, trn_bind, trn_keys);
    if (i->parsed())
      return cmd_infer(inf, inf_bind, inf_keys,
                       inf_bind.at("iterations").opt->count() > 0 ||
                           (!inf.solver.config_path.empty() &&
                            KeyValueFile::load(inf.solver.config_path)
                                .contains("iterations")));
    if (m->parsed()) return cmd_metrics(met);
    if (c->parsed()) return cmd_convert(cvt);
    throw ArgumentError("no subcommand given");
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_divergence;
  } catch (const TrainingError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_training;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_config;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_format;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_argument;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_failure;
  }
}

}  // namespace reside::cli
