#include "tweedie/app/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "tweedie/ardae.hpp"
#include "tweedie/errors.hpp"
#include "tweedie/report.hpp"
#include "tweedie/rng.hpp"
#include "tweedie/tensor_io.hpp"

namespace tweedie::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

std::string num(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// Timings go here, never into the deterministic outputs.
class RunLog {
 public:
  RunLog(const fs::path& dir, const std::string& command) : out_(dir / (command + ".log")), t0_(Clock::now()) {}
  void line(const std::string& text) {
    const double t = std::chrono::duration<double>(Clock::now() - t0_).count();
    out_ << "[" << num(t) << "s] " << text << "\n";
    out_.flush();
  }

 private:
  std::ofstream out_;
  Clock::time_point t0_;
};

Manifest require_manifest(const ExperimentConfig& cfg) {
  Manifest m = load_manifest(cfg.manifest_path());
  if (m.images.empty()) throw ValidationError("manifest " + cfg.manifest_path().string() + " lists no images");
  return m;
}

Image load_noisy(const Manifest& m, const ManifestEntry& e) { return read_tensor(m.directory / e.noisy); }
Image load_clean(const Manifest& m, const ManifestEntry& e) { return read_tensor(m.directory / e.clean); }

// AR-DAE checkpoints are loaded once and shared by every image.
class BackendCache {
 public:
  explicit BackendCache(const BackendSpec& spec) : spec_(spec) {
    if (spec.kind == BackendKind::Ardae) {
      if (!fs::exists(spec.checkpoint)) throw ValidationError("checkpoint " + spec.checkpoint.string() + " not found");
      shared_ = std::make_shared<ArdaeScore>(load_checkpoint(spec.checkpoint));
    }
  }
  std::shared_ptr<const ScoreBackend> get(const ManifestEntry& e) const {
    if (shared_) return shared_;
    return make_backend(spec_, e);
  }
  bool shared() const noexcept { return shared_ != nullptr; }

 private:
  BackendSpec spec_;
  std::shared_ptr<const ScoreBackend> shared_;
};

// Observation used by the exact posterior: Poisson data on its lattice.
double lattice_value(double y, const NoiseModel& m) {
  return m.kind == NoiseKind::Poisson ? m.level * std::round(y / m.level) : y;
}

Image oracle_posterior(const Image& y, const ManifestEntry& e) {
  Image out(y.height(), y.width());
  std::map<double, double> cache;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double v = lattice_value(y[i], e.noise);
    auto it = cache.find(v);
    if (it == cache.end()) it = cache.emplace(v, brute_posterior_mean(v, e.prior, e.noise)).first;
    out[i] = std::clamp(it->second, kIntensityFloor, 1.0);
  }
  return out;
}

double psnr_of_mean_mse(const std::vector<double>& mses) {
  if (mses.empty()) return std::nan("");
  double s = 0.0;
  for (double v : mses) s += v;
  const double mse = s / static_cast<double>(mses.size());
  return mse == 0.0 ? kPsnrIdentical : 10.0 * std::log10(1.0 / mse);
}

double mse(const Image& a, const Image& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace

std::unique_ptr<ScoreBackend> make_backend(const BackendSpec& spec, const ManifestEntry& entry) {
  switch (spec.kind) {
    case BackendKind::Oracle:
      return make_oracle(entry.prior, entry.noise);
    case BackendKind::OracleGaussian:
      if (entry.noise.kind != NoiseKind::Gaussian) {
        throw ValidationError("oracle-gaussian backend used on " + std::string(to_string(entry.noise.kind)) +
                              " data (" + entry.id + ")");
      }
      return std::make_unique<GaussianOracle>(entry.prior, std::sqrt(entry.noise.level));
    case BackendKind::OracleQuadrature:
      return std::make_unique<QuadratureOracle>(entry.prior, entry.noise);
    case BackendKind::Ardae:
      return std::make_unique<ArdaeScore>(load_checkpoint(spec.checkpoint));
  }
  throw ValidationError("unknown backend");
}

ExperimentConfig resolve_config(const CommandLine& cli) {
  ExperimentConfig cfg = load_config(cli.config);
  if (cli.seed) {
    cfg.seed = *cli.seed;
    cfg.estimation.seed = *cli.seed;
  }
  if (cli.out) cfg.output_dir = *cli.out;
  return cfg;
}

void cmd_synth(const ExperimentConfig& cfg) {
  if (cfg.noise.empty()) throw ValidationError("synth needs at least one noise entry");
  int total = 0;
  for (const auto& g : cfg.noise) total += g.count;
  if (total == 0) throw ValidationError("synth would produce no images");
  fs::create_directories(cfg.output_dir);
  RunLog log(cfg.output_dir, "synth");

  Manifest manifest;
  manifest.directory = cfg.output_dir;
  std::uint64_t index = 0;
  for (const auto& group : cfg.noise) {
    for (int c = 0; c < group.count; ++c, ++index) {
      char id[32];
      std::snprintf(id, sizeof id, "img_%04llu", static_cast<unsigned long long>(index));
      ManifestEntry e;
      e.id = id;
      e.clean = e.id + "_clean.f32";
      e.noisy = e.id + "_noisy.f32";
      e.clean_seed = mix64(cfg.seed ^ static_cast<std::uint64_t>(StreamPurpose::CleanImage)) + index;
      e.noise_seed = mix64(cfg.seed ^ static_cast<std::uint64_t>(StreamPurpose::Noise)) + index;
      e.noise = group.range.draw(cfg.seed, index);

      SynthSpec spec = cfg.synth;
      spec.seed = e.clean_seed;
      const Image clean = gen_clean(spec);
      const Image noisy = sample_noisy(clean, e.noise, e.noise_seed);
      e.prior = cfg.synth.kind == SynthKind::PiecewiseConstant ? GmmPrior::atoms_of(clean) : cfg.synth.prior;

      write_tensor(cfg.output_dir / e.clean, clean);
      write_tensor(cfg.output_dir / e.noisy, noisy);
      if (cfg.write_pgm) {
        write_pgm(cfg.output_dir / (e.id + "_clean.pgm"), clean);
        write_pgm(cfg.output_dir / (e.id + "_noisy.pgm"), noisy);
      }
      log.line(e.id + " " + std::string(to_string(e.noise.kind)) + " level " + num(e.noise.natural_level()) +
               " floored " + std::to_string(count_at_or_below(noisy)));
      manifest.images.push_back(std::move(e));
    }
  }
  write_json(cfg.output_dir / "manifest.json", to_json(manifest));
}

void cmd_train(const ExperimentConfig& cfg) {
  const Manifest manifest = require_manifest(cfg);
  fs::create_directories(cfg.output_dir);
  RunLog log(cfg.output_dir, "train");
  std::vector<Image> data;
  for (const auto& e : manifest.images) data.push_back(load_noisy(manifest, e));
  const ArdaeConfig acfg = cfg.ardae_for(manifest.images.front().noise.kind);
  const fs::path ckpt = cfg.output_dir / "model.ardae";
  log.line("training on " + std::to_string(data.size()) + " images, config " + config_hash(acfg));

  TrainingResult result;
  try {
    result = train_ardae(acfg, data);
  } catch (const TrainingDivergence& d) {
    save_checkpoint(ckpt, d.last_good());
    log.line(std::string("diverged: ") + d.what());
    throw;
  }
  save_checkpoint(ckpt, result.model);
  std::ostringstream csv;
  csv << "epoch,loss,running_min\n";
  double running = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < result.epoch_loss.size(); ++i) {
    running = std::min(running, result.epoch_loss[i]);
    csv << i << "," << num(result.epoch_loss[i]) << "," << num(running) << "\n";
  }
  write_text(cfg.output_dir / "loss.csv", csv.str());
  log.line("done after " + std::to_string(result.steps) + " steps");
}

int cmd_estimate(const ExperimentConfig& cfg) {
  const Manifest manifest = require_manifest(cfg);
  BackendCache backends(cfg.backend);
  fs::create_directories(cfg.output_dir / "estimates");
  RunLog log(cfg.output_dir, "estimate");

  std::ostringstream csv;
  csv << "image,rho_hat,model,level,truth_model,truth_level,correct\n";
  std::size_t failures = 0;
  for (std::size_t i = 0; i < manifest.images.size(); ++i) {
    const auto& e = manifest.images[i];
    EstimationConfig ecfg = cfg.estimation;
    ecfg.seed = cfg.estimation.seed + i;
    const std::string truth =
        std::string(to_string(e.noise.kind)) + "," + num(e.noise.natural_level());
    try {
      const auto backend = backends.get(e);
      const EstimationReport r = estimate_noise(load_noisy(manifest, e), *backend, ecfg).report;
      write_json(cfg.output_dir / "estimates" / (e.id + ".json"), to_json(r));
      const bool correct = r.model.classified && *r.model.classified == e.noise.kind;
      csv << e.id << "," << num(r.model.rho_hat) << "," << to_string(r.model.classified) << ","
          << (r.level ? num(r.level->model().natural_level()) : "") << "," << truth << "," << (correct ? 1 : 0)
          << "\n";
    } catch (const EstimationError& err) {
      ++failures;
      csv << e.id << ",,failed,," << truth << ",0\n";
      write_json(cfg.output_dir / "estimates" / (e.id + ".json"), json{{"error", err.what()}});
      log.line(e.id + " failed: " + err.what());
    }
  }
  write_text(cfg.output_dir / "estimate_summary.csv", csv.str());

  if (cfg.pooled) {
    if (!backends.shared()) throw ValidationError("pooled estimation needs a single ardae backend");
    std::vector<Image> images;
    for (const auto& e : manifest.images) images.push_back(load_noisy(manifest, e));
    try {
      write_json(cfg.output_dir / "estimate_pooled.json",
                 to_json(estimate_noise_pooled(images, *backends.get(manifest.images.front()), cfg.estimation)));
    } catch (const EstimationError& err) {
      ++failures;
      write_json(cfg.output_dir / "estimate_pooled.json", json{{"error", err.what()}});
    }
  }
  log.line(std::to_string(failures) + " failures");
  return failures == manifest.images.size() ? kExitEstimation : kExitOk;
}

int cmd_denoise(const ExperimentConfig& cfg) {
  const Manifest manifest = require_manifest(cfg);
  BackendCache backends(cfg.backend);
  fs::create_directories(cfg.output_dir / "denoised");
  RunLog log(cfg.output_dir, "denoise");

  std::ostringstream csv;
  csv << "image,status,model,level,psnr_noisy,psnr_denoised\n";
  std::size_t failures = 0;
  for (std::size_t i = 0; i < manifest.images.size(); ++i) {
    const auto& e = manifest.images[i];
    EstimationConfig ecfg = cfg.estimation;
    ecfg.seed = cfg.estimation.seed + i;
    const Image y = load_noisy(manifest, e);
    const Image x = load_clean(manifest, e);
    try {
      DenoiseResult r = denoise_blind(y, *backends.get(e), ecfg);
      r.report.psnr_input = psnr(y, x);
      r.report.psnr_output = psnr(r.x_hat, x);
      write_tensor(cfg.output_dir / "denoised" / (e.id + ".f32"), r.x_hat);
      write_json(cfg.output_dir / "denoised" / (e.id + ".json"), to_json(r.report));
      csv << e.id << ",ok," << to_string(r.report.applied->kind) << "," << num(r.report.applied->natural_level())
          << "," << num(*r.report.psnr_input) << "," << num(*r.report.psnr_output) << "\n";
      log.line(e.id + " estimate " + num(r.report.seconds_estimate) + "s total " + num(r.report.seconds_total) + "s");
    } catch (const EstimationError& err) {
      ++failures;
      csv << e.id << ",failed,,," << num(psnr(y, x)) << ",\n";
      write_json(cfg.output_dir / "denoised" / (e.id + ".json"), json{{"error", err.what()}});
      log.line(e.id + " failed: " + err.what());
    }
  }
  write_text(cfg.output_dir / "denoise_summary.csv", csv.str());
  return failures == manifest.images.size() ? kExitEstimation : kExitOk;
}

int cmd_eval(const ExperimentConfig& cfg) {
  const Manifest manifest = require_manifest(cfg);
  BackendCache backends(cfg.backend);
  fs::create_directories(cfg.output_dir);
  RunLog log(cfg.output_dir, "eval");

  std::ostringstream csv;
  csv << "image,truth_model,truth_level,noisy,blind,known,oracle_posterior,blind_status\n";
  std::vector<double> m_noisy, m_blind, m_known, m_oracle;
  std::size_t failures = 0;
  for (std::size_t i = 0; i < manifest.images.size(); ++i) {
    const auto& e = manifest.images[i];
    EstimationConfig ecfg = cfg.estimation;
    ecfg.seed = cfg.estimation.seed + i;
    const Image y = load_noisy(manifest, e);
    const Image x = load_clean(manifest, e);
    const auto backend = backends.get(e);

    const Image known = denoise_known(y, e.noise, *backend).x_hat;
    const Image oracle = oracle_posterior(y, e);
    m_noisy.push_back(mse(y, x));
    m_known.push_back(mse(known, x));
    m_oracle.push_back(mse(oracle, x));
    std::string blind_psnr, status = "ok";
    try {
      const Image blind = denoise_blind(y, *backend, ecfg).x_hat;
      m_blind.push_back(mse(blind, x));
      blind_psnr = num(psnr(blind, x));
    } catch (const EstimationError& err) {
      ++failures;
      status = "failed";
      log.line(e.id + " blind failed: " + err.what());
    }
    csv << e.id << "," << to_string(e.noise.kind) << "," << num(e.noise.natural_level()) << ","
        << num(psnr(y, x)) << "," << blind_psnr << "," << num(psnr(known, x)) << "," << num(psnr(oracle, x)) << ","
        << status << "\n";
  }
  csv << "mean,,," << num(psnr_of_mean_mse(m_noisy)) << "," << num(psnr_of_mean_mse(m_blind)) << ","
      << num(psnr_of_mean_mse(m_known)) << "," << num(psnr_of_mean_mse(m_oracle)) << ","
      << (manifest.images.size() - failures) << "/" << manifest.images.size() << "\n";
  write_text(cfg.output_dir / "psnr.csv", csv.str());
  return kExitOk;
}

int run_command(const std::string& name, const CommandLine& cli) {
  try {
    const ExperimentConfig cfg = resolve_config(cli);
    if (name == "synth") {
      cmd_synth(cfg);
      return kExitOk;
    }
    if (name == "train") {
      cmd_train(cfg);
      return kExitOk;
    }
    if (name == "estimate") return cmd_estimate(cfg);
    if (name == "denoise") return cmd_denoise(cfg);
    if (name == "eval") return cmd_eval(cfg);
    throw ValidationError("unknown command '" + name + "'");
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const EstimationError& e) {
    std::cerr << "estimation failed: " << e.what() << "\n";
    return kExitEstimation;
  } catch (const TrainingDivergence& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace tweedie::app
