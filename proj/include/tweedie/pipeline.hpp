#pragma once

// Blind and known-model denoising, and the brute-force posterior mean used to
// check them.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tweedie/core.hpp"
#include "tweedie/errors.hpp"
#include "tweedie/estimation.hpp"
#include "tweedie/image.hpp"
#include "tweedie/noise_sim.hpp"
#include "tweedie/score.hpp"

namespace tweedie {

struct EstimationConfig {
  double eps = 1e-5;       // perturbation scale
  double mask_eps = 1e-5;  // rho mask threshold
  double rho_assumed = 2.2;
  std::size_t quorum = kDefaultLevelQuorum;
  std::uint64_t seed = 0;

  /// Throws ValidationError; eps = 0 is rejected because y1 must differ from y2.
  void validate() const;
  RhoOptions rho_options() const { return {mask_eps, rho_assumed}; }
};

/// What one blind estimation run produced.
struct EstimationReport {
  ModelEstimate model;
  std::optional<LevelEstimate> level;  // absent when the model is Unknown
  std::size_t pixel_count = 0;
  std::uint64_t seed = 0;
  std::string backend;
};

struct DenoiseReport {
  std::optional<EstimationReport> estimation;  // blind path only
  std::optional<NoiseModel> applied;           // model used by the final formula
  std::size_t singular_pixels = 0;
  std::size_t clamped_pixels = 0;  // outputs moved into [eps_y, 1]
  std::size_t score_evaluations = 0;
  std::optional<double> psnr_input;
  std::optional<double> psnr_output;
  double seconds_estimate = 0.0;  // wall clock; excluded from serialized reports
  double seconds_total = 0.0;
};

struct DenoiseResult {
  Image x_hat;
  DenoiseReport report;
};

/// Blind estimation failed after classification (Unknown model); carries the partial report.
class BlindAbort : public EstimationError {
 public:
  BlindAbort(const std::string& what, EstimationReport report)
      : EstimationError(what), report_(std::move(report)) {}
  const EstimationReport& report() const noexcept { return report_; }

 private:
  EstimationReport report_;
};

struct BlindEstimate {
  EstimationReport report;
  Image score_y1;  // reused by the final formula
};

/// Perturb, score y1 and y2 (two evaluations), estimate rho, classify and,
/// unless Unknown, estimate the level.
BlindEstimate estimate_noise(const Image& y, const ScoreBackend& backend, const EstimationConfig& cfg);

/// Dataset-pooled variant: per-image perturbations (seed offset by image index)
/// and scores, then one rho and one level estimate over all pixels.
EstimationReport estimate_noise_pooled(std::span<const Image> images, const ScoreBackend& backend,
                                       const EstimationConfig& cfg);

/// Full blind pipeline: estimate_noise, then the closed-form posterior mean for
/// the classified model using the score at y1. Output clamped to [eps_y, 1].
/// Throws BlindAbort on an Unknown model.
DenoiseResult denoise_blind(const Image& y, const ScoreBackend& backend, const EstimationConfig& cfg);

/// One score evaluation, then the closed-form posterior mean for `model`.
/// Output clamped to [eps_y, 1].
DenoiseResult denoise_known(const Image& y, const NoiseModel& model, const ScoreBackend& backend);

/// Shared final step of both paths.
DenoiseResult apply_posterior_mean(const Image& y, const NoiseModel& model, const Image& score);

struct BruteForceOptions {
  double tolerance = 1e-9;  // required relative self-convergence
  double half_width = 12;   // component support in standard deviations
};

/// E[x | y] = int x p(y|x) dpi / int p(y|x) dpi by Gauss-Kronrod (61 points,
/// shallow adaptive refinement) on pieces cut at each component's peak.
/// Poisson requires y on the lattice {zeta n}, n >= 0. Throws QuadratureError
/// unless the result agrees with a rerun on bisected pieces to `tolerance`.
double brute_posterior_mean(double y, const GmmPrior& prior, const NoiseModel& model,
                            const BruteForceOptions& options = {});

}  // namespace tweedie
