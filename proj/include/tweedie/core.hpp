#pragma once

// Tweedie exponential-dispersion mathematics: unit deviance, saddle-point
// density, power variance function and the posterior-mean denoisers.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "tweedie/image.hpp"

namespace tweedie {

/// Power variance index rho and dispersion phi of V[mu] = phi * mu^rho.
struct TweedieParams {
  double rho = 0.0;
  double phi = 1.0;

  /// True for rho in (-inf, 0] U [1, inf), the range with a valid dispersion model.
  bool has_density() const noexcept;
};

enum class NoiseKind { Gaussian, Poisson, Gamma, InverseGaussian };

std::string_view to_string(NoiseKind kind) noexcept;
/// Accepts "gaussian", "poisson", "gamma", "inverse_gaussian" (case sensitive).
NoiseKind parse_noise_kind(std::string_view name);

/// A concrete noise distribution. `level` is sigma^2 (Gaussian), zeta (Poisson),
/// k (Gamma, shape = rate = k so the multiplicative noise has mean 1) or phi (InverseGaussian).
struct NoiseModel {
  NoiseKind kind = NoiseKind::Gaussian;
  double level = 0.0;

  static NoiseModel gaussian_sigma(double sigma) { return {NoiseKind::Gaussian, sigma * sigma}; }
  static NoiseModel poisson(double zeta) { return {NoiseKind::Poisson, zeta}; }
  static NoiseModel gamma(double k) { return {NoiseKind::Gamma, k}; }

  /// Corresponding (rho, phi): (0, sigma^2), (1, zeta), (2, 1/k), (3, phi).
  TweedieParams tweedie() const;

  /// The conventional scalar reported to users: sigma, zeta, k or phi.
  double natural_level() const;
  static NoiseModel from_natural_level(NoiseKind kind, double value);

  /// Throws DomainError unless level > 0 (and k > 1 for Gamma).
  void validate() const;

  bool operator==(const NoiseModel&) const = default;
};

// Branch-routing tolerance around rho = 1 and rho = 2.
inline constexpr double kRhoBranchTolerance = 1e-6;
// Floor for (k - 1) - y * score in batch Gamma denoising.
inline constexpr double kGammaDenominatorFloor = 1e-6;

/// Unit deviance d(y, mu). Uses the analytic limits at rho = 0, 1, 2.
double unit_deviance(double y, double mu, double rho);

/// Saddle-point density (2 pi phi y^rho)^(-1/2) exp(-d(y, mu) / (2 phi)).
double saddle_density(double y, const TweedieParams& params, double mu);

/// phi * mu^rho.
double variance_function(double mu, const TweedieParams& params);

/// phi y^(rho-1) (rho / (2y) + score).
double alpha_term(double y, const TweedieParams& params, double score);

/// Universal posterior mean y (1 + (1-rho) alpha)^(1/(1-rho)), with the
/// y exp(alpha(y, 1, phi)) limit when |rho - 1| < kRhoBranchTolerance.
/// Throws SingularEstimateError when the fractional-power base is not positive;
/// at rho = 0 the exponent is 1 and the linear value is returned as is.
double posterior_mean_universal(double y, const TweedieParams& params, double score);

/// The power expression alone, never routed to the rho = 1 limit; nullopt when
/// its base is not positive. Undefined (division by zero) at rho = 1 exactly.
std::optional<double> universal_power_form(double y, const TweedieParams& params, double score);

/// Closed-form special cases:
///   Gaussian  y + sigma^2 score
///   Poisson   (y + zeta/2) exp(zeta score)
///   Gamma     k y / ((k - 1) - y score)
/// Gaussian and Poisson accept level 0 (identity / y). Gamma throws
/// SingularEstimateError if its denominator is at or below kGammaDenominatorFloor.
double posterior_mean_special(double y, const NoiseModel& model, double score);

enum class SingularPolicy {
  Fallback,  // keep x_hat = y (universal) or clamp the denominator (Gamma) and count it
  Throw,     // raise SingularEstimateError naming the pixel
};

struct DenoiseOutput {
  Image estimate;
  std::size_t singular_pixels = 0;
};

/// Pixelwise universal formula over an image. Inputs are floored at kIntensityFloor.
DenoiseOutput denoise_universal(const Image& y, const TweedieParams& params, const Image& score,
                                SingularPolicy policy = SingularPolicy::Fallback);

/// Pixelwise special-case formula over an image. Inputs are floored at kIntensityFloor.
DenoiseOutput denoise_special(const Image& y, const NoiseModel& model, const Image& score,
                              SingularPolicy policy = SingularPolicy::Fallback);

}  // namespace tweedie
