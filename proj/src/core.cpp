#include "tweedie/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "tweedie/errors.hpp"

namespace tweedie {

namespace {

void require_positive(double v, const char* name) {
  if (!std::isfinite(v) || v <= 0.0) {
    throw DomainError(std::string(name) + " must be finite and positive, got " + std::to_string(v));
  }
}

void require_finite_value(double v, const char* name) {
  if (!std::isfinite(v)) throw DomainError(std::string(name) + " must be finite");
}

void require_density_params(const TweedieParams& p) {
  require_finite_value(p.rho, "rho");
  require_positive(p.phi, "phi");
  if (!p.has_density()) {
    throw DomainError("rho = " + std::to_string(p.rho) +
                      " lies in (0, 1), where no exponential dispersion model exists");
  }
}

// Returns nullopt where the fractional-power base is not positive.
std::optional<double> universal_mean(double y, const TweedieParams& p, double score) {
  if (std::abs(p.rho - 1.0) < kRhoBranchTolerance) {
    const double alpha = p.phi * (0.5 / y + score);
    return y * std::exp(alpha);
  }
  return universal_power_form(y, p, score);
}

}  // namespace

std::optional<double> universal_power_form(double y, const TweedieParams& p, double score) {
  // y (1 + t alpha)^(1/t) == (y^t + t phi (rho/(2y) + score))^(1/t), t = 1 - rho.
  const double t = 1.0 - p.rho;
  const double base = std::pow(y, t) + t * p.phi * (p.rho / (2.0 * y) + score);
  if (t == 1.0) return base;  // rho = 0: exponent 1, no root to take
  if (!(base > 0.0)) return std::nullopt;
  return std::pow(base, 1.0 / t);
}

namespace {

void validate_for_denoising(const NoiseModel& model) {
  switch (model.kind) {
    case NoiseKind::Gaussian:
    case NoiseKind::Poisson:
      if (!std::isfinite(model.level) || model.level < 0.0) {
        throw DomainError("noise level must be finite and non-negative");
      }
      break;
    case NoiseKind::Gamma:
      if (!std::isfinite(model.level) || model.level <= 1.0) {
        throw DomainError("Gamma denoising needs k > 1, got " + std::to_string(model.level));
      }
      break;
    case NoiseKind::InverseGaussian:
      throw DomainError(
          "inverse Gaussian has no closed-form special case; use the universal formula with rho = 3");
  }
}

}  // namespace

bool TweedieParams::has_density() const noexcept { return rho <= 0.0 || rho >= 1.0; }

std::string_view to_string(NoiseKind kind) noexcept {
  switch (kind) {
    case NoiseKind::Gaussian: return "gaussian";
    case NoiseKind::Poisson: return "poisson";
    case NoiseKind::Gamma: return "gamma";
    case NoiseKind::InverseGaussian: return "inverse_gaussian";
  }
  return "unknown";
}

NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "gaussian") return NoiseKind::Gaussian;
  if (name == "poisson") return NoiseKind::Poisson;
  if (name == "gamma") return NoiseKind::Gamma;
  if (name == "inverse_gaussian") return NoiseKind::InverseGaussian;
  throw ValidationError("unknown noise model '" + std::string(name) + "'");
}

TweedieParams NoiseModel::tweedie() const {
  switch (kind) {
    case NoiseKind::Gaussian: return {0.0, level};
    case NoiseKind::Poisson: return {1.0, level};
    case NoiseKind::Gamma: return {2.0, 1.0 / level};
    case NoiseKind::InverseGaussian: return {3.0, level};
  }
  return {};
}

double NoiseModel::natural_level() const {
  return kind == NoiseKind::Gaussian ? std::sqrt(level) : level;
}

NoiseModel NoiseModel::from_natural_level(NoiseKind kind, double value) {
  return kind == NoiseKind::Gaussian ? NoiseModel{kind, value * value} : NoiseModel{kind, value};
}

void NoiseModel::validate() const {
  require_positive(level, "noise level");
  if (kind == NoiseKind::Gamma && level <= 1.0) {
    throw DomainError("Gamma noise needs k > 1, got " + std::to_string(level));
  }
}

double unit_deviance(double y, double mu, double rho) {
  require_positive(y, "y");
  require_positive(mu, "mu");
  require_density_params({rho, 1.0});
  if (y == mu) return 0.0;

  double d = 0.0;
  if (rho == 0.0) {
    d = (y - mu) * (y - mu);
  } else if (std::abs(rho - 1.0) < kRhoBranchTolerance) {
    d = 2.0 * (y * std::log(y / mu) - (y - mu));
  } else if (std::abs(rho - 2.0) < kRhoBranchTolerance) {
    const double r = y / mu;
    d = 2.0 * (r - std::log(r) - 1.0);
  } else {
    const double a = 1.0 - rho;
    const double b = 2.0 - rho;
    d = 2.0 * (std::pow(y, b) / (a * b) - y * std::pow(mu, a) / a + std::pow(mu, b) / b);
  }
  // Rounding can leave a tiny negative residue when y is close to mu.
  return std::max(d, 0.0);
}

double saddle_density(double y, const TweedieParams& params, double mu) {
  require_density_params(params);
  const double d = unit_deviance(y, mu, params.rho);
  const double log_p = -0.5 * std::log(2.0 * std::numbers::pi * params.phi) -
                       0.5 * params.rho * std::log(y) - d / (2.0 * params.phi);
  return std::exp(log_p);
}

double variance_function(double mu, const TweedieParams& params) {
  require_positive(mu, "mu");
  require_positive(params.phi, "phi");
  require_finite_value(params.rho, "rho");
  return params.phi * std::pow(mu, params.rho);
}

double alpha_term(double y, const TweedieParams& params, double score) {
  require_positive(y, "y");
  require_positive(params.phi, "phi");
  require_finite_value(params.rho, "rho");
  require_finite_value(score, "score");
  return params.phi * std::pow(y, params.rho - 1.0) * (params.rho / (2.0 * y) + score);
}

double posterior_mean_universal(double y, const TweedieParams& params, double score) {
  require_positive(y, "y");
  require_positive(params.phi, "phi");
  require_finite_value(params.rho, "rho");
  require_finite_value(score, "score");
  const auto mean = universal_mean(y, params, score);
  if (!mean) {
    throw SingularEstimateError("1 + (1 - rho) alpha <= 0: fractional power undefined at y = " +
                                std::to_string(y));
  }
  return *mean;
}

double posterior_mean_special(double y, const NoiseModel& model, double score) {
  require_positive(y, "y");
  require_finite_value(score, "score");
  validate_for_denoising(model);
  switch (model.kind) {
    case NoiseKind::Gaussian:
      return y + model.level * score;
    case NoiseKind::Poisson:
      return (y + 0.5 * model.level) * std::exp(model.level * score);
    case NoiseKind::Gamma: {
      const double k = model.level;
      const double den = (k - 1.0) - y * score;
      if (!(den > kGammaDenominatorFloor)) {
        throw SingularEstimateError("Gamma denominator (k - 1) - y score = " + std::to_string(den) +
                                    " is not positive");
      }
      return k * y / den;
    }
    case NoiseKind::InverseGaussian:
      break;
  }
  throw DomainError("unsupported noise model");
}

DenoiseOutput denoise_universal(const Image& y, const TweedieParams& params, const Image& score,
                                SingularPolicy policy) {
  require_same_shape(y, score, "denoise_universal");
  require_positive(params.phi, "phi");
  require_finite_value(params.rho, "rho");
  DenoiseOutput out{Image(y.height(), y.width()), 0};
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double yi = std::max(y[i], kIntensityFloor);
    const auto mean = std::isfinite(score[i]) ? universal_mean(yi, params, score[i]) : std::nullopt;
    if (mean) {
      out.estimate[i] = *mean;
      continue;
    }
    if (policy == SingularPolicy::Throw) {
      throw SingularEstimateError("universal posterior mean undefined at pixel " + std::to_string(i), i);
    }
    out.estimate[i] = yi;
    ++out.singular_pixels;
  }
  return out;
}

DenoiseOutput denoise_special(const Image& y, const NoiseModel& model, const Image& score,
                              SingularPolicy policy) {
  require_same_shape(y, score, "denoise_special");
  validate_for_denoising(model);
  DenoiseOutput out{Image(y.height(), y.width()), 0};
  const double level = model.level;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double yi = std::max(y[i], kIntensityFloor);
    const double s = score[i];
    switch (model.kind) {
      case NoiseKind::Gaussian:
        out.estimate[i] = yi + level * s;
        break;
      case NoiseKind::Poisson:
        out.estimate[i] = (yi + 0.5 * level) * std::exp(level * s);
        break;
      case NoiseKind::Gamma: {
        double den = (level - 1.0) - yi * s;
        if (!(den > kGammaDenominatorFloor)) {
          if (policy == SingularPolicy::Throw) {
            throw SingularEstimateError("Gamma denominator not positive at pixel " + std::to_string(i), i);
          }
          den = kGammaDenominatorFloor;
          ++out.singular_pixels;
        }
        out.estimate[i] = level * yi / den;
        break;
      }
      case NoiseKind::InverseGaussian:
        break;
    }
  }
  return out;
}

}  // namespace tweedie
