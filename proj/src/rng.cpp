#include "tweedie/rng.hpp"

#include <cmath>
#include <numbers>

#include "tweedie/errors.hpp"

namespace tweedie {

std::uint64_t RandomStream::below(std::uint64_t n) noexcept {
  __extension__ using u128 = unsigned __int128;
  const u128 product = static_cast<u128>((*this)()) * n;
  return static_cast<std::uint64_t>(product >> 64);
}

double standard_normal(RandomStream& rng) noexcept {
  const double u1 = rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

std::uint64_t poisson_inversion(RandomStream& rng, double mean) {
  const double u = rng.uniform();
  double p = std::exp(-mean);
  double cdf = p;
  std::uint64_t k = 0;
  // The cap guards against u landing in the last ulp of the CDF.
  while (u > cdf && k < 1000) {
    ++k;
    p *= mean / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

// W. Hormann, "The transformed rejection method for generating Poisson random
// variables", Insurance: Mathematics and Economics 12 (1993).
std::uint64_t poisson_ptrs(RandomStream& rng, double mean) {
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        -mean + k * loglam - std::lgamma(k + 1.0)) {
      return static_cast<std::uint64_t>(k);
    }
  }
}

// G. Marsaglia and W. W. Tsang, "A simple method for generating gamma
// variables", ACM TOMS 26 (2000).
double gamma_marsaglia_tsang(RandomStream& rng, double shape) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = standard_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace

std::uint64_t poisson(RandomStream& rng, double mean) {
  if (!std::isfinite(mean) || mean < 0.0) throw DomainError("Poisson mean must be finite and >= 0");
  if (mean == 0.0) return 0;
  return mean < 30.0 ? poisson_inversion(rng, mean) : poisson_ptrs(rng, mean);
}

double gamma_unit_scale(RandomStream& rng, double shape) {
  if (!std::isfinite(shape) || shape <= 0.0) throw DomainError("Gamma shape must be positive");
  if (shape >= 1.0) return gamma_marsaglia_tsang(rng, shape);
  const double g = gamma_marsaglia_tsang(rng, shape + 1.0);
  return g * std::pow(rng.uniform(), 1.0 / shape);
}

}  // namespace tweedie
