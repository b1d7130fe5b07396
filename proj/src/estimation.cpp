#include "tweedie/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "tweedie/errors.hpp"
#include "tweedie/rng.hpp"

namespace tweedie {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

std::vector<double> finite_only(std::span<const double> values) {
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) {
    if (std::isfinite(v)) out.push_back(v);
  }
  return out;
}

// Linear-interpolated quantile of sorted data.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

void check_inputs(const PerturbationPair& pair, const Image& s1, const Image& s2) {
  require_same_shape(pair.y1, pair.y2, "y2");
  require_same_shape(pair.y1, pair.u, "u");
  require_same_shape(pair.y1, s1, "score at y1");
  require_same_shape(pair.y1, s2, "score at y2");
  if (pair.y1.empty()) throw ValidationError("empty image");
}

}  // namespace

PerturbationPair perturb(const Image& y1, double eps, std::uint64_t seed) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw DomainError("perturbation scale must be finite and >= 0");
  PerturbationPair pair{y1, y1, Image(y1.height(), y1.width()), eps};
  for (std::size_t i = 0; i < y1.size(); ++i) {
    RandomStream rng(seed, StreamPurpose::Perturbation, i);
    pair.u[i] = standard_normal(rng);
    if (eps > 0.0) pair.y2[i] = std::max(y1[i] + eps * pair.u[i], kIntensityFloor);
  }
  return pair;
}

PerturbationPair concat_pairs(std::span<const PerturbationPair> pairs) {
  if (pairs.empty()) throw ValidationError("no images to pool");
  std::vector<Image> y1, y2, u;
  for (const auto& p : pairs) {
    if (p.eps != pairs.front().eps) throw ValidationError("pooled pairs must share eps");
    y1.push_back(p.y1);
    y2.push_back(p.y2);
    u.push_back(p.u);
  }
  return {concat_rows(y1), concat_rows(y2), concat_rows(u), pairs.front().eps};
}

std::string_view to_string(const ModelClass& c) noexcept { return c ? to_string(*c) : "unknown"; }

ModelEstimate estimate_rho(const PerturbationPair& pair, const Image& s1, const Image& s2,
                           const RhoOptions& options) {
  check_inputs(pair, s1, s2);
  if (!(options.mask_eps > 0.0)) throw ValidationError("mask_eps must be positive");
  const std::size_t n = pair.y1.size();

  std::vector<std::size_t> kept;
  std::vector<double> w_kept, b_kept;
  for (std::size_t i = 0; i < n; ++i) {
    const double b = 2.0 * pair.y1[i] * s1[i];
    const double w = 2.0 * pair.y2[i] * s2[i] - b;
    if (std::abs(w / (options.rho_assumed + b)) < options.mask_eps) {
      kept.push_back(i);
      w_kept.push_back(w);
      b_kept.push_back(b);
    }
  }
  if (kept.empty()) {
    throw EstimationError("no pixel passed the rho mask; increase mask_eps (currently " +
                          std::to_string(options.mask_eps) + ")");
  }

  ModelEstimate est;
  est.mask_count = kept.size();
  est.mask_fraction = static_cast<double>(kept.size()) / static_cast<double>(n);
  est.w_bar = nan_mean(w_kept);
  est.b_bar = nan_mean(b_kept);

  std::vector<double> p1(kept.size()), p2(kept.size());
  for (std::size_t j = 0; j < kept.size(); ++j) {
    const std::size_t i = kept[j];
    const double a = std::log(pair.y2[i] / pair.y1[i]);
    const double first = a * (est.b_bar - 2.0);
    const double disc = first * first - 4.0 * a * (-2.0 * a * est.b_bar + est.w_bar);
    const double root = std::sqrt(disc);  // NaN for disc < 0
    p1[j] = (-first + root) / (2.0 * a);
    p2[j] = (-first - root) / (2.0 * a);
    if (!std::isfinite(p1[j])) ++est.nonfinite_roots;
    if (!std::isfinite(p2[j])) ++est.nonfinite_roots;
  }
  est.p1 = nan_mean(p1);
  est.p2 = nan_mean(p2);
  if (std::isnan(est.p1) && std::isnan(est.p2)) {
    throw EstimationError("rho equation has no finite root at any masked pixel");
  }
  const double best = std::isnan(est.p1) ? est.p2 : std::isnan(est.p2) ? est.p1 : std::max(est.p1, est.p2);
  est.rho_hat = std::max(best, 0.0);
  est.classified = classify_model(est.rho_hat);
  return est;
}

ModelClass classify_model(double rho_hat) {
  if (std::isnan(rho_hat)) return std::nullopt;
  if (rho_hat < 0.9) return NoiseKind::Gaussian;
  if (rho_hat < 1.9) return NoiseKind::Poisson;
  if (rho_hat < 2.9) return NoiseKind::Gamma;
  return std::nullopt;
}

LevelEstimate estimate_level(NoiseKind kind, const PerturbationPair& pair, const Image& s1, const Image& s2,
                             std::size_t quorum) {
  check_inputs(pair, s1, s2);
  if (kind == NoiseKind::InverseGaussian) throw EstimationError("no level estimator for inverse Gaussian noise");
  std::vector<double> per_pixel;
  per_pixel.reserve(pair.y1.size());
  for (std::size_t i = 0; i < pair.y1.size(); ++i) {
    const double ds = s2[i] - s1[i];
    double v = kNaN;
    switch (kind) {
      case NoiseKind::Gaussian:
        if (std::abs(ds) >= kLevelDenominatorFloor) v = -pair.eps * pair.u[i] / ds;
        break;
      case NoiseKind::Poisson: {
        if (std::abs(ds) < kLevelDenominatorFloor) break;
        const double c = pair.eps * pair.u[i] / ds;
        const double radicand = pair.y1[i] * pair.y1[i] - 2.0 * c;
        if (radicand >= 0.0) v = -pair.y1[i] + std::sqrt(radicand);
        break;
      }
      case NoiseKind::Gamma: {
        const double dinv = 1.0 / pair.y2[i] - 1.0 / pair.y1[i];
        if (std::abs(dinv) >= kLevelDenominatorFloor) v = 1.0 + ds / dinv;
        break;
      }
      case NoiseKind::InverseGaussian:
        break;
    }
    if (std::isfinite(v)) per_pixel.push_back(v);
  }
  if (per_pixel.size() < quorum) {
    throw EstimationError("only " + std::to_string(per_pixel.size()) + " pixels gave a valid " +
                          std::string(to_string(kind)) + " level estimate (quorum " + std::to_string(quorum) +
                          ")");
  }
  std::sort(per_pixel.begin(), per_pixel.end());
  LevelEstimate est;
  est.kind = kind;
  est.pixel_count = per_pixel.size();
  est.value = quantile_sorted(per_pixel, 0.5);
  est.iqr = quantile_sorted(per_pixel, 0.75) - quantile_sorted(per_pixel, 0.25);
  if (!(est.value > 0.0)) {
    throw EstimationError("median " + std::string(to_string(kind)) + " level estimate is not positive");
  }
  return est;
}

double nan_mean(std::span<const double> values) {
  const auto f = finite_only(values);
  if (f.empty()) return kNaN;
  return pairwise_sum(f.data(), f.size()) / static_cast<double>(f.size());
}

double nan_median(std::span<const double> values) {
  auto f = finite_only(values);
  if (f.empty()) return kNaN;
  std::sort(f.begin(), f.end());
  return quantile_sorted(f, 0.5);
}

}  // namespace tweedie
