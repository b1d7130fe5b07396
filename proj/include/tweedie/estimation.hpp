#pragma once

// Blind estimation of the power index rho and of the noise level from two
// score evaluations at y1 and a slightly perturbed y2.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "tweedie/core.hpp"
#include "tweedie/image.hpp"

namespace tweedie {

struct PerturbationPair {
  Image y1;
  Image y2;
  Image u;  // unit normal draws, before clamping
  double eps = 0.0;
};

/// y2 = y1 + eps u, u ~ N(0, I) per pixel, then floored at kIntensityFloor.
/// eps = 0 returns y2 == y1 exactly.
PerturbationPair perturb(const Image& y1, double eps, std::uint64_t seed);

/// Stacks the pairs of several images into one 1 x N pair (pooled estimation).
PerturbationPair concat_pairs(std::span<const PerturbationPair> pairs);

struct RhoOptions {
  double mask_eps = 1e-5;
  double rho_assumed = 2.2;
};

/// Classified model; nullopt means Unknown (rho_hat >= 2.9).
using ModelClass = std::optional<NoiseKind>;
std::string_view to_string(const ModelClass& c) noexcept;

struct ModelEstimate {
  double rho_hat = 0.0;
  ModelClass classified;
  double mask_fraction = 0.0;
  std::size_t mask_count = 0;
  double p1 = 0.0;  // mean of the "+" root
  double p2 = 0.0;  // mean of the "-" root
  double w_bar = 0.0;
  double b_bar = 0.0;
  std::size_t nonfinite_roots = 0;
};

/// Two-point estimate of rho. Per pixel a = log(y2/y1), b = 2 y1 s1,
/// w = 2 y2 s2 - 2 y1 s1. Pixels with |w / (rho_assumed + b)| < mask_eps are
/// kept; w and b are averaged over them; a(rho - 2)(rho + b_bar) + w_bar = 0 is
/// solved per kept pixel and each root averaged. rho_hat = max(p1, p2, 0).
/// Throws EstimationError on an empty mask or when no root is finite.
ModelEstimate estimate_rho(const PerturbationPair& pair, const Image& s1, const Image& s2,
                           const RhoOptions& options = {});

/// [0, 0.9) Gaussian, [0.9, 1.9) Poisson, [1.9, 2.9) Gamma, otherwise Unknown.
ModelClass classify_model(double rho_hat);

struct LevelEstimate {
  NoiseKind kind = NoiseKind::Gaussian;
  double value = 0.0;  // sigma^2, zeta or k
  std::size_t pixel_count = 0;
  double iqr = 0.0;

  NoiseModel model() const { return {kind, value}; }
};

inline constexpr std::size_t kDefaultLevelQuorum = 16;
inline constexpr double kLevelDenominatorFloor = 1e-12;

/// Per-pixel level estimates, then their median:
///   Gaussian  sigma^2 = -eps u / (s2 - s1)
///   Poisson   zeta    = -y1 + sqrt(y1^2 - 2c),  c = eps u / (s2 - s1)
///   Gamma     k       = 1 + (s2 - s1) / (1/y2 - 1/y1)
/// Pixels with a denominator below 1e-12 in magnitude, a negative radicand or a
/// non-finite estimate are skipped. Throws EstimationError when fewer than
/// `quorum` pixels remain or the median is not positive.
LevelEstimate estimate_level(NoiseKind kind, const PerturbationPair& pair, const Image& s1, const Image& s2,
                             std::size_t quorum = kDefaultLevelQuorum);

/// Mean over finite entries by fixed-order pairwise summation; NaN if none.
double nan_mean(std::span<const double> values);
/// Median of the finite entries; NaN if none.
double nan_median(std::span<const double> values);

}  // namespace tweedie
