#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "tweedie/core.hpp"
#include "tweedie/image.hpp"

namespace tweedie {

struct GmmComponent {
  double weight = 1.0;
  double mean = 0.5;
  double std = 0.0;  // 0 means a point mass at `mean`

  bool operator==(const GmmComponent&) const = default;
};

/// Finite Gaussian-mixture pixel prior. Weights sum to one, means lie in
/// (kIntensityFloor, 1]. Components are untruncated Gaussians; zero-std
/// components are exact atoms.
class GmmPrior {
 public:
  GmmPrior() = default;
  explicit GmmPrior(std::vector<GmmComponent> components);

  const std::vector<GmmComponent>& components() const noexcept { return components_; }
  double mean() const noexcept;
  double variance() const noexcept;
  bool all_atoms() const noexcept;

  /// Exact pixel-value distribution of a piecewise-constant image: one atom per
  /// distinct level, weighted by its area fraction.
  static GmmPrior atoms_of(const Image& clean);

  bool operator==(const GmmPrior&) const = default;

 private:
  std::vector<GmmComponent> components_;
};

enum class SynthKind { PiecewiseConstant, GmmIid };

struct SynthSpec {
  SynthKind kind = SynthKind::PiecewiseConstant;
  std::size_t height = 64;
  std::size_t width = 64;
  int regions = 4;
  GmmPrior prior;
  std::uint64_t seed = 0;

  /// Throws ValidationError unless height, width >= 8 and regions >= 1.
  void validate() const;
};

/// Three well-separated flat levels, the default for piecewise-constant scenes.
GmmPrior default_piecewise_prior();

/// Inclusive level interval for randomly drawn noise strengths. Levels are in
/// natural units: sigma (on [0,1] intensities), zeta, or k.
struct NoiseRange {
  NoiseKind kind = NoiseKind::Gaussian;
  double lo = 0.0;
  double hi = 0.0;

  /// sigma in [5, 55]/255, zeta in [0.005, 0.1], k in [40, 120].
  static NoiseRange defaults(NoiseKind kind);
  void validate() const;
  /// Uniform draw in [lo, hi], as a NoiseModel.
  NoiseModel draw(std::uint64_t seed, std::uint64_t index) const;
};

/// Deterministic clean image. PiecewiseConstant paints `regions - 1` random
/// axis-aligned rectangles over a background, each level drawn from the prior
/// means by weight. GmmIid draws every pixel from the prior, clamped to
/// [kIntensityFloor, 1].
Image gen_clean(const SynthSpec& spec);

/// Noisy observation, floored at kIntensityFloor:
///   Gaussian  y = x + sigma n
///   Poisson   y = zeta * Poisson(x / zeta)
///   Gamma     y = x g,  g ~ Gamma(shape k, rate k)
Image sample_noisy(const Image& clean, const NoiseModel& model, std::uint64_t seed);

/// Returned by psnr() for identical images.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10 log10(peak^2 / MSE) in dB.
double psnr(const Image& a, const Image& b, double peak = 1.0);

}  // namespace tweedie
