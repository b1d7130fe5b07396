#pragma once

// Counter-based random streams. Every draw is a pure function of
// (seed, purpose, index, position in stream), so per-pixel generation is
// deterministic under any partitioning of the pixels.

#include <cstdint>
#include <limits>

namespace tweedie {

/// Separates independent uses of one user seed.
enum class StreamPurpose : std::uint64_t {
  CleanImage = 0x11,
  Noise = 0x22,
  Perturbation = 0x33,
  TrainingNoise = 0x44,
  TrainingSchedule = 0x55,
  Initialization = 0x66,
  Synthesis = 0x77,
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// SplitMix64 stream; satisfies UniformRandomBitGenerator.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t key) noexcept : state_(key) {}
  RandomStream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index = 0) noexcept
      : state_(mix64(mix64(seed ^ static_cast<std::uint64_t>(purpose)) + mix64(index))) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Integer uniform on [0, n). Uses 128-bit multiply-shift.
  std::uint64_t below(std::uint64_t n) noexcept;

 private:
  std::uint64_t state_;
};

/// Standard normal by Box-Muller; consumes exactly two uniforms, keeps no cache.
double standard_normal(RandomStream& rng) noexcept;

/// Poisson(mean). Sequential-search inversion below mean 30; above it,
/// Hormann's transformed rejection with squeeze (PTRS).
std::uint64_t poisson(RandomStream& rng, double mean);

/// Gamma(shape, scale 1). Marsaglia-Tsang squeeze/rejection for shape >= 1;
/// shape < 1 is boosted via Gamma(shape + 1) * U^(1/shape).
double gamma_unit_scale(RandomStream& rng, double shape);

}  // namespace tweedie
