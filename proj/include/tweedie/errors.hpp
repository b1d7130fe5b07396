#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace tweedie {

/// Non-finite, non-positive or otherwise out-of-domain argument.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Configuration or input validation failure (CLI exit code 2).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A posterior-mean expression has no real value at some pixel.
class SingularEstimateError : public std::runtime_error {
 public:
  static constexpr std::size_t kNoPixel = std::numeric_limits<std::size_t>::max();

  explicit SingularEstimateError(const std::string& what, std::size_t pixel = kNoPixel)
      : std::runtime_error(what), pixel_(pixel) {}

  std::size_t pixel() const noexcept { return pixel_; }

 private:
  std::size_t pixel_;
};

/// Blind noise-model or noise-level estimation could not produce a value (CLI exit code 3).
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical integration did not self-converge.
class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tweedie
