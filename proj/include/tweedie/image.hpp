#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tweedie {

/// Lower clamp applied to every intensity entering a Tweedie formula.
inline constexpr double kIntensityFloor = 1e-4;

/// Row-major 2-D grid of real intensities.
class Image {
 public:
  Image() = default;
  Image(std::size_t height, std::size_t width, double fill = 0.0);
  Image(std::size_t height, std::size_t width, std::vector<double> data);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& operator()(std::size_t row, std::size_t col) noexcept { return data_[row * width_ + col]; }
  double operator()(std::size_t row, std::size_t col) const noexcept { return data_[row * width_ + col]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double>& vector() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool same_shape(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  bool operator==(const Image&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

/// Throws DomainError unless every entry is finite.
void require_finite(const Image& image, const std::string& what);

/// Throws ValidationError if the shapes differ.
void require_same_shape(const Image& a, const Image& b, const std::string& what);

/// Copy with every entry raised to at least `floor`.
Image clamp_below(Image image, double floor = kIntensityFloor);

/// Copy with every entry clamped into [lo, hi].
Image clamp_range(Image image, double lo, double hi);

/// Number of entries that sit exactly at `floor` or below it.
std::size_t count_at_or_below(const Image& image, double floor = kIntensityFloor);

/// Concatenate images into a single 1 x N row (dataset-pooled estimation).
Image concat_rows(std::span<const Image> images);

}  // namespace tweedie
