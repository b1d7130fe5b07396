#include "tweedie/image.hpp"

#include <algorithm>
#include <cmath>

#include "tweedie/errors.hpp"

namespace tweedie {

Image::Image(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width), data_(height * width, fill) {}

Image::Image(std::size_t height, std::size_t width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (data_.size() != height_ * width_) {
    throw ValidationError("image payload has " + std::to_string(data_.size()) +
                          " entries, expected " + std::to_string(height_ * width_));
  }
}

void require_finite(const Image& image, const std::string& what) {
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (!std::isfinite(image[i])) {
      throw DomainError(what + ": non-finite entry at index " + std::to_string(i));
    }
  }
}

void require_same_shape(const Image& a, const Image& b, const std::string& what) {
  if (!a.same_shape(b)) {
    throw ValidationError(what + ": shape mismatch (" + std::to_string(a.height()) + "x" +
                          std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                          std::to_string(b.width()) + ")");
  }
}

Image clamp_below(Image image, double floor) {
  for (double& v : image) v = std::max(v, floor);
  return image;
}

Image clamp_range(Image image, double lo, double hi) {
  for (double& v : image) v = std::clamp(v, lo, hi);
  return image;
}

std::size_t count_at_or_below(const Image& image, double floor) {
  return static_cast<std::size_t>(
      std::count_if(image.begin(), image.end(), [floor](double v) { return v <= floor; }));
}

Image concat_rows(std::span<const Image> images) {
  std::vector<double> all;
  for (const Image& im : images) all.insert(all.end(), im.begin(), im.end());
  const std::size_t n = all.size();
  return Image(n == 0 ? 0 : 1, n, std::move(all));
}

}  // namespace tweedie
