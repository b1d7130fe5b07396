#pragma once

#include <filesystem>

#include "tweedie/image.hpp"

namespace tweedie {

/// Path of the JSON sidecar that accompanies a raw tensor payload.
std::filesystem::path sidecar_path(const std::filesystem::path& payload);

/// Writes `payload` as little-endian float32 (row-major) plus the sidecar
/// {"dtype":"f32","shape":[H,W]}.
void write_tensor(const std::filesystem::path& payload, const Image& image);

/// Reads a tensor written by write_tensor. Throws ValidationError on a
/// malformed sidecar, size mismatch or non-finite entries.
Image read_tensor(const std::filesystem::path& payload);

/// 8-bit binary graymap (P5) for visual inspection; values are clamped to
/// [0, 1] and scaled to [0, 255].
void write_pgm(const std::filesystem::path& path, const Image& image);

}  // namespace tweedie
