#include "tweedie/tensor_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <json.hpp>

#include "tweedie/errors.hpp"

namespace tweedie {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path sidecar_path(const fs::path& payload) {
  fs::path p = payload;
  p += ".json";
  return p;
}

void write_tensor(const fs::path& payload, const Image& image) {
  std::ofstream out(payload, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + payload.string() + " for writing");
  for (double v : image) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    const std::array<char, 4> bytes = {static_cast<char>(bits & 0xFF), static_cast<char>((bits >> 8) & 0xFF),
                                       static_cast<char>((bits >> 16) & 0xFF),
                                       static_cast<char>((bits >> 24) & 0xFF)};
    out.write(bytes.data(), bytes.size());
  }
  if (!out) throw std::runtime_error("failed writing " + payload.string());

  std::ofstream side(sidecar_path(payload));
  side << json{{"dtype", "f32"}, {"shape", {image.height(), image.width()}}}.dump() << "\n";
  if (!side) throw std::runtime_error("failed writing sidecar for " + payload.string());
}

Image read_tensor(const fs::path& payload) {
  std::ifstream side(sidecar_path(payload));
  if (!side) throw ValidationError("missing tensor sidecar " + sidecar_path(payload).string());
  json meta;
  try {
    side >> meta;
  } catch (const json::exception& e) {
    throw ValidationError("malformed tensor sidecar: " + std::string(e.what()));
  }
  if (!meta.is_object() || meta.value("dtype", "") != "f32" || !meta.contains("shape") ||
      !meta["shape"].is_array() || meta["shape"].size() != 2) {
    throw ValidationError("tensor sidecar must be {\"dtype\":\"f32\",\"shape\":[H,W]}");
  }
  const auto h = meta["shape"][0].get<std::size_t>();
  const auto w = meta["shape"][1].get<std::size_t>();

  std::ifstream in(payload, std::ios::binary);
  if (!in) throw ValidationError("cannot open tensor " + payload.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (raw.size() != h * w * 4) {
    throw ValidationError("tensor " + payload.string() + " has " + std::to_string(raw.size()) +
                          " bytes, expected " + std::to_string(h * w * 4));
  }
  std::vector<double> data(h * w);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto* b = reinterpret_cast<const unsigned char*>(raw.data() + 4 * i);
    const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                               (static_cast<std::uint32_t>(b[2]) << 16) |
                               (static_cast<std::uint32_t>(b[3]) << 24);
    data[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  Image image(h, w, std::move(data));
  try {
    require_finite(image, payload.string());
  } catch (const DomainError& e) {
    throw ValidationError(e.what());
  }
  return image;
}

void write_pgm(const fs::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "P5\n" << image.width() << " " << image.height() << "\n255\n";
  for (double v : image) {
    const double c = std::clamp(v, 0.0, 1.0);
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0))));
  }
}

}  // namespace tweedie
