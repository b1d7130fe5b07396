#pragma once

// Experiment configuration and dataset manifest for the command-line tool.

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "tweedie/ardae.hpp"
#include "tweedie/noise_sim.hpp"
#include "tweedie/pipeline.hpp"

namespace tweedie::app {

inline constexpr int kSchemaVersion = 1;

/// One group of synthetic images sharing a noise range.
struct NoiseGroup {
  NoiseRange range;  // natural units; Gaussian sigma on the [0, 1] scale
  int count = 1;
};

enum class BackendKind { Oracle, OracleGaussian, OracleQuadrature, Ardae };

struct BackendSpec {
  BackendKind kind = BackendKind::Oracle;
  std::filesystem::path checkpoint;  // Ardae only
  std::string text() const;
};

/// "oracle", "oracle-gaussian", "oracle-quadrature" or "ardae:PATH".
BackendSpec parse_backend(const std::string& text);

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "run";
  std::optional<std::filesystem::path> manifest;  // default: <output_dir>/manifest.json
  SynthSpec synth;                                // seed field unused; per-image seeds derive from `seed`
  std::vector<NoiseGroup> noise;
  BackendSpec backend;
  std::optional<nlohmann::json> ardae_overrides;  // applied on top of per-model defaults
  EstimationConfig estimation;
  bool pooled = false;
  bool write_pgm = false;

  std::filesystem::path manifest_path() const;
  /// AR-DAE settings for data of the given noise kind.
  ArdaeConfig ardae_for(NoiseKind kind) const;
};

/// Parses and validates. Unknown keys anywhere raise ValidationError. Gaussian
/// noise levels are read on the 0-255 scale and divided by 255.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const GmmPrior& prior);
GmmPrior prior_from_json(const nlohmann::json& j);

struct ManifestEntry {
  std::string id;
  std::string clean;  // file names relative to the manifest directory
  std::string noisy;
  NoiseModel noise;
  std::uint64_t clean_seed = 0;
  std::uint64_t noise_seed = 0;
  GmmPrior prior;  // exact pixel prior of the clean image (oracle input)

  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  std::vector<ManifestEntry> images;
  std::filesystem::path directory;

  bool operator==(const Manifest& o) const { return images == o.images; }
};

nlohmann::json to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& directory);
Manifest load_manifest(const std::filesystem::path& path);

}  // namespace tweedie::app
