#pragma once

// JSON forms of estimation and denoising reports. Wall-clock timings are
// left out so that reruns serialize byte-identically.

#include <json.hpp>

#include "tweedie/estimation.hpp"
#include "tweedie/pipeline.hpp"

namespace tweedie {

/// Name of the reported level for a model: "sigma", "zeta", "k" or "phi".
const char* level_name(NoiseKind kind) noexcept;

nlohmann::json to_json(const ModelEstimate& m);
/// Carries both the natural level (sigma, zeta, k) and the dispersion-side value (sigma^2, zeta, k).
nlohmann::json to_json(const LevelEstimate& l);
/// {rho_hat, model, level, mask_fraction, pixel_count, seed, backend} plus diagnostics.
nlohmann::json to_json(const EstimationReport& r);
nlohmann::json to_json(const DenoiseReport& r);

}  // namespace tweedie
