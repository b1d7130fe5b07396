#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "tweedie/app/config.hpp"
#include "tweedie/score.hpp"

namespace tweedie::app {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitValidation = 2,
  kExitEstimation = 3,
  kExitDivergence = 4,
};

struct CommandLine {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
};

/// Loads the config and applies --seed / --out.
ExperimentConfig resolve_config(const CommandLine& cli);

/// Clean/noisy tensor pairs plus manifest.json in the output directory.
void cmd_synth(const ExperimentConfig& cfg);
/// AR-DAE checkpoint (model.ardae) and loss.csv.
void cmd_train(const ExperimentConfig& cfg);
/// Per-image estimation reports and estimate_summary.csv. Returns the exit code.
int cmd_estimate(const ExperimentConfig& cfg);
/// Blind denoising of every noisy image. Returns the exit code.
int cmd_denoise(const ExperimentConfig& cfg);
/// PSNR table with noisy | blind | known | oracle_posterior columns.
int cmd_eval(const ExperimentConfig& cfg);

/// Dispatches by name and maps exceptions to exit codes, printing the message to stderr.
int run_command(const std::string& name, const CommandLine& cli);

/// Score backend for one manifest entry (oracles need its prior and true noise).
std::unique_ptr<ScoreBackend> make_backend(const BackendSpec& spec, const ManifestEntry& entry);

}  // namespace tweedie::app
