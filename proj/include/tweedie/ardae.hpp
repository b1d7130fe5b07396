#pragma once

// Amortized residual denoising autoencoder: a patch MLP R trained so that
// -R(y + s u) ~ u / s, which makes R an estimate of the score of the noisy data.

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tweedie/core.hpp"
#include "tweedie/image.hpp"
#include "tweedie/mlp.hpp"
#include "tweedie/score.hpp"

namespace tweedie {

struct ArdaeConfig {
  double sigma_a_max = 0.1;
  double sigma_a_min = 0.001;
  int schedule_len = 10;
  double ema_decay = 0.999;
  int epochs = 20;
  int steps_per_epoch = 0;  // 0: one pass over all training pixels
  int batch_size = 256;
  double learning_rate = 2e-4;
  double final_learning_rate = 2e-5;
  int lr_decay_epoch = -1;  // -1: half of `epochs`
  int patch_radius = 4;
  std::vector<int> hidden = {128, 128};
  std::uint64_t seed = 0;

  /// sigma_a in [0.001, 0.1] for Gaussian and Gamma, [0.02, 0.1] for Poisson.
  static ArdaeConfig defaults_for(NoiseKind kind);

  int patch_size() const noexcept { return (2 * patch_radius + 1) * (2 * patch_radius + 1); }
  std::vector<int> widths() const;
  int decay_epoch() const noexcept { return lr_decay_epoch < 0 ? epochs / 2 : lr_decay_epoch; }

  /// Throws ValidationError on inconsistent settings.
  void validate() const;
  bool operator==(const ArdaeConfig&) const = default;
};

nlohmann::json to_json(const ArdaeConfig& config);
/// Unknown keys are rejected; missing keys keep their defaults.
ArdaeConfig ardae_config_from_json(const nlohmann::json& j, ArdaeConfig base = {});
/// FNV-1a 64 of the canonical JSON form, as 16 hex digits.
std::string config_hash(const ArdaeConfig& config);

/// Length-T sequence from sigma_max down to sigma_min with constant ratio.
std::vector<double> geometric_schedule(double sigma_max, double sigma_min, int length);

/// (2r+1)^2 x N matrix of patches centred on the given flat pixel indices,
/// with reflective padding. Requires height, width > r.
Eigen::MatrixXd extract_patches(const Image& image, std::span<const std::size_t> pixels, int radius);

/// Loss mean_j (u_cj + sigma_a R(y_j + sigma_a u_j))^2 for fixed draws u (same
/// shape as `patches`), where c is the centre row. Writes gradients when asked.
double ardae_residual_loss(const MlpParams& params, const Eigen::MatrixXd& patches, const Eigen::MatrixXd& u,
                           double sigma_a, MlpParams* grad = nullptr);

struct LossAndGrad {
  double loss;
  MlpParams grad;
};

/// Draws u ~ N(0, I) from `seed` and evaluates the residual loss and its gradient.
/// Throws TrainingDivergence if the loss is not finite.
LossAndGrad ardae_loss_and_grad(const MlpParams& params, const Eigen::MatrixXd& patches, double sigma_a,
                                std::uint64_t seed);

struct ArdaeModel {
  ArdaeConfig config;
  MlpParams params;  // online weights
  MlpParams ema;     // shadow copy used for inference
};

/// Fresh model: online and EMA weights both equal the seeded initialization.
ArdaeModel init_ardae(const ArdaeConfig& config);

struct TrainingResult {
  ArdaeModel model;
  std::vector<double> epoch_loss;  // mean step loss per epoch
  std::size_t steps = 0;
};

/// Raised when the loss or the weights stop being finite. Carries the model
/// as it was after the last finite step.
class TrainingDivergence : public std::runtime_error {
 public:
  TrainingDivergence(const std::string& what, ArdaeModel last_good, std::size_t step)
      : std::runtime_error(what), last_good_(std::move(last_good)), step_(step) {}
  const ArdaeModel& last_good() const noexcept { return last_good_; }
  std::size_t step() const noexcept { return step_; }

 private:
  ArdaeModel last_good_;
  std::size_t step_;
};

/// Adam on the residual loss with sigma_a drawn per step as a uniform index
/// into the geometric schedule, and EMA tracking of the weights.
TrainingResult train_ardae(const ArdaeConfig& config, std::span<const Image> data);
/// Continue from an existing model (used by tests and resumable runs).
TrainingResult train_ardae(ArdaeModel model, std::span<const Image> data);

/// Score field of `y` from the given weights, one patch per pixel.
ScoreField eval_score(const MlpParams& params, int patch_radius, const Image& y);

void save_checkpoint(const std::filesystem::path& path, const ArdaeModel& model);
ArdaeModel load_checkpoint(const std::filesystem::path& path);

/// Learned score backend using the EMA weights.
class ArdaeScore final : public ScoreBackend {
 public:
  explicit ArdaeScore(ArdaeModel model);
  ScoreField evaluate(const Image& y) const override;
  std::string name() const override { return name_; }
  const ArdaeModel& model() const noexcept { return model_; }

 private:
  ArdaeModel model_;
  std::string name_;
};

}  // namespace tweedie
