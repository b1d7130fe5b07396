#pragma once

// Score fields l'(y) = d/dy log p(y): exact oracles over GMM priors and the
// backend interface shared with the learned AR-DAE network.

#include <atomic>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "tweedie/core.hpp"
#include "tweedie/image.hpp"
#include "tweedie/noise_sim.hpp"

namespace tweedie {

struct ScoreField {
  Image values;
  std::string backend;  // oracle kind or checkpoint identity
};

// ---- Gaussian noise over a GMM prior (closed form) -------------------------

/// log p(y) with p(y) = sum_j w_j N(y; m_j, s_j^2 + sigma^2).
double gaussian_log_marginal(double y, const GmmPrior& prior, double sigma);
/// d/dy log p(y), evaluated via responsibilities in log-sum-exp form.
double analytic_score_gaussian(double y, const GmmPrior& prior, double sigma);
ScoreField analytic_score_gaussian(const Image& y, const GmmPrior& prior, double sigma);

// ---- Any supported noise over a GMM prior (quadrature) --------------------

struct QuadratureOptions {
  int order = 48;          // Gauss-Legendre nodes per panel
  int panels = 8;          // panels per mixture component (plus geometric refinement at the floor)
  double half_width = 10;  // component support, in standard deviations
  bool verify = false;     // also evaluate at twice the order and compare
  double tolerance = 1e-8; // allowed |delta score| / max(1, |score|) under verification
};

/// Marginal p(y) = int p(y|x) dpi(x) by composite Gauss-Legendre over each
/// component's support [max(1e-4, m - 10 s), m + 10 s], with the panel at the
/// floor split geometrically; atoms are summed exactly. Poisson uses the continuous interpolation
/// p(y|x) = (x/zeta)^n e^{-x/zeta} / (zeta Gamma(n+1)), n = y/zeta.
/// Gamma uses shape k, rate k/x. Gaussian is also accepted, which gives an
/// independent numerical check of the closed-form oracle.
class QuadratureMarginal {
 public:
  QuadratureMarginal(const GmmPrior& prior, const NoiseModel& model, QuadratureOptions options = {});

  double log_marginal(double y) const;
  /// Analytic derivative under the integral: E[d/dy log p(y|x) | y].
  double score(double y) const;
  ScoreField score(const Image& y) const;

  const NoiseModel& model() const noexcept { return model_; }
  const QuadratureOptions& options() const noexcept { return options_; }

 private:
  struct Node {
    double x;
    double log_x;
    double log_weight;  // log(prior density * quadrature weight)
  };
  static std::vector<Node> build_nodes(const GmmPrior& prior, int order, int panels, double half_width);
  double score_with(const std::vector<Node>& nodes, double y) const;

  NoiseModel model_;
  QuadratureOptions options_;
  std::vector<Node> nodes_;
  std::vector<Node> check_nodes_;  // 2x order, only when verifying
};

ScoreField numeric_marginal_score(const Image& y, const GmmPrior& prior, const NoiseModel& model,
                                  QuadratureOptions options = {});

// ---- Backends ---------------------------------------------------------------

/// Anything that maps an image to its score field.
class ScoreBackend {
 public:
  virtual ~ScoreBackend() = default;
  virtual ScoreField evaluate(const Image& y) const = 0;
  virtual std::string name() const = 0;
};

class GaussianOracle final : public ScoreBackend {
 public:
  GaussianOracle(GmmPrior prior, double sigma);
  ScoreField evaluate(const Image& y) const override;
  std::string name() const override { return "oracle-gaussian"; }

 private:
  GmmPrior prior_;
  double sigma_;
};

class QuadratureOracle final : public ScoreBackend {
 public:
  QuadratureOracle(const GmmPrior& prior, const NoiseModel& model, QuadratureOptions options = {});
  ScoreField evaluate(const Image& y) const override;
  std::string name() const override { return "oracle-quadrature"; }

 private:
  QuadratureMarginal marginal_;
};

/// Exact oracle for the given noise: closed form for Gaussian, quadrature otherwise.
std::unique_ptr<ScoreBackend> make_oracle(const GmmPrior& prior, const NoiseModel& model);

/// Forwards to another backend and counts evaluations.
class CountingBackend final : public ScoreBackend {
 public:
  explicit CountingBackend(const ScoreBackend& inner) : inner_(inner) {}
  ScoreField evaluate(const Image& y) const override {
    ++calls_;
    return inner_.evaluate(y);
  }
  std::string name() const override { return inner_.name(); }
  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  const ScoreBackend& inner_;
  mutable std::atomic<std::size_t> calls_{0};
};

}  // namespace tweedie
