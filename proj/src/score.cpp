#include "tweedie/score.hpp"

#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <limits>
#include <numbers>

#include "tweedie/errors.hpp"
#include "tweedie/quadrature.hpp"

namespace tweedie {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_sigma(double sigma) {
  if (!std::isfinite(sigma) || sigma <= 0.0) throw DomainError("sigma must be finite and positive");
}

// Responsibility-weighted statistics of a mixture in log space.
struct LogMixture {
  double max_log = kNegInf;
  double sum = 0.0;       // sum exp(l - max_log)
  double weighted = 0.0;  // sum exp(l - max_log) * d

  void rescale(double new_max) {
    if (max_log == kNegInf) {
      max_log = new_max;
      return;
    }
    const double f = std::exp(max_log - new_max);
    sum *= f;
    weighted *= f;
    max_log = new_max;
  }

  void add(double log_term, double d) {
    if (log_term > max_log) rescale(log_term);
    const double e = std::exp(log_term - max_log);
    sum += e;
    weighted += e * d;
  }

  double log_total() const { return max_log + std::log(sum); }
  double mean() const { return weighted / sum; }
};

}  // namespace

double gaussian_log_marginal(double y, const GmmPrior& prior, double sigma) {
  require_sigma(sigma);
  LogMixture mix;
  for (const auto& c : prior.components()) {
    const double v = c.std * c.std + sigma * sigma;
    const double r = y - c.mean;
    mix.add(std::log(c.weight) - 0.5 * std::log(2.0 * std::numbers::pi * v) - r * r / (2.0 * v), 0.0);
  }
  return mix.log_total();
}

double analytic_score_gaussian(double y, const GmmPrior& prior, double sigma) {
  require_sigma(sigma);
  if (prior.components().empty()) throw DomainError("degenerate prior: no components");
  LogMixture mix;
  for (const auto& c : prior.components()) {
    const double v = c.std * c.std + sigma * sigma;
    const double r = y - c.mean;
    mix.add(std::log(c.weight) - 0.5 * std::log(v) - r * r / (2.0 * v), -r / v);
  }
  return mix.mean();
}

ScoreField analytic_score_gaussian(const Image& y, const GmmPrior& prior, double sigma) {
  ScoreField field{Image(y.height(), y.width()), "oracle-gaussian"};
  for (std::size_t i = 0; i < y.size(); ++i) field.values[i] = analytic_score_gaussian(y[i], prior, sigma);
  return field;
}

QuadratureMarginal::QuadratureMarginal(const GmmPrior& prior, const NoiseModel& model,
                                       QuadratureOptions options)
    : model_(model), options_(options) {
  model_.validate();
  if (model_.kind == NoiseKind::InverseGaussian) {
    throw DomainError("quadrature oracle supports Gaussian, Poisson and Gamma noise");
  }
  if (prior.components().empty()) throw DomainError("degenerate prior: no components");
  if (options_.order < 1 || options_.panels < 1 || !(options_.half_width > 0.0)) {
    throw DomainError("invalid quadrature options");
  }
  nodes_ = build_nodes(prior, options_.order, options_.panels, options_.half_width);
  if (options_.verify) {
    check_nodes_ = build_nodes(prior, 2 * options_.order, options_.panels, options_.half_width);
  }
}

std::vector<QuadratureMarginal::Node> QuadratureMarginal::build_nodes(const GmmPrior& prior, int order,
                                                                      int panels, double half_width) {
  std::vector<Node> nodes;
  const auto& rule = gauss_legendre(order);
  for (const auto& c : prior.components()) {
    const double log_w = std::log(c.weight);
    if (c.std == 0.0) {
      nodes.push_back({c.mean, std::log(c.mean), log_w});
      continue;
    }
    const double lo = std::max(kIntensityFloor, c.mean - half_width * c.std);
    const double hi = c.mean + half_width * c.std;
    if (!(hi > lo)) continue;
    const double panel = (hi - lo) / panels;
    std::vector<double> edges;
    for (int p = 0; p <= panels; ++p) edges.push_back(lo + p * panel);
    if (lo == kIntensityFloor) {
      // Gamma and Poisson likelihoods narrow in proportion to x near the
      // floor; halve the first panel repeatedly so every scale is resolved.
      std::vector<double> inner;
      for (double w = 0.5 * panel; w > kIntensityFloor; w *= 0.5) inner.push_back(lo + w);
      edges.insert(edges.begin() + 1, inner.rbegin(), inner.rend());
    }
    const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * c.std * c.std);
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
      const double mid = 0.5 * (edges[p] + edges[p + 1]);
      const double half = 0.5 * (edges[p + 1] - edges[p]);
      for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        const double x = mid + half * rule.nodes[q];
        const double z = (x - c.mean) / c.std;
        nodes.push_back({x, std::log(x), log_w + log_norm - 0.5 * z * z + std::log(rule.weights[q] * half)});
      }
    }
  }
  return nodes;
}

double QuadratureMarginal::score_with(const std::vector<Node>& nodes, double y) const {
  LogMixture mix;
  const double level = model_.level;
  switch (model_.kind) {
    case NoiseKind::Gaussian:
      for (const auto& n : nodes) {
        const double r = y - n.x;
        mix.add(n.log_weight - r * r / (2.0 * level), -r / level);
      }
      break;
    case NoiseKind::Poisson: {
      const double count = y / level;
      const double log_zeta = std::log(level);
      const double psi = boost::math::digamma(count + 1.0);
      for (const auto& n : nodes) {
        const double log_lambda = n.log_x - log_zeta;
        mix.add(n.log_weight + count * log_lambda - n.x / level, (log_lambda - psi) / level);
      }
      break;
    }
    case NoiseKind::Gamma: {
      const double k = level;
      const double log_k = std::log(k);
      for (const auto& n : nodes) {
        mix.add(n.log_weight + k * (log_k - n.log_x) - k * y / n.x, (k - 1.0) / y - k / n.x);
      }
      break;
    }
    case NoiseKind::InverseGaussian:
      break;
  }
  return mix.mean();
}

double QuadratureMarginal::log_marginal(double y) const {
  if (!(y > 0.0)) throw DomainError("quadrature marginal needs y > 0");
  LogMixture mix;
  const double level = model_.level;
  switch (model_.kind) {
    case NoiseKind::Gaussian: {
      const double c = -0.5 * std::log(2.0 * std::numbers::pi * level);
      for (const auto& n : nodes_) {
        const double r = y - n.x;
        mix.add(n.log_weight + c - r * r / (2.0 * level), 0.0);
      }
      break;
    }
    case NoiseKind::Poisson: {
      const double count = y / level;
      const double log_zeta = std::log(level);
      const double c = -std::lgamma(count + 1.0) - log_zeta;
      for (const auto& n : nodes_) {
        mix.add(n.log_weight + count * (n.log_x - log_zeta) - n.x / level + c, 0.0);
      }
      break;
    }
    case NoiseKind::Gamma: {
      const double k = level;
      const double c = (k - 1.0) * std::log(y) - std::lgamma(k) + k * std::log(k);
      for (const auto& n : nodes_) mix.add(n.log_weight + c - k * n.log_x - k * y / n.x, 0.0);
      break;
    }
    case NoiseKind::InverseGaussian:
      break;
  }
  return mix.log_total();
}

double QuadratureMarginal::score(double y) const {
  if (!(y > 0.0) || !std::isfinite(y)) throw DomainError("quadrature score needs finite y > 0");
  const double s = score_with(nodes_, y);
  if (options_.verify) {
    const double s2 = score_with(check_nodes_, y);
    if (!(std::abs(s - s2) <= options_.tolerance * std::max(1.0, std::abs(s)))) {
      throw QuadratureError("quadrature score did not converge at y = " + std::to_string(y) + ": " +
                            std::to_string(s) + " vs " + std::to_string(s2));
    }
  }
  return s;
}

ScoreField QuadratureMarginal::score(const Image& y) const {
  ScoreField field{Image(y.height(), y.width()), "oracle-quadrature"};
  for (std::size_t i = 0; i < y.size(); ++i) field.values[i] = score(std::max(y[i], kIntensityFloor));
  return field;
}

ScoreField numeric_marginal_score(const Image& y, const GmmPrior& prior, const NoiseModel& model,
                                  QuadratureOptions options) {
  return QuadratureMarginal(prior, model, options).score(y);
}

GaussianOracle::GaussianOracle(GmmPrior prior, double sigma) : prior_(std::move(prior)), sigma_(sigma) {
  require_sigma(sigma_);
  if (prior_.components().empty()) throw DomainError("degenerate prior: no components");
}

ScoreField GaussianOracle::evaluate(const Image& y) const { return analytic_score_gaussian(y, prior_, sigma_); }

QuadratureOracle::QuadratureOracle(const GmmPrior& prior, const NoiseModel& model, QuadratureOptions options)
    : marginal_(prior, model, options) {}

ScoreField QuadratureOracle::evaluate(const Image& y) const { return marginal_.score(y); }

std::unique_ptr<ScoreBackend> make_oracle(const GmmPrior& prior, const NoiseModel& model) {
  model.validate();
  if (model.kind == NoiseKind::Gaussian) return std::make_unique<GaussianOracle>(prior, std::sqrt(model.level));
  return std::make_unique<QuadratureOracle>(prior, model);
}

}  // namespace tweedie
