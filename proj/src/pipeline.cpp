#include "tweedie/pipeline.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

#include "tweedie/errors.hpp"

namespace tweedie {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Image checked_score(const ScoreBackend& backend, const Image& y) {
  ScoreField f = backend.evaluate(y);
  if (!f.values.same_shape(y)) throw ValidationError("score backend returned the wrong shape");
  require_finite(f.values, "score field from " + backend.name());
  return std::move(f.values);
}

// Unnormalized log-likelihood log p(y|x) up to terms constant in x.
struct LogLikelihood {
  NoiseModel model;
  double y;
  double n = 0.0;  // Poisson count

  double operator()(double x) const {
    switch (model.kind) {
      case NoiseKind::Gaussian: {
        const double r = y - x;
        return -r * r / (2.0 * model.level);
      }
      case NoiseKind::Poisson:
        return n * std::log(x) - x / model.level;
      case NoiseKind::Gamma:
        return -model.level * (std::log(x) + y / x);
      case NoiseKind::InverseGaussian:
        break;
    }
    return 0.0;
  }
};

}  // namespace

void EstimationConfig::validate() const {
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw ValidationError("estimation eps must be positive: y1 and y2 have to differ");
  }
  if (!(mask_eps > 0.0) || !std::isfinite(mask_eps)) throw ValidationError("mask_eps must be positive");
  if (!std::isfinite(rho_assumed)) throw ValidationError("rho_assumed must be finite");
  if (quorum < 1) throw ValidationError("level quorum must be at least 1");
}

BlindEstimate estimate_noise(const Image& y, const ScoreBackend& backend, const EstimationConfig& cfg) {
  cfg.validate();
  require_finite(y, "noisy image");
  const PerturbationPair pair = perturb(clamp_below(y), cfg.eps, cfg.seed);
  BlindEstimate out;
  out.score_y1 = checked_score(backend, pair.y1);
  const Image s2 = checked_score(backend, pair.y2);

  EstimationReport& r = out.report;
  r.pixel_count = y.size();
  r.seed = cfg.seed;
  r.backend = backend.name();
  r.model = estimate_rho(pair, out.score_y1, s2, cfg.rho_options());
  if (r.model.classified) r.level = estimate_level(*r.model.classified, pair, out.score_y1, s2, cfg.quorum);
  return out;
}

EstimationReport estimate_noise_pooled(std::span<const Image> images, const ScoreBackend& backend,
                                       const EstimationConfig& cfg) {
  cfg.validate();
  if (images.empty()) throw ValidationError("no images to pool");
  std::vector<PerturbationPair> pairs;
  std::vector<Image> s1, s2;
  for (std::size_t i = 0; i < images.size(); ++i) {
    require_finite(images[i], "noisy image");
    pairs.push_back(perturb(clamp_below(images[i]), cfg.eps, cfg.seed + i));
    s1.push_back(checked_score(backend, pairs.back().y1));
    s2.push_back(checked_score(backend, pairs.back().y2));
  }
  const PerturbationPair pooled = concat_pairs(pairs);
  const Image ps1 = concat_rows(s1);
  const Image ps2 = concat_rows(s2);

  EstimationReport r;
  r.pixel_count = pooled.y1.size();
  r.seed = cfg.seed;
  r.backend = backend.name();
  r.model = estimate_rho(pooled, ps1, ps2, cfg.rho_options());
  if (r.model.classified) r.level = estimate_level(*r.model.classified, pooled, ps1, ps2, cfg.quorum);
  return r;
}

DenoiseResult apply_posterior_mean(const Image& y, const NoiseModel& model, const Image& score) {
  require_same_shape(y, score, "score");
  DenoiseOutput out = denoise_special(clamp_below(y), model, score, SingularPolicy::Fallback);
  DenoiseResult result;
  result.report.applied = model;
  result.report.singular_pixels = out.singular_pixels;
  for (double& v : out.estimate) {
    const double c = std::clamp(v, kIntensityFloor, 1.0);
    if (c != v || std::isnan(v)) ++result.report.clamped_pixels;
    v = std::isnan(v) ? kIntensityFloor : c;
  }
  result.x_hat = std::move(out.estimate);
  return result;
}

DenoiseResult denoise_blind(const Image& y, const ScoreBackend& backend, const EstimationConfig& cfg) {
  const auto t0 = Clock::now();
  BlindEstimate est = estimate_noise(y, backend, cfg);
  const double t_est = seconds_since(t0);
  const EstimationReport& r = est.report;
  if (!r.model.classified) {
    throw BlindAbort("rho_hat = " + std::to_string(r.model.rho_hat) +
                         " falls outside every supported class; refusing to guess a model",
                     r);
  }
  const NoiseModel model = r.level->model();
  if (model.kind == NoiseKind::Gamma && !(model.level > 1.0)) {
    throw BlindAbort("estimated Gamma shape k = " + std::to_string(model.level) + " is not above 1", r);
  }
  DenoiseResult result = apply_posterior_mean(y, model, est.score_y1);
  result.report.estimation = r;
  result.report.score_evaluations = 2;
  result.report.seconds_estimate = t_est;
  result.report.seconds_total = seconds_since(t0);
  return result;
}

DenoiseResult denoise_known(const Image& y, const NoiseModel& model, const ScoreBackend& backend) {
  const auto t0 = Clock::now();
  require_finite(y, "noisy image");
  const Image score = checked_score(backend, clamp_below(y));
  DenoiseResult result = apply_posterior_mean(y, model, score);
  result.report.score_evaluations = 1;
  result.report.seconds_total = seconds_since(t0);
  return result;
}

double brute_posterior_mean(double y, const GmmPrior& prior, const NoiseModel& model,
                            const BruteForceOptions& options) {
  model.validate();
  if (model.kind == NoiseKind::InverseGaussian) throw DomainError("brute force supports Gaussian, Poisson, Gamma");
  if (!std::isfinite(y) || (model.kind == NoiseKind::Gamma && !(y > 0.0)) ||
      (model.kind == NoiseKind::Poisson && y < 0.0)) {
    throw DomainError("observation out of domain for brute-force posterior");
  }
  if (prior.components().empty()) throw DomainError("degenerate prior: no components");

  LogLikelihood ll{model, y};
  if (model.kind == NoiseKind::Poisson) {
    ll.n = y / model.level;
    if (std::abs(ll.n - std::round(ll.n)) > 1e-6 * std::max(1.0, ll.n)) {
      throw DomainError("Poisson observation " + std::to_string(y) + " is not on the lattice zeta * n");
    }
    ll.n = std::round(ll.n);
  }

  struct Piece {
    double lo, hi, log_scale, mean, std;  // log_scale: log(w) - log(s sqrt(2 pi))
  };
  std::vector<Piece> pieces;
  double shift = -std::numeric_limits<double>::infinity();
  double atom_num = 0.0, atom_den = 0.0;
  std::vector<std::pair<double, double>> atoms;  // (x, log weight * lik)

  for (const auto& c : prior.components()) {
    if (c.std == 0.0) {
      const double lw = std::log(c.weight) + ll(c.mean);
      atoms.emplace_back(c.mean, lw);
      shift = std::max(shift, lw);
      continue;
    }
    // Gaussian likelihoods take the prior untruncated; the others need x > 0.
    const double lo = model.kind == NoiseKind::Gaussian
                          ? c.mean - options.half_width * c.std
                          : std::max(kIntensityFloor, c.mean - options.half_width * c.std);
    const double hi = c.mean + options.half_width * c.std;
    if (!(hi > lo)) continue;
    const double log_scale = std::log(c.weight) - std::log(c.std * std::sqrt(2.0 * std::numbers::pi));
    // Locate the peak of the integrand on a fine grid; it sets the log shift
    // and a breakpoint for the adaptive rule.
    constexpr int kGrid = 4000;
    double best_x = lo, best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kGrid; ++i) {
      const double x = lo + (hi - lo) * i / kGrid;
      const double z = (x - c.mean) / c.std;
      const double v = log_scale - 0.5 * z * z + ll(x);
      if (v > best) {
        best = v;
        best_x = x;
      }
    }
    shift = std::max(shift, best);
    std::vector<double> cuts{lo, hi, c.mean, best_x};
    const double spread = (hi - lo) / 16.0;
    for (int i = 1; i < 16; ++i) cuts.push_back(lo + spread * i);
    for (double d : {-4.0, -2.0, -1.0, 1.0, 2.0, 4.0}) cuts.push_back(best_x + d * (hi - lo) / kGrid * 8.0);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::remove_if(cuts.begin(), cuts.end(), [&](double x) { return x < lo || x > hi; }), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) pieces.push_back({cuts[i], cuts[i + 1], log_scale, c.mean, c.std});
  }

  for (const auto& [x, lw] : atoms) {
    const double e = std::exp(lw - shift);
    atom_den += e;
    atom_num += x * e;
  }

  // Integrate on the pieces, then again with every piece bisected; the two
  // must agree to the requested tolerance.
  using Rule = boost::math::quadrature::gauss_kronrod<double, 61>;
  constexpr unsigned kDepth = 2;
  constexpr double kTol = 1e-12;
  auto integrate = [&](int splits, double& num, double& den) {
    num = atom_num;
    den = atom_den;
    for (const auto& p : pieces) {
      auto f = [&](double x) {
        const double z = (x - p.mean) / p.std;
        return std::exp(p.log_scale - 0.5 * z * z + ll(x) - shift);
      };
      const double step = (p.hi - p.lo) / splits;
      for (int k = 0; k < splits; ++k) {
        const double a = p.lo + step * k;
        const double b = k + 1 == splits ? p.hi : a + step;
        den += Rule::integrate(f, a, b, kDepth, kTol);
        num += Rule::integrate([&](double x) { return x * f(x); }, a, b, kDepth, kTol);
      }
    }
  };
  double num = 0.0, den = 0.0, num2 = 0.0, den2 = 0.0;
  integrate(1, num, den);
  integrate(2, num2, den2);
  if (!(den > 0.0) || !std::isfinite(num)) throw QuadratureError("posterior normalizer vanished");
  const double mean = num / den;
  if (std::abs(mean - num2 / den2) > options.tolerance * std::max(std::abs(mean), 1e-300)) {
    throw QuadratureError("brute-force posterior mean did not converge at y = " + std::to_string(y));
  }
  return mean;
}

}  // namespace tweedie
