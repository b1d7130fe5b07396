#include "tweedie/noise_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "tweedie/errors.hpp"
#include "tweedie/rng.hpp"

namespace tweedie {

GmmPrior::GmmPrior(std::vector<GmmComponent> components) : components_(std::move(components)) {
  if (components_.empty()) throw ValidationError("GMM prior needs at least one component");
  double total = 0.0;
  for (const auto& c : components_) {
    if (!(c.weight > 0.0) || !std::isfinite(c.weight)) {
      throw ValidationError("GMM weights must be positive");
    }
    if (!(c.mean > kIntensityFloor && c.mean <= 1.0)) {
      throw ValidationError("GMM means must lie in (1e-4, 1], got " + std::to_string(c.mean));
    }
    if (!(c.std >= 0.0) || !std::isfinite(c.std)) {
      throw ValidationError("GMM standard deviations must be finite and >= 0");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ValidationError("GMM weights sum to " + std::to_string(total) + ", expected 1");
  }
}

double GmmPrior::mean() const noexcept {
  double m = 0.0;
  for (const auto& c : components_) m += c.weight * c.mean;
  return m;
}

double GmmPrior::variance() const noexcept {
  const double m = mean();
  double v = 0.0;
  for (const auto& c : components_) {
    v += c.weight * (c.std * c.std + (c.mean - m) * (c.mean - m));
  }
  return v;
}

bool GmmPrior::all_atoms() const noexcept {
  return std::all_of(components_.begin(), components_.end(),
                     [](const GmmComponent& c) { return c.std == 0.0; });
}

GmmPrior GmmPrior::atoms_of(const Image& clean) {
  if (clean.empty()) throw ValidationError("cannot build an atom prior from an empty image");
  std::map<double, std::size_t> counts;
  for (double v : clean) ++counts[v];
  std::vector<GmmComponent> atoms;
  atoms.reserve(counts.size());
  const double n = static_cast<double>(clean.size());
  for (const auto& [level, count] : counts) {
    atoms.push_back({static_cast<double>(count) / n, level, 0.0});
  }
  // Renormalize so the weights sum to one to the last ulp.
  double total = 0.0;
  for (const auto& a : atoms) total += a.weight;
  for (auto& a : atoms) a.weight /= total;
  return GmmPrior(std::move(atoms));
}

void SynthSpec::validate() const {
  if (height < 8 || width < 8) throw ValidationError("synthetic images must be at least 8x8");
  if (regions < 1) throw ValidationError("region count must be >= 1");
  if (prior.components().empty()) throw ValidationError("synthetic spec needs a prior");
}

GmmPrior default_piecewise_prior() {
  const double third = 1.0 / 3.0;
  return GmmPrior({{third, 0.25, 0.0}, {third, 0.5, 0.0}, {1.0 - 2.0 * third, 0.75, 0.0}});
}

NoiseRange NoiseRange::defaults(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::Gaussian: return {kind, 5.0 / 255.0, 55.0 / 255.0};
    case NoiseKind::Poisson: return {kind, 0.005, 0.1};
    case NoiseKind::Gamma: return {kind, 40.0, 120.0};
    case NoiseKind::InverseGaussian: break;
  }
  throw ValidationError("no default noise range for " + std::string(to_string(kind)));
}

void NoiseRange::validate() const {
  if (!(lo > 0.0) || !(lo <= hi) || !std::isfinite(hi)) {
    throw ValidationError("noise range needs 0 < lo <= hi");
  }
  if (kind == NoiseKind::Gamma && lo <= 1.0) throw ValidationError("Gamma noise range needs k > 1");
}

NoiseModel NoiseRange::draw(std::uint64_t seed, std::uint64_t index) const {
  validate();
  RandomStream rng(seed, StreamPurpose::Synthesis, index);
  const double v = lo == hi ? lo : lo + (hi - lo) * rng.uniform();
  return NoiseModel::from_natural_level(kind, v);
}

namespace {

std::size_t pick_component(const GmmPrior& prior, double u) {
  const auto& cs = prior.components();
  double acc = 0.0;
  for (std::size_t j = 0; j + 1 < cs.size(); ++j) {
    acc += cs[j].weight;
    if (u < acc) return j;
  }
  return cs.size() - 1;
}

Image piecewise_constant(const SynthSpec& spec) {
  RandomStream rng(spec.seed, StreamPurpose::CleanImage, 0);
  const auto& cs = spec.prior.components();
  Image img(spec.height, spec.width, cs[pick_component(spec.prior, rng.uniform())].mean);
  for (int r = 1; r < spec.regions; ++r) {
    std::size_t r0 = rng.below(spec.height);
    std::size_t r1 = rng.below(spec.height);
    std::size_t c0 = rng.below(spec.width);
    std::size_t c1 = rng.below(spec.width);
    if (r0 > r1) std::swap(r0, r1);
    if (c0 > c1) std::swap(c0, c1);
    const double level = cs[pick_component(spec.prior, rng.uniform())].mean;
    for (std::size_t i = r0; i <= r1; ++i) {
      for (std::size_t j = c0; j <= c1; ++j) img(i, j) = level;
    }
  }
  return img;
}

Image gmm_iid(const SynthSpec& spec) {
  Image img(spec.height, spec.width);
  const auto& cs = spec.prior.components();
  for (std::size_t i = 0; i < img.size(); ++i) {
    RandomStream rng(spec.seed, StreamPurpose::CleanImage, i);
    const auto& c = cs[pick_component(spec.prior, rng.uniform())];
    const double x = c.mean + c.std * standard_normal(rng);
    img[i] = std::clamp(x, kIntensityFloor, 1.0);
  }
  return img;
}

}  // namespace

Image gen_clean(const SynthSpec& spec) {
  spec.validate();
  return spec.kind == SynthKind::PiecewiseConstant ? piecewise_constant(spec) : gmm_iid(spec);
}

Image sample_noisy(const Image& clean, const NoiseModel& model, std::uint64_t seed) {
  model.validate();
  require_finite(clean, "sample_noisy");
  Image y(clean.height(), clean.width());
  const double level = model.level;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    RandomStream rng(seed, StreamPurpose::Noise, i);
    const double x = clean[i];
    double v = 0.0;
    switch (model.kind) {
      case NoiseKind::Gaussian:
        v = x + std::sqrt(level) * standard_normal(rng);
        break;
      case NoiseKind::Poisson:
        v = level * static_cast<double>(poisson(rng, std::max(x, 0.0) / level));
        break;
      case NoiseKind::Gamma:
        v = x * gamma_unit_scale(rng, level) / level;
        break;
      case NoiseKind::InverseGaussian:
        throw DomainError("inverse Gaussian sampling is not supported");
    }
    y[i] = std::max(v, kIntensityFloor);
  }
  return y;
}

double psnr(const Image& a, const Image& b, double peak) {
  require_same_shape(a, b, "psnr");
  if (a.empty()) throw ValidationError("psnr of empty images");
  double sse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(peak * peak / mse);
}

}  // namespace tweedie
