#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tweedie/ardae.hpp"
#include "tweedie/core.hpp"
#include "tweedie/errors.hpp"
#include "tweedie/estimation.hpp"
#include "tweedie/noise_sim.hpp"
#include "tweedie/pipeline.hpp"
#include "tweedie/report.hpp"
#include "tweedie/score.hpp"

namespace py = pybind11;
using namespace tweedie;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image to_image(const Array& a) {
  if (a.ndim() != 2) throw ValidationError("expected a 2-D array");
  const auto h = static_cast<std::size_t>(a.shape(0));
  const auto w = static_cast<std::size_t>(a.shape(1));
  return Image(h, w, std::vector<double>(a.data(), a.data() + h * w));
}

Array to_array(const Image& im) {
  Array out({im.height(), im.width()});
  std::copy(im.begin(), im.end(), out.mutable_data());
  return out;
}

GmmPrior to_prior(const std::vector<std::tuple<double, double, double>>& comps) {
  std::vector<GmmComponent> c;
  for (const auto& [w, m, s] : comps) c.push_back({w, m, s});
  return GmmPrior(std::move(c));
}

NoiseModel to_model(const std::string& kind, double level) { return {parse_noise_kind(kind), level}; }

py::dict to_dict(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Tweedie posterior-mean denoising, blind noise estimation and score oracles";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<EstimationError>(m, "EstimationError", PyExc_RuntimeError);
  py::register_exception<SingularEstimateError>(m, "SingularEstimateError", PyExc_ArithmeticError);
  py::register_exception<QuadratureError>(m, "QuadratureError", PyExc_RuntimeError);

  m.attr("INTENSITY_FLOOR") = kIntensityFloor;

  m.def("unit_deviance", &unit_deviance, py::arg("y"), py::arg("mu"), py::arg("rho"));
  m.def(
      "saddle_density",
      [](double y, double rho, double phi, double mu) { return saddle_density(y, {rho, phi}, mu); },
      py::arg("y"), py::arg("rho"), py::arg("phi"), py::arg("mu"));
  m.def(
      "variance_function", [](double mu, double rho, double phi) { return variance_function(mu, {rho, phi}); },
      py::arg("mu"), py::arg("rho"), py::arg("phi"));
  m.def(
      "alpha_term",
      [](double y, double rho, double phi, double score) { return alpha_term(y, {rho, phi}, score); },
      py::arg("y"), py::arg("rho"), py::arg("phi"), py::arg("score"));
  m.def(
      "posterior_mean_universal",
      [](double y, double rho, double phi, double score) { return posterior_mean_universal(y, {rho, phi}, score); },
      py::arg("y"), py::arg("rho"), py::arg("phi"), py::arg("score"));
  m.def(
      "posterior_mean_special",
      [](double y, const std::string& kind, double level, double score) {
        return posterior_mean_special(y, to_model(kind, level), score);
      },
      py::arg("y"), py::arg("kind"), py::arg("level"), py::arg("score"),
      "kind: gaussian (level sigma^2), poisson (zeta) or gamma (k)");

  m.def(
      "gen_clean",
      [](const std::string& kind, std::size_t height, std::size_t width, int regions,
         const std::vector<std::tuple<double, double, double>>& prior, std::uint64_t seed) {
        SynthSpec s;
        s.kind = kind == "gmm_iid" ? SynthKind::GmmIid : SynthKind::PiecewiseConstant;
        if (kind != "gmm_iid" && kind != "piecewise_constant") throw ValidationError("unknown synth kind " + kind);
        s.height = height;
        s.width = width;
        s.regions = regions;
        s.prior = prior.empty() ? default_piecewise_prior() : to_prior(prior);
        s.seed = seed;
        return to_array(gen_clean(s));
      },
      py::arg("kind") = "piecewise_constant", py::arg("height") = 64, py::arg("width") = 64,
      py::arg("regions") = 4, py::arg("prior") = std::vector<std::tuple<double, double, double>>{},
      py::arg("seed") = 0);
  m.def(
      "sample_noisy",
      [](const Array& x, const std::string& kind, double level, std::uint64_t seed) {
        return to_array(sample_noisy(to_image(x), to_model(kind, level), seed));
      },
      py::arg("x"), py::arg("kind"), py::arg("level"), py::arg("seed"));
  m.def(
      "psnr", [](const Array& a, const Array& b, double peak) { return psnr(to_image(a), to_image(b), peak); },
      py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);
  m.def(
      "atoms_of",
      [](const Array& clean) {
        const GmmPrior prior = GmmPrior::atoms_of(to_image(clean));
        std::vector<std::tuple<double, double, double>> out;
        for (const auto& c : prior.components()) out.emplace_back(c.weight, c.mean, c.std);
        return out;
      },
      py::arg("clean"));

  m.def(
      "analytic_score_gaussian",
      [](const Array& y, const std::vector<std::tuple<double, double, double>>& prior, double sigma) {
        return to_array(analytic_score_gaussian(to_image(y), to_prior(prior), sigma).values);
      },
      py::arg("y"), py::arg("prior"), py::arg("sigma"));
  m.def(
      "numeric_marginal_score",
      [](const Array& y, const std::vector<std::tuple<double, double, double>>& prior, const std::string& kind,
         double level) {
        return to_array(numeric_marginal_score(to_image(y), to_prior(prior), to_model(kind, level)).values);
      },
      py::arg("y"), py::arg("prior"), py::arg("kind"), py::arg("level"));
  m.def("geometric_schedule", &geometric_schedule, py::arg("sigma_max"), py::arg("sigma_min"), py::arg("length"));

  m.def(
      "perturb",
      [](const Array& y1, double eps, std::uint64_t seed) {
        const PerturbationPair p = perturb(to_image(y1), eps, seed);
        return py::make_tuple(to_array(p.y2), to_array(p.u));
      },
      py::arg("y1"), py::arg("eps"), py::arg("seed"), "Returns (y2, u).");
  m.def(
      "classify_model", [](double rho) { return std::string(to_string(classify_model(rho))); }, py::arg("rho_hat"));

  m.def(
      "estimate_noise",
      [](const Array& y, const std::vector<std::tuple<double, double, double>>& prior, const std::string& kind,
         double level, std::uint64_t seed, double eps, double mask_eps, double rho_assumed) {
        const auto oracle = make_oracle(to_prior(prior), to_model(kind, level));
        EstimationConfig cfg;
        cfg.seed = seed;
        cfg.eps = eps;
        cfg.mask_eps = mask_eps;
        cfg.rho_assumed = rho_assumed;
        return to_dict(to_json(estimate_noise(to_image(y), *oracle, cfg).report));
      },
      py::arg("y"), py::arg("prior"), py::arg("kind"), py::arg("level"), py::arg("seed") = 0,
      py::arg("eps") = 1e-5, py::arg("mask_eps") = 1e-5, py::arg("rho_assumed") = 2.2,
      "Blind estimation with the exact oracle score of the given prior and true noise.");
  m.def(
      "denoise_known",
      [](const Array& y, const std::vector<std::tuple<double, double, double>>& prior, const std::string& kind,
         double level) {
        const NoiseModel model = to_model(kind, level);
        const auto oracle = make_oracle(to_prior(prior), model);
        return to_array(denoise_known(to_image(y), model, *oracle).x_hat);
      },
      py::arg("y"), py::arg("prior"), py::arg("kind"), py::arg("level"));
  m.def(
      "denoise_blind",
      [](const Array& y, const std::vector<std::tuple<double, double, double>>& prior, const std::string& kind,
         double level, std::uint64_t seed) {
        const auto oracle = make_oracle(to_prior(prior), to_model(kind, level));
        EstimationConfig cfg;
        cfg.seed = seed;
        DenoiseResult r = denoise_blind(to_image(y), *oracle, cfg);
        return py::make_tuple(to_array(r.x_hat), to_dict(to_json(r.report)));
      },
      py::arg("y"), py::arg("prior"), py::arg("kind"), py::arg("level"), py::arg("seed") = 0,
      "Returns (x_hat, report). The oracle knows the truth; the estimator does not.");
  m.def(
      "brute_posterior_mean",
      [](double y, const std::vector<std::tuple<double, double, double>>& prior, const std::string& kind,
         double level) { return brute_posterior_mean(y, to_prior(prior), to_model(kind, level)); },
      py::arg("y"), py::arg("prior"), py::arg("kind"), py::arg("level"));
}
