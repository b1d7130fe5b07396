#include "tweedie/report.hpp"

#include <cmath>

namespace tweedie {

using nlohmann::json;

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

const char* level_name(NoiseKind kind) noexcept {
  switch (kind) {
    case NoiseKind::Gaussian: return "sigma";
    case NoiseKind::Poisson: return "zeta";
    case NoiseKind::Gamma: return "k";
    case NoiseKind::InverseGaussian: return "phi";
  }
  return "level";
}

json to_json(const ModelEstimate& m) {
  return json{{"rho_hat", m.rho_hat},
              {"model", std::string(to_string(m.classified))},
              {"mask_fraction", m.mask_fraction},
              {"mask_count", m.mask_count},
              {"roots", {finite_or_null(m.p1), finite_or_null(m.p2)}},
              {"w_bar", finite_or_null(m.w_bar)},
              {"b_bar", finite_or_null(m.b_bar)},
              {"nonfinite_roots", m.nonfinite_roots}};
}

json to_json(const LevelEstimate& l) {
  return json{{"model", std::string(to_string(l.kind))},
              {"name", level_name(l.kind)},
              {"value", l.model().natural_level()},
              {"dispersion_value", l.value},
              {"pixel_count", l.pixel_count},
              {"iqr", l.iqr}};
}

json to_json(const EstimationReport& r) {
  json j{{"rho_hat", r.model.rho_hat},
         {"model", std::string(to_string(r.model.classified))},
         {"level", r.level ? json(r.level->model().natural_level()) : json(nullptr)},
         {"mask_fraction", r.model.mask_fraction},
         {"pixel_count", r.pixel_count},
         {"seed", r.seed},
         {"backend", r.backend}};
  j["diagnostics"] = json{{"rho", to_json(r.model)}, {"level", r.level ? to_json(*r.level) : json(nullptr)}};
  return j;
}

json to_json(const DenoiseReport& r) {
  json j{{"estimation", r.estimation ? to_json(*r.estimation) : json(nullptr)},
         {"singular_pixels", r.singular_pixels},
         {"clamped_pixels", r.clamped_pixels},
         {"score_evaluations", r.score_evaluations}};
  if (r.applied) {
    j["applied"] = json{{"model", std::string(to_string(r.applied->kind))},
                        {"name", level_name(r.applied->kind)},
                        {"value", r.applied->natural_level()}};
  } else {
    j["applied"] = nullptr;
  }
  j["psnr_input"] = r.psnr_input ? finite_or_null(*r.psnr_input) : json(nullptr);
  j["psnr_output"] = r.psnr_output ? finite_or_null(*r.psnr_output) : json(nullptr);
  return j;
}

}  // namespace tweedie
