#include "tweedie/app/config.hpp"

#include <fstream>
#include <set>

#include "tweedie/errors.hpp"

namespace tweedie::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw ValidationError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

SynthKind parse_synth_kind(const std::string& s) {
  if (s == "piecewise_constant") return SynthKind::PiecewiseConstant;
  if (s == "gmm_iid") return SynthKind::GmmIid;
  throw ValidationError("synth.kind must be piecewise_constant or gmm_iid, got '" + s + "'");
}

NoiseGroup parse_noise_group(const json& j) {
  reject_unknown(j, {"model", "lo", "hi", "level", "count"}, "noise entry");
  NoiseGroup g;
  g.range.kind = parse_noise_kind(j.at("model").get<std::string>());
  if (g.range.kind == NoiseKind::InverseGaussian) throw ValidationError("inverse Gaussian noise is not simulated");
  if (j.contains("level")) {
    if (j.contains("lo") || j.contains("hi")) throw ValidationError("noise entry: give level or lo/hi, not both");
    g.range.lo = g.range.hi = j.at("level").get<double>();
  } else if (j.contains("lo") || j.contains("hi")) {
    g.range.lo = j.at("lo").get<double>();
    g.range.hi = j.at("hi").get<double>();
  } else {
    g.range = NoiseRange::defaults(g.range.kind);
  }
  if (g.range.kind == NoiseKind::Gaussian && (j.contains("level") || j.contains("lo"))) {
    g.range.lo /= 255.0;
    g.range.hi /= 255.0;
  }
  g.range.validate();
  g.count = get_or<int>(j, "count", 1);
  if (g.count < 0) throw ValidationError("noise entry count must be >= 0");
  return g;
}

}  // namespace

std::string BackendSpec::text() const {
  switch (kind) {
    case BackendKind::Oracle: return "oracle";
    case BackendKind::OracleGaussian: return "oracle-gaussian";
    case BackendKind::OracleQuadrature: return "oracle-quadrature";
    case BackendKind::Ardae: return "ardae:" + checkpoint.string();
  }
  return "oracle";
}

BackendSpec parse_backend(const std::string& text) {
  if (text == "oracle") return {BackendKind::Oracle, {}};
  if (text == "oracle-gaussian") return {BackendKind::OracleGaussian, {}};
  if (text == "oracle-quadrature") return {BackendKind::OracleQuadrature, {}};
  if (text.rfind("ardae:", 0) == 0 && text.size() > 6) return {BackendKind::Ardae, text.substr(6)};
  throw ValidationError("backend must be oracle, oracle-gaussian, oracle-quadrature or ardae:PATH, got '" + text +
                        "'");
}

fs::path ExperimentConfig::manifest_path() const { return manifest ? *manifest : output_dir / "manifest.json"; }

ArdaeConfig ExperimentConfig::ardae_for(NoiseKind kind) const {
  ArdaeConfig base = ArdaeConfig::defaults_for(kind);
  base.seed = seed;
  return ardae_overrides ? ardae_config_from_json(*ardae_overrides, base) : base;
}

json to_json(const GmmPrior& prior) {
  json arr = json::array();
  for (const auto& c : prior.components()) arr.push_back({{"weight", c.weight}, {"mean", c.mean}, {"std", c.std}});
  return arr;
}

GmmPrior prior_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw ValidationError("prior must be a non-empty array");
  std::vector<GmmComponent> comps;
  for (const auto& c : j) {
    reject_unknown(c, {"weight", "mean", "std"}, "prior component");
    comps.push_back({c.at("weight").get<double>(), c.at("mean").get<double>(), get_or<double>(c, "std", 0.0)});
  }
  try {
    return GmmPrior(std::move(comps));
  } catch (const DomainError& e) {
    throw ValidationError(std::string("prior: ") + e.what());
  }
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig cfg;
  try {
    reject_unknown(j, {"schema_version", "seed", "output_dir", "manifest", "synth", "noise", "backend", "ardae",
                       "estimation", "pgm"},
                   "config");
    if (!j.contains("schema_version")) throw ValidationError("config is missing schema_version");
    const int version = j.at("schema_version").get<int>();
    if (version != kSchemaVersion) {
      throw ValidationError("unsupported schema_version " + std::to_string(version) + " (expected " +
                            std::to_string(kSchemaVersion) + ")");
    }
    if (!j.contains("seed")) throw ValidationError("config must give an explicit seed");
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.output_dir = get_or<std::string>(j, "output_dir", "run");
    if (j.contains("manifest")) cfg.manifest = fs::path(j.at("manifest").get<std::string>());
    cfg.write_pgm = get_or<bool>(j, "pgm", false);

    cfg.synth.prior = default_piecewise_prior();
    if (j.contains("synth")) {
      const json& s = j.at("synth");
      reject_unknown(s, {"kind", "height", "width", "regions", "prior"}, "synth");
      if (s.contains("kind")) cfg.synth.kind = parse_synth_kind(s.at("kind").get<std::string>());
      cfg.synth.height = get_or<std::size_t>(s, "height", cfg.synth.height);
      cfg.synth.width = get_or<std::size_t>(s, "width", cfg.synth.width);
      cfg.synth.regions = get_or<int>(s, "regions", cfg.synth.regions);
      if (s.contains("prior")) cfg.synth.prior = prior_from_json(s.at("prior"));
    }
    cfg.synth.validate();

    if (j.contains("noise")) {
      const json& n = j.at("noise");
      if (n.is_object()) {
        cfg.noise.push_back(parse_noise_group(n));
      } else if (n.is_array()) {
        for (const auto& e : n) cfg.noise.push_back(parse_noise_group(e));
      } else {
        throw ValidationError("noise must be an object or an array");
      }
    }

    if (j.contains("backend")) cfg.backend = parse_backend(j.at("backend").get<std::string>());

    if (j.contains("ardae")) {
      cfg.ardae_overrides = j.at("ardae");
      // Validate eagerly so typos surface before any work starts.
      (void)ardae_config_from_json(*cfg.ardae_overrides);
    }

    if (j.contains("estimation")) {
      const json& e = j.at("estimation");
      reject_unknown(e, {"eps", "mask_eps", "rho_assumed", "quorum", "pooled"}, "estimation");
      cfg.estimation.eps = get_or<double>(e, "eps", cfg.estimation.eps);
      cfg.estimation.mask_eps = get_or<double>(e, "mask_eps", cfg.estimation.mask_eps);
      cfg.estimation.rho_assumed = get_or<double>(e, "rho_assumed", cfg.estimation.rho_assumed);
      cfg.estimation.quorum = get_or<std::size_t>(e, "quorum", cfg.estimation.quorum);
      cfg.pooled = get_or<bool>(e, "pooled", false);
    }
    cfg.estimation.seed = cfg.seed;
    cfg.estimation.validate();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  } catch (const DomainError& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

json to_json(const Manifest& m) {
  json images = json::array();
  for (const auto& e : m.images) {
    images.push_back({{"id", e.id},
                      {"clean", e.clean},
                      {"noisy", e.noisy},
                      {"model", std::string(to_string(e.noise.kind))},
                      {"level", e.noise.natural_level()},
                      {"dispersion_level", e.noise.level},
                      {"clean_seed", e.clean_seed},
                      {"noise_seed", e.noise_seed},
                      {"prior", to_json(e.prior)}});
  }
  return json{{"schema_version", kSchemaVersion}, {"images", images}};
}

Manifest manifest_from_json(const json& j, const fs::path& directory) {
  Manifest m;
  m.directory = directory;
  try {
    reject_unknown(j, {"schema_version", "images"}, "manifest");
    if (j.at("schema_version").get<int>() != kSchemaVersion) throw ValidationError("unsupported manifest version");
    for (const auto& e : j.at("images")) {
      reject_unknown(e, {"id", "clean", "noisy", "model", "level", "dispersion_level", "clean_seed", "noise_seed",
                         "prior"},
                     "manifest entry");
      ManifestEntry entry;
      entry.id = e.at("id").get<std::string>();
      entry.clean = e.at("clean").get<std::string>();
      entry.noisy = e.at("noisy").get<std::string>();
      entry.noise = {parse_noise_kind(e.at("model").get<std::string>()), e.at("dispersion_level").get<double>()};
      entry.noise.validate();
      entry.clean_seed = e.at("clean_seed").get<std::uint64_t>();
      entry.noise_seed = e.at("noise_seed").get<std::uint64_t>();
      entry.prior = prior_from_json(e.at("prior"));
      m.images.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest: ") + e.what());
  } catch (const DomainError& e) {
    throw ValidationError(std::string("manifest: ") + e.what());
  }
  return m;
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("manifest " + path.string() + " does not exist");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  return manifest_from_json(j, path.parent_path());
}

}  // namespace tweedie::app
