#include <doctest.h>

#include <filesystem>
#include <cmath>
#include <fstream>
#include <limits>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "tweedie/app/commands.hpp"
#include "tweedie/app/config.hpp"
#include "tweedie/errors.hpp"
#include "tweedie/tensor_io.hpp"

using namespace tweedie;
using namespace tweedie::app;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tweedie_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

// Writes the config next to its output directory and returns a command line for it.
CommandLine write_config(const fs::path& dir, json j) {
  j["output_dir"] = (dir / "run").string();
  const fs::path path = dir / "config.json";
  std::ofstream(path) << j.dump(2);
  return {path, std::nullopt, std::nullopt};
}

json base_config() {
  return json{{"schema_version", 1},
              {"seed", 17},
              {"synth", {{"height", 24}, {"width", 24}}},
              {"noise", json::array({{{"model", "gaussian"}, {"level", 25}, {"count", 3}}})}};
}

}  // namespace

TEST_CASE("config parsing") {
  const ExperimentConfig cfg = parse_config(base_config());
  CHECK(cfg.seed == 17);
  REQUIRE(cfg.noise.size() == 1);
  CHECK(cfg.noise[0].range.lo == doctest::Approx(25.0 / 255));
  CHECK(cfg.noise[0].count == 3);
  CHECK(cfg.estimation.eps == 1e-5);
  CHECK(cfg.estimation.rho_assumed == 2.2);
  CHECK(cfg.backend.kind == BackendKind::Oracle);

  json j = base_config();
  j["noise"] = json{{"model", "poisson"}};
  const ExperimentConfig d = parse_config(j);
  CHECK(d.noise[0].range.lo == 0.005);
  CHECK(d.noise[0].range.hi == 0.1);

  for (const auto& [key, value] : std::vector<std::pair<std::string, json>>{
           {"colour", true},
           {"schema_version", 2},
           {"synth", {{"kind", "piecewise"}}},
           {"estimation", {{"eps", 0.0}}},
           {"estimation", {{"mask_epsilon", 1e-5}}},
           {"ardae", {{"epochs", -1}}},
           {"ardae", {{"epoch", 3}}},
           {"backend", "ardae:"},
           {"noise", {{"model", "gamma"}, {"lo", 80}, {"hi", 20}}},
           {"noise", {{"model", "gaussian"}, {"level", 5}, {"lo", 1}}},
       }) {
    json bad = base_config();
    bad[key] = value;
    CHECK_THROWS_AS(parse_config(bad), ValidationError);
  }
  json unseeded = base_config();
  unseeded.erase("seed");
  CHECK_THROWS_AS(parse_config(unseeded), ValidationError);

  CHECK(parse_backend("ardae:/tmp/m.ardae").checkpoint == "/tmp/m.ardae");
  CHECK(parse_backend("oracle-quadrature").text() == "oracle-quadrature");
}

TEST_CASE("synth writes tensors and a reproducible manifest") {
  const fs::path dir = fresh_dir("synth");
  json j = base_config();
  j["noise"] = json::array({{{"model", "gaussian"}, {"level", 25}, {"count", 10}}});
  const CommandLine cli = write_config(dir, j);
  REQUIRE(run_command("synth", cli) == kExitOk);

  const fs::path run = dir / "run";
  int tensors = 0;
  for (const auto& entry : fs::directory_iterator(run)) tensors += entry.path().extension() == ".f32";
  CHECK(tensors == 20);
  const Manifest m = load_manifest(run / "manifest.json");
  REQUIRE(m.images.size() == 10);
  for (const auto& e : m.images) {
    CHECK(e.noise.kind == NoiseKind::Gaussian);
    CHECK(e.noise.natural_level() == doctest::Approx(25.0 / 255));
    CHECK(read_tensor(run / e.noisy).height() == 24);
  }

  const std::string first = slurp(run / "manifest.json");
  REQUIRE(run_command("synth", cli) == kExitOk);
  CHECK(slurp(run / "manifest.json") == first);

  // Levels survive serialization bit for bit.
  const Manifest again = manifest_from_json(to_json(m), run);
  CHECK(again == m);
  for (std::size_t i = 0; i < m.images.size(); ++i) CHECK(again.images[i].noise.level == m.images[i].noise.level);

  CommandLine reseeded = cli;
  reseeded.seed = 18;
  reseeded.out = dir / "other";
  REQUIRE(run_command("synth", reseeded) == kExitOk);
  CHECK(slurp(dir / "other" / "manifest.json") != first);
}

TEST_CASE("estimate, denoise and eval on oracle scores") {
  const fs::path dir = fresh_dir("pipeline");
  json j = base_config();
  j["synth"] = {{"height", 32}, {"width", 32}};
  j["noise"] = json::array({{{"model", "gaussian"}, {"level", 25}, {"count", 4}},
                            {{"model", "poisson"}, {"level", 0.02}, {"count", 2}}});
  const CommandLine cli = write_config(dir, j);
  const fs::path run = dir / "run";
  REQUIRE(run_command("synth", cli) == kExitOk);

  REQUIRE(run_command("estimate", cli) == kExitOk);
  const auto est = read_csv(run / "estimate_summary.csv");
  REQUIRE(est.size() == 7);
  CHECK(est[0] == std::vector<std::string>{"image", "rho_hat", "model", "level", "truth_model", "truth_level",
                                           "correct"});
  CHECK(fs::exists(run / "estimates" / "img_0000.json"));
  const std::string est_bytes = slurp(run / "estimate_summary.csv");

  REQUIRE(run_command("denoise", cli) == kExitOk);
  CHECK(fs::exists(run / "denoise_summary.csv"));
  const std::string den_bytes = slurp(run / "denoise_summary.csv");

  REQUIRE(run_command("eval", cli) == kExitOk);
  const auto rows = read_csv(run / "psnr.csv");
  REQUIRE(rows.size() == 8);
  CHECK(rows[0] == std::vector<std::string>{"image", "truth_model", "truth_level", "noisy", "blind", "known",
                                            "oracle_posterior", "blind_status"});
  CHECK(rows.back()[0] == "mean");
  for (std::size_t r = 1; r + 1 < rows.size(); ++r) {
    if (rows[r][1] != "gaussian") continue;
    const double noisy = std::stod(rows[r][3]), known = std::stod(rows[r][5]), oracle = std::stod(rows[r][6]);
    CHECK(known >= noisy);
    CHECK(std::abs(known - oracle) <= 0.01);
  }
  const std::string eval_bytes = slurp(run / "psnr.csv");

  // Reruns are byte identical; timings live only in the logs.
  REQUIRE(run_command("estimate", cli) == kExitOk);
  REQUIRE(run_command("denoise", cli) == kExitOk);
  REQUIRE(run_command("eval", cli) == kExitOk);
  CHECK(slurp(run / "estimate_summary.csv") == est_bytes);
  CHECK(slurp(run / "denoise_summary.csv") == den_bytes);
  CHECK(slurp(run / "psnr.csv") == eval_bytes);
  CHECK(fs::exists(run / "eval.log"));
}

TEST_CASE("train writes a checkpoint and a loss curve") {
  const fs::path dir = fresh_dir("train");
  json j = base_config();
  j["ardae"] = {{"epochs", 4}, {"steps_per_epoch", 6}, {"batch_size", 16}, {"hidden", {8}}, {"patch_radius", 1}};
  const CommandLine cli = write_config(dir, j);
  const fs::path run = dir / "run";
  REQUIRE(run_command("synth", cli) == kExitOk);
  REQUIRE(run_command("train", cli) == kExitOk);

  const auto rows = read_csv(run / "loss.csv");
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == std::vector<std::string>{"epoch", "loss", "running_min"});
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const double running = std::stod(rows[r][2]);
    CHECK(running <= previous);
    CHECK(running <= std::stod(rows[r][1]));
    previous = running;
  }
  const ArdaeModel trained = load_checkpoint(run / "model.ardae");
  CHECK(trained.config.epochs == 4);

  SUBCASE("zero epochs leaves the initialization") {
    json z = j;
    z["ardae"]["epochs"] = 0;
    const CommandLine zc = write_config(dir, z);
    REQUIRE(run_command("train", zc) == kExitOk);
    const ArdaeModel m = load_checkpoint(run / "model.ardae");
    const ArdaeModel init = init_ardae(m.config);
    CHECK(m.params == init.params);
    CHECK(m.ema == init.ema);
  }
  SUBCASE("the learned backend drives estimation") {
    json e = j;
    e["backend"] = "ardae:" + (run / "model.ardae").string();
    e["estimation"] = {{"pooled", true}};
    const CommandLine ec = write_config(dir, e);
    const int code = run_command("estimate", ec);
    CHECK((code == kExitOk || code == kExitEstimation));
    CHECK(fs::exists(run / "estimate_pooled.json"));
  }
  SUBCASE("divergence exits with code 4 and keeps the last good weights") {
    json d = j;
    d["ardae"]["learning_rate"] = 1e300;
    d["ardae"]["final_learning_rate"] = 1e300;
    const CommandLine dc = write_config(dir, d);
    CHECK(run_command("train", dc) == kExitDivergence);
    CHECK(load_checkpoint(run / "model.ardae").params.all_finite());
  }
}

TEST_CASE("exit codes") {
  const fs::path dir = fresh_dir("codes");
  CHECK(run_command("synth", {dir / "missing.json", std::nullopt, std::nullopt}) == kExitValidation);
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK(run_command("synth", {dir / "broken.json", std::nullopt, std::nullopt}) == kExitValidation);

  json j = base_config();
  const CommandLine cli = write_config(dir, j);
  CHECK(run_command("estimate", cli) == kExitValidation);  // no manifest yet
  CHECK(run_command("frobnicate", cli) == kExitValidation);

  REQUIRE(run_command("synth", cli) == kExitOk);
  std::ofstream(dir / "run" / "empty.json") << R"({"schema_version":1,"images":[]})";
  json e = j;
  e["manifest"] = (dir / "run" / "empty.json").string();
  CHECK(run_command("estimate", write_config(dir, e)) == kExitValidation);

  json starved = j;
  starved["estimation"] = {{"mask_eps", 1e-300}};
  CHECK(run_command("estimate", write_config(dir, starved)) == kExitEstimation);
  CHECK(run_command("denoise", write_config(dir, starved)) == kExitEstimation);

  json absent = j;
  absent["backend"] = "ardae:" + (dir / "nope.ardae").string();
  CHECK(run_command("estimate", write_config(dir, absent)) == kExitValidation);

  json wrong = j;
  wrong["noise"] = json::array({{{"model", "gamma"}, {"level", 80}, {"count", 1}}});
  wrong["backend"] = "oracle-gaussian";
  const CommandLine wc = write_config(dir, wrong);
  REQUIRE(run_command("synth", wc) == kExitOk);
  CHECK(run_command("estimate", wc) != kExitOk);
}
