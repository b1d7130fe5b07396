#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "tweedie/ardae.hpp"
#include "tweedie/errors.hpp"
#include "tweedie/rng.hpp"

using namespace tweedie;
namespace fs = std::filesystem;

namespace {

Image ramp(std::size_t h, std::size_t w, double lo = 0.1, double hi = 0.9) {
  Image im(h, w);
  for (std::size_t i = 0; i < im.size(); ++i) im[i] = lo + (hi - lo) * static_cast<double>(i) / (im.size() - 1.0);
  return im;
}

ArdaeConfig tiny_config() {
  ArdaeConfig c;
  c.patch_radius = 1;
  c.hidden = {6, 5};
  c.epochs = 2;
  c.steps_per_epoch = 5;
  c.batch_size = 8;
  c.seed = 11;
  return c;
}

MlpParams randomized(const std::vector<int>& widths, std::uint64_t seed) {
  MlpParams p = init_mlp(widths, seed);
  RandomStream r(seed, StreamPurpose::Synthesis);
  std::vector<double> flat = p.flatten();
  for (double& v : flat) v = 0.7 * standard_normal(r);
  p.unflatten(flat);
  return p;
}

}  // namespace

TEST_CASE("geometric schedule") {
  const auto s = geometric_schedule(0.1, 0.001, 3);
  REQUIRE(s.size() == 3);
  CHECK(s[0] == 0.1);
  CHECK(s[1] == doctest::Approx(0.01).epsilon(1e-14));
  CHECK(s[2] == 0.001);
  for (double v : geometric_schedule(0.1, 0.1, 6)) CHECK(v == 0.1);
  const auto t = geometric_schedule(0.1, 0.02, 5);
  CHECK(t.front() == 0.1);
  CHECK(t.back() == 0.02);
  for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i] / t[i - 1] == doctest::Approx(std::pow(0.2, 0.25)));
  CHECK_THROWS_AS(geometric_schedule(0.01, 0.1, 4), ValidationError);
  CHECK_THROWS_AS(geometric_schedule(0.1, 0.01, 1), ValidationError);
}

TEST_CASE("mlp forward/backward agree with finite differences") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const MlpParams p = randomized({3, 4, 2}, seed);
    Eigen::MatrixXd x(3, 5), gout(2, 5);
    RandomStream r(seed, StreamPurpose::Synthesis, 9);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = standard_normal(r);
    for (Eigen::Index i = 0; i < gout.size(); ++i) gout.data()[i] = standard_normal(r);
    MlpTape tape;
    const Eigen::MatrixXd y = mlp_forward(p, x, &tape);
    CHECK(y.rows() == 2);
    const std::vector<double> g = mlp_backward(p, tape, gout).flatten();
    std::vector<double> flat = p.flatten();
    for (std::size_t k = 0; k < flat.size(); ++k) {
      auto objective = [&](double delta) {
        std::vector<double> f = flat;
        f[k] += delta;
        MlpParams q = p;
        q.unflatten(f);
        return (mlp_forward(q, x).array() * gout.array()).sum();
      };
      const double fd = (objective(1e-6) - objective(-1e-6)) / 2e-6;
      CHECK(std::abs(fd - g[k]) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("residual loss: plug-in values and gradient") {
  const int d = 9, n = 12;
  const double sigma_a = 0.05;
  Eigen::MatrixXd patches = Eigen::MatrixXd::Constant(d, n, 0.5);
  RandomStream r(4, StreamPurpose::Synthesis);
  Eigen::MatrixXd u(d, n);
  for (Eigen::Index i = 0; i < u.size(); ++i) u.data()[i] = standard_normal(r);

  SUBCASE("a zero network leaves the mean squared centre draw") {
    const MlpParams zero = zeros_like(init_mlp({d, 4, 1}, 1));
    double expect = 0.0;
    for (int j = 0; j < n; ++j) expect += u(d / 2, j) * u(d / 2, j);
    CHECK(ardae_residual_loss(zero, patches, u, sigma_a) == doctest::Approx(expect / n).epsilon(1e-14));
  }
  SUBCASE("output equal to -u / sigma_a gives zero loss") {
    MlpParams p = zeros_like(init_mlp({d, 4, 1}, 1));
    p.biases.back()(0) = 3.0;  // constant network output
    u.row(d / 2).setConstant(-sigma_a * 3.0);
    CHECK(ardae_residual_loss(p, patches, u, sigma_a) == doctest::Approx(0.0).epsilon(1e-28));
  }
  SUBCASE("gradient matches central differences") {
    for (std::uint64_t seed : {5, 6, 7}) {
      const MlpParams p = randomized({d, 6, 6, 1}, seed);
      for (Eigen::Index i = 0; i < patches.size(); ++i) patches.data()[i] = 0.1 + 0.8 * r.uniform();
      MlpParams grad;
      ardae_residual_loss(p, patches, u, sigma_a, &grad);
      const std::vector<double> g = grad.flatten();
      std::vector<double> flat = p.flatten();
      for (std::size_t k = 0; k < flat.size(); ++k) {
        auto at = [&](double delta) {
          std::vector<double> f = flat;
          f[k] += delta;
          MlpParams q = p;
          q.unflatten(f);
          return ardae_residual_loss(q, patches, u, sigma_a);
        };
        const double fd = (at(1e-5) - at(-1e-5)) / 2e-5;
        CHECK(std::abs(fd - g[k]) <= 1e-4 * std::max(std::abs(fd), std::abs(g[k])) + 1e-9);
      }
    }
  }
  SUBCASE("seeded draws are reproducible") {
    const MlpParams p = randomized({d, 4, 1}, 2);
    const LossAndGrad a = ardae_loss_and_grad(p, patches, sigma_a, 99);
    const LossAndGrad b = ardae_loss_and_grad(p, patches, sigma_a, 99);
    const LossAndGrad c = ardae_loss_and_grad(p, patches, sigma_a, 100);
    CHECK(a.loss == b.loss);
    CHECK(a.grad == b.grad);
    CHECK(a.loss != c.loss);
    CHECK(a.loss >= 0.0);
  }
  CHECK_THROWS_AS(ardae_residual_loss(init_mlp({d, 2, 1}, 1), patches, u, 0.0), DomainError);
}

TEST_CASE("patch extraction uses reflective padding") {
  const Image im(3, 3, std::vector<double>{0, 1, 2, 3, 4, 5, 6, 7, 8});
  const std::vector<std::size_t> corner{0}, centre{4};
  const Eigen::MatrixXd p = extract_patches(im, corner, 1);
  // Rows -1, 0, 1 reflect to 1, 0, 1; same for columns.
  const double expect[9] = {4, 3, 4, 1, 0, 1, 4, 3, 4};
  for (int i = 0; i < 9; ++i) CHECK(p(i, 0) == expect[i]);
  const Eigen::MatrixXd q = extract_patches(im, centre, 1);
  for (int i = 0; i < 9; ++i) CHECK(q(i, 0) == i);
  CHECK_THROWS_AS(extract_patches(im, corner, 3), ValidationError);
}

TEST_CASE("ema blending") {
  const MlpParams target = randomized({3, 4, 1}, 1);
  MlpParams shadow = randomized({3, 4, 1}, 2);
  double dist = shadow.distance(target);
  for (int i = 0; i < 5; ++i) {
    shadow.blend_toward(target, 0.9);
    const double next = shadow.distance(target);
    CHECK(next == doctest::Approx(0.9 * dist).epsilon(1e-12));
    dist = next;
  }
  shadow.blend_toward(target, 0.0);
  CHECK(shadow == target);
}

TEST_CASE("training") {
  const std::vector<Image> data{ramp(10, 12), ramp(9, 9, 0.3, 0.6)};
  const ArdaeConfig cfg = tiny_config();

  SUBCASE("deterministic") {
    const TrainingResult a = train_ardae(cfg, data);
    const TrainingResult b = train_ardae(cfg, data);
    CHECK(a.epoch_loss == b.epoch_loss);
    CHECK(a.model.params == b.model.params);
    CHECK(a.model.ema == b.model.ema);
    CHECK(a.steps == 10);
    CHECK(a.epoch_loss.size() == 2);
    ArdaeConfig other = cfg;
    other.seed = 12;
    CHECK(train_ardae(other, data).epoch_loss != a.epoch_loss);
  }
  SUBCASE("zero decay makes the shadow copy track the weights") {
    ArdaeConfig c = cfg;
    c.ema_decay = 0.0;
    const TrainingResult r = train_ardae(c, data);
    CHECK(r.model.ema == r.model.params);
    CHECK_FALSE(r.model.params == init_ardae(c).params);
  }
  SUBCASE("zero epochs returns the initialization") {
    ArdaeConfig c = cfg;
    c.epochs = 0;
    const TrainingResult r = train_ardae(c, data);
    const ArdaeModel init = init_ardae(c);
    CHECK(r.model.params == init.params);
    CHECK(r.model.ema == init.params);
    CHECK(r.epoch_loss.empty());
  }
  SUBCASE("non-finite loss reports the last good model") {
    const std::vector<Image> bad{Image(8, 8, 1e200)};
    try {
      train_ardae(cfg, bad);
      FAIL("expected divergence");
    } catch (const TrainingDivergence& e) {
      CHECK(e.step() == 0);
      CHECK(e.last_good().params == init_ardae(cfg).params);
    }
  }
  SUBCASE("invalid inputs") {
    CHECK_THROWS_AS(train_ardae(cfg, std::vector<Image>{}), ValidationError);
    CHECK_THROWS_AS(train_ardae(cfg, std::vector<Image>{Image(1, 4, 0.5)}), ValidationError);
    ArdaeConfig c = cfg;
    c.sigma_a_min = 0.5;
    CHECK_THROWS_AS(train_ardae(c, data), ValidationError);
  }
}

TEST_CASE("score evaluation") {
  const ArdaeConfig cfg = tiny_config();
  const ArdaeModel init = init_ardae(cfg);
  const Image flat(9, 11, 0.4);
  const ScoreField z = eval_score(zeros_like(init.params), cfg.patch_radius, flat);
  for (double v : z.values) CHECK(v == 0.0);
  const ScoreField c = eval_score(init.params, cfg.patch_radius, flat);
  for (double v : c.values) CHECK(v == c.values[0]);
  const Image r = ramp(9, 11);
  CHECK(eval_score(init.params, cfg.patch_radius, r).values == eval_score(init.params, cfg.patch_radius, r).values);
  CHECK_THROWS_AS(eval_score(init.params, 2, r), ValidationError);

  const ArdaeScore backend(init);
  CHECK(backend.name() == "ardae:" + config_hash(cfg));
  CHECK(backend.evaluate(r).values == eval_score(init.ema, cfg.patch_radius, r).values);
}

TEST_CASE("config serialization") {
  const ArdaeConfig c = tiny_config();
  CHECK(ardae_config_from_json(to_json(c)) == c);
  CHECK(config_hash(c) == config_hash(ardae_config_from_json(to_json(c))));
  CHECK(config_hash(c).size() == 16);
  ArdaeConfig d = c;
  d.learning_rate *= 2;
  CHECK(config_hash(c) != config_hash(d));
  CHECK_THROWS_AS(ardae_config_from_json({{"learning_rat", 1e-3}}), ValidationError);
  CHECK_THROWS_AS(ardae_config_from_json({{"ema_decay", 1.0}}), ValidationError);
  CHECK(ArdaeConfig::defaults_for(NoiseKind::Poisson).sigma_a_min == 0.02);
  CHECK(ArdaeConfig::defaults_for(NoiseKind::Gamma).sigma_a_min == 0.001);
  CHECK(c.decay_epoch() == 1);
}

TEST_CASE("checkpoint round trip") {
  const fs::path dir = fs::temp_directory_path() / "tweedie_test_ckpt";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const TrainingResult r = train_ardae(tiny_config(), std::vector<Image>{ramp(10, 10)});
  save_checkpoint(dir / "m.ardae", r.model);
  const ArdaeModel back = load_checkpoint(dir / "m.ardae");
  CHECK(back.config == r.model.config);
  CHECK(back.params == r.model.params);
  CHECK(back.ema == r.model.ema);

  {
    std::ofstream(dir / "m.ardae", std::ios::binary | std::ios::app) << 'x';
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "m.ardae"), ValidationError);
  std::ofstream(dir / "junk.ardae") << "not a checkpoint";
  CHECK_THROWS_AS(load_checkpoint(dir / "junk.ardae"), ValidationError);
  CHECK_THROWS_AS(load_checkpoint(dir / "absent.ardae"), ValidationError);
}
