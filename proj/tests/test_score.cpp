#include <doctest.h>

#include <cmath>

#include "tweedie/errors.hpp"
#include "tweedie/score.hpp"

using namespace tweedie;

namespace {

double fd(auto&& f, double y, double h = 1e-5) { return (f(y + h) - f(y - h)) / (2 * h); }

double scaled_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

const GmmPrior& mixed_prior() {
  static const GmmPrior p({{0.3, 0.25, 0.05}, {0.45, 0.55, 0.08}, {0.25, 0.8, 0.0}});
  return p;
}

}  // namespace

TEST_CASE("gaussian oracle closed forms") {
  CHECK(analytic_score_gaussian(0.7, GmmPrior({{1.0, 0.5, 0.0}}), 0.2) == doctest::Approx(-5.0).epsilon(1e-14));
  CHECK(analytic_score_gaussian(0.7, GmmPrior({{1.0, 0.5, 1e-9}}), 0.2) == doctest::Approx(-5.0).epsilon(1e-12));
  const GmmPrior sym({{0.5, 0.3, 0.05}, {0.5, 0.7, 0.05}});
  CHECK(std::abs(analytic_score_gaussian(0.5, sym, 0.1)) < 1e-12);
  CHECK_THROWS_AS(analytic_score_gaussian(0.5, sym, 0.0), DomainError);
}

TEST_CASE("gaussian oracle matches the derivative of its log marginal") {
  for (double sigma : {0.02, 0.1, 0.3}) {
    for (int i = 0; i <= 60; ++i) {
      const double y = -0.2 + 0.025 * i;
      const double s = analytic_score_gaussian(y, mixed_prior(), sigma);
      const double num = fd([&](double v) { return gaussian_log_marginal(v, mixed_prior(), sigma); }, y);
      CHECK(scaled_diff(s, num) < 1e-6);
    }
  }
  // Far tails stay finite thanks to the log-sum-exp form.
  CHECK(std::isfinite(analytic_score_gaussian(40.0, mixed_prior(), 0.01)));
}

TEST_CASE("quadrature reproduces the gaussian closed form") {
  // Components sit well above zero so the quadrature's positivity cut removes no mass.
  const GmmPrior prior({{0.3, 0.35, 0.03}, {0.45, 0.55, 0.04}, {0.25, 0.8, 0.0}});
  const QuadratureMarginal q(prior, NoiseModel::gaussian_sigma(0.1));
  for (int i = 1; i <= 40; ++i) {
    const double y = 0.025 * i;
    CHECK(scaled_diff(q.score(y), analytic_score_gaussian(y, prior, 0.1)) < 1e-8);
    CHECK(std::abs(q.log_marginal(y) - gaussian_log_marginal(y, prior, 0.1)) < 1e-8);
  }
}

TEST_CASE("gamma point prior closed form") {
  const double k = 60.0, x0 = 0.4;
  const QuadratureMarginal q(GmmPrior({{1.0, x0, 0.0}}), NoiseModel::gamma(k));
  for (double y : {0.1, 0.3, 0.4, 0.7, 1.2}) CHECK(q.score(y) == doctest::Approx((k - 1) / y - k / x0).epsilon(1e-12));
}

TEST_CASE("quadrature scores match finite differences of the log marginal") {
  for (const NoiseModel& m : {NoiseModel::poisson(0.01), NoiseModel::poisson(0.05), NoiseModel::gamma(80)}) {
    for (const GmmPrior& prior : {GmmPrior({{1.0, 0.5, 0.0}}), mixed_prior()}) {
      const QuadratureMarginal q(prior, m);
      for (int i = 1; i <= 20; ++i) {
        const double y = 0.05 * i;
        const double num = fd([&](double v) { return q.log_marginal(v); }, y);
        CHECK(scaled_diff(q.score(y), num) < 1e-6);
      }
    }
  }
}

TEST_CASE("quadrature is self-convergent under order doubling") {
  for (const NoiseModel& m : {NoiseModel::poisson(0.01), NoiseModel::gamma(100), NoiseModel::gaussian_sigma(0.05)}) {
    QuadratureOptions fine;
    fine.order = 96;
    const QuadratureMarginal a(mixed_prior(), m), b(mixed_prior(), m, fine);
    for (int i = 1; i <= 50; ++i) {
      const double y = 0.02 * i;
      CHECK(scaled_diff(a.score(y), b.score(y)) <= 1e-8);
    }
  }
  QuadratureOptions verified;
  verified.verify = true;
  CHECK_NOTHROW(QuadratureMarginal(mixed_prior(), NoiseModel::gamma(100), verified).score(0.5));
  QuadratureOptions coarse;
  coarse.order = 2;
  coarse.panels = 1;
  coarse.verify = true;
  CHECK_THROWS_AS(QuadratureMarginal(GmmPrior({{1.0, 0.5, 0.2}}), NoiseModel::gamma(100), coarse).score(0.5),
                  QuadratureError);
}

TEST_CASE("backends") {
  Image y(8, 8);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 0.1 + 0.012 * static_cast<double>(i);

  const auto g = make_oracle(mixed_prior(), NoiseModel::gaussian_sigma(0.1));
  const auto p = make_oracle(mixed_prior(), NoiseModel::poisson(0.02));
  CHECK(g->name() == "oracle-gaussian");
  CHECK(p->name() == "oracle-quadrature");
  const ScoreField fg = g->evaluate(y);
  CHECK(fg.backend == "oracle-gaussian");
  CHECK(fg.values.same_shape(y));
  for (std::size_t i = 0; i < y.size(); ++i) {
    CHECK(fg.values[i] == analytic_score_gaussian(y[i], mixed_prior(), 0.1));
    CHECK(std::isfinite(p->evaluate(y).values[i]));
  }

  const CountingBackend counter(*p);
  CHECK(counter.calls() == 0);
  counter.evaluate(y);
  counter.evaluate(y);
  CHECK(counter.calls() == 2);
  CHECK(counter.name() == p->name());

  const ScoreField direct = numeric_marginal_score(y, mixed_prior(), NoiseModel::poisson(0.02));
  CHECK(direct.values == p->evaluate(y).values);
}
