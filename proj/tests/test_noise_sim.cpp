#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "tweedie/errors.hpp"
#include "tweedie/noise_sim.hpp"
#include "tweedie/rng.hpp"
#include "tweedie/tensor_io.hpp"

using namespace tweedie;
namespace fs = std::filesystem;

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

Moments moments(const Image& im) {
  Moments m;
  for (double v : im) m.mean += v;
  m.mean /= static_cast<double>(im.size());
  for (double v : im) m.var += (v - m.mean) * (v - m.mean);
  m.var /= static_cast<double>(im.size() - 1);
  return m;
}

fs::path scratch_dir(const char* name) {
  const fs::path p = fs::temp_directory_path() / ("tweedie_test_" + std::string(name));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("random streams are counter based") {
  RandomStream a(42, StreamPurpose::Noise, 7), b(42, StreamPurpose::Noise, 7);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());
  RandomStream c(42, StreamPurpose::Noise, 8), d(42, StreamPurpose::Perturbation, 7);
  RandomStream e(42, StreamPurpose::Noise, 7);
  const auto first = e();
  CHECK(c() != first);
  CHECK(d() != first);

  RandomStream u(1);
  for (int i = 0; i < 10000; ++i) {
    const double x = u.uniform();
    CHECK((x > 0.0 && x < 1.0));
    CHECK(u.below(7) < 7);
  }
}

TEST_CASE("poisson and gamma samplers match their moments") {
  for (double mean : {0.0, 0.7, 12.0, 29.5, 30.0, 50.0, 400.0}) {
    RandomStream r(3, StreamPurpose::Noise, static_cast<std::uint64_t>(mean * 10));
    const int n = 40000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double v = static_cast<double>(poisson(r, mean));
      s += v;
      s2 += v * v;
    }
    const double m = s / n, var = s2 / n - m * m;
    CHECK(std::abs(m - mean) <= 5 * std::sqrt(std::max(mean, 1e-12) / n) + 1e-12);
    if (mean > 0) CHECK(std::abs(var / mean - 1.0) < 0.05);
  }
  for (double shape : {0.5, 1.0, 40.0, 120.0}) {
    RandomStream r(4, StreamPurpose::Noise, static_cast<std::uint64_t>(shape));
    const int n = 40000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double v = gamma_unit_scale(r, shape);
      CHECK(v > 0.0);
      s += v;
      s2 += v * v;
    }
    const double m = s / n, var = s2 / n - m * m;
    CHECK(std::abs(m - shape) <= 5 * std::sqrt(shape / n));
    CHECK(std::abs(var / shape - 1.0) < 0.05);
  }
  RandomStream r(1);
  CHECK_THROWS_AS(poisson(r, -1.0), DomainError);
  CHECK_THROWS_AS(gamma_unit_scale(r, 0.0), DomainError);
}

TEST_CASE("gmm prior validation and atoms") {
  CHECK_THROWS_AS(GmmPrior(std::vector<GmmComponent>{}), ValidationError);
  CHECK_THROWS_AS(GmmPrior({{0.5, 0.3, 0.1}}), ValidationError);
  CHECK_THROWS_AS(GmmPrior({{1.0, 1.5, 0.1}}), ValidationError);
  CHECK_THROWS_AS(GmmPrior({{1.0, 0.5, -0.1}}), ValidationError);
  const GmmPrior p({{0.25, 0.2, 0.1}, {0.75, 0.6, 0.0}});
  CHECK(p.mean() == doctest::Approx(0.5));
  CHECK(p.variance() == doctest::Approx(0.25 * (0.01 + 0.04) + 0.75 * 0.36 - 0.25));
  CHECK_FALSE(p.all_atoms());

  Image im(2, 4, std::vector<double>{0.2, 0.2, 0.2, 0.8, 0.8, 0.2, 0.2, 0.2});
  const GmmPrior atoms = GmmPrior::atoms_of(im);
  REQUIRE(atoms.components().size() == 2);
  CHECK(atoms.all_atoms());
  CHECK(atoms.components()[0].mean == 0.2);
  CHECK(atoms.components()[0].weight == doctest::Approx(0.75));
}

TEST_CASE("gen_clean") {
  SynthSpec spec;
  spec.prior = default_piecewise_prior();
  spec.seed = 7;

  SUBCASE("single region is constant") {
    spec.height = spec.width = 8;
    spec.regions = 1;
    const Image im = gen_clean(spec);
    for (double v : im) CHECK(v == im[0]);
  }
  SUBCASE("deterministic and seed dependent") {
    CHECK(gen_clean(spec) == gen_clean(spec));
    SynthSpec other = spec;
    other.seed = 8;
    CHECK_FALSE(gen_clean(spec) == gen_clean(other));
  }
  SUBCASE("piecewise levels come from the prior means") {
    const Image im = gen_clean(spec);
    std::set<double> levels(im.begin(), im.end());
    for (double v : levels) CHECK((v == 0.25 || v == 0.5 || v == 0.75));
  }
  SUBCASE("iid pixels follow the prior mean") {
    spec.kind = SynthKind::GmmIid;
    spec.prior = GmmPrior({{0.5, 0.3, 0.02}, {0.5, 0.7, 0.02}});
    spec.seed = 1;
    const Image im = gen_clean(spec);
    const double se = std::sqrt(spec.prior.variance() / static_cast<double>(im.size()));
    CHECK(std::abs(moments(im).mean - 0.5) <= 3 * se);
    for (double v : im) CHECK((v >= kIntensityFloor && v <= 1.0));
  }
  SUBCASE("invalid specs") {
    spec.height = 4;
    CHECK_THROWS_AS(gen_clean(spec), ValidationError);
    spec.height = 8;
    spec.regions = 0;
    CHECK_THROWS_AS(gen_clean(spec), ValidationError);
  }
}

TEST_CASE("sample_noisy moments") {
  const Image x(128, 128, 0.5);

  SUBCASE("gaussian degenerate limit") {
    const Image y = sample_noisy(x, NoiseModel::gaussian_sigma(1e-12), 1);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(y[i] - x[i]) <= 1e-10);
  }
  SUBCASE("poisson variance is zeta x") {
    const Moments m = moments(sample_noisy(x, NoiseModel::poisson(0.01), 2));
    CHECK(std::abs(m.var / 0.005 - 1.0) < 0.1);
    CHECK(std::abs(m.mean - 0.5) < 4 * std::sqrt(0.005 / 16384));
  }
  SUBCASE("gamma variance is x^2 / k") {
    const Moments m = moments(sample_noisy(x, NoiseModel::gamma(100), 3));
    CHECK(std::abs(m.var / 0.0025 - 1.0) < 0.1);
    CHECK(std::abs(m.mean - 0.5) < 4 * std::sqrt(0.0025 / 16384));
  }
  SUBCASE("gaussian variance and clamp bias") {
    const Image xs(128, 128, 0.2);
    const double sigma = 55.0 / 255.0;
    const Moments m = moments(sample_noisy(xs, NoiseModel::gaussian_sigma(sigma), 4));
    // Values below the floor are raised to it: moments of a normal censored at kIntensityFloor.
    const double a = (kIntensityFloor - 0.2) / sigma;
    const double cdf = 0.5 * std::erfc(-a / std::sqrt(2.0));
    const double pdf = std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
    const double mean = cdf * kIntensityFloor + (1.0 - cdf) * 0.2 + sigma * pdf;
    const double second = cdf * kIntensityFloor * kIntensityFloor +
                          (1.0 - cdf) * (0.2 * 0.2 + sigma * sigma) + sigma * pdf * (0.2 + kIntensityFloor);
    const double var = second - mean * mean;
    CHECK(std::abs(m.var / var - 1.0) < 0.1);
    CHECK(std::abs(m.mean - mean) < 4 * std::sqrt(var) / 128);
    CHECK(m.mean > 0.2);
  }
  SUBCASE("deterministic, floored, and rejects bad levels") {
    const Image a = sample_noisy(x, NoiseModel::poisson(0.1), 9);
    CHECK(a == sample_noisy(x, NoiseModel::poisson(0.1), 9));
    for (double v : a) CHECK(v >= kIntensityFloor);
    CHECK_THROWS_AS(sample_noisy(x, NoiseModel::poisson(0.0), 1), DomainError);
    CHECK_THROWS_AS(sample_noisy(x, NoiseModel::gamma(-2), 1), DomainError);
  }
}

TEST_CASE("noise ranges") {
  const NoiseRange g = NoiseRange::defaults(NoiseKind::Gaussian);
  CHECK(g.lo == doctest::Approx(5.0 / 255));
  CHECK(g.hi == doctest::Approx(55.0 / 255));
  const NoiseRange k = NoiseRange::defaults(NoiseKind::Gamma);
  for (std::uint64_t i = 0; i < 200; ++i) {
    const NoiseModel m = k.draw(1, i);
    CHECK((m.level >= 40 && m.level <= 120));
    CHECK(m == k.draw(1, i));
  }
  const NoiseModel s = g.draw(2, 0);
  CHECK((std::sqrt(s.level) >= g.lo && std::sqrt(s.level) <= g.hi));
  CHECK_THROWS_AS((NoiseRange{NoiseKind::Poisson, 0.2, 0.1}.validate()), ValidationError);
}

TEST_CASE("psnr") {
  const Image a(8, 8, 0.5);
  CHECK(psnr(a, a) == kPsnrIdentical);
  CHECK(psnr(a, Image(8, 8, 0.6)) == doctest::Approx(20.0));
  CHECK(psnr(a, Image(8, 8, 0.5 + std::sqrt(0.001))) == doctest::Approx(30.0));
  CHECK_THROWS_AS(psnr(a, Image(4, 4)), ValidationError);
}

TEST_CASE("tensor files round trip through float32") {
  const fs::path dir = scratch_dir("tensor");
  Image im(3, 5);
  for (std::size_t i = 0; i < im.size(); ++i) im[i] = 0.1 * static_cast<double>(i);
  write_tensor(dir / "a.f32", im);
  const Image back = read_tensor(dir / "a.f32");
  REQUIRE(back.same_shape(im));
  for (std::size_t i = 0; i < im.size(); ++i) CHECK(back[i] == static_cast<double>(static_cast<float>(im[i])));
  CHECK(fs::file_size(dir / "a.f32") == 15 * 4);

  std::ofstream(sidecar_path(dir / "a.f32")) << R"({"dtype":"f32","shape":[4,5]})";
  CHECK_THROWS_AS(read_tensor(dir / "a.f32"), ValidationError);
  CHECK_THROWS_AS(read_tensor(dir / "missing.f32"), ValidationError);

  write_pgm(dir / "a.pgm", im);
  std::ifstream pgm(dir / "a.pgm", std::ios::binary);
  std::string magic;
  pgm >> magic;
  CHECK(magic == "P5");
}

TEST_CASE("image helpers") {
  Image im(1, 4, std::vector<double>{-1.0, 0.0, 0.5, 2.0});
  const Image f = clamp_below(im);
  CHECK(f[0] == kIntensityFloor);
  CHECK(count_at_or_below(f) == 2);
  const Image c = clamp_range(im, 0.1, 1.0);
  CHECK(c[3] == 1.0);
  CHECK_THROWS_AS(require_finite(Image(1, 1, NAN), "x"), DomainError);
  CHECK_THROWS_AS(Image(2, 2, std::vector<double>(3)), ValidationError);
  const std::vector<Image> parts{Image(2, 2, 1.0), Image(1, 3, 2.0)};
  const Image row = concat_rows(parts);
  CHECK(row.height() == 1);
  CHECK(row.width() == 7);
  CHECK(row[6] == 2.0);
}
