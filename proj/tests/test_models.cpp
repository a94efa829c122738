#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "gridhmc/models.hpp"
#include "gridhmc/rng.hpp"

using namespace gridhmc;

namespace {

// Central-difference force oracle, step 1e-5.
Eigen::VectorXd fd_force(const PotentialModel& model, const Eigen::VectorXd& q) {
  const double h = 1e-5;
  Eigen::VectorXd f(model.dim());
  for (int k = 0; k < model.dim(); ++k) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(model.dim());
    e[k] = h;
    f[k] = -(model.potential(q + e) - model.potential(q - e)) / (2.0 * h);
  }
  return f;
}

void check_force_matches_fd(const PotentialModel& model, const Eigen::VectorXd& lo,
                            const Eigen::VectorXd& hi, int points, std::uint64_t seed) {
  ChainRng rng(seed);
  for (int i = 0; i < points; ++i) {
    Eigen::VectorXd q(model.dim());
    for (int k = 0; k < model.dim(); ++k) q[k] = lo[k] + rng.uniform() * (hi[k] - lo[k]);
    const Eigen::VectorXd analytic = model.force(q);
    const Eigen::VectorXd numeric = fd_force(model, q);
    for (int k = 0; k < model.dim(); ++k)
      CHECK(std::abs(numeric[k] - analytic[k]) <= 1e-5 * (1.0 + std::abs(analytic[k])));
  }
}

LogisticModel logistic_fixture(int n, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.model = "logistic";
  spec.true_params = Eigen::Vector2d(-1.0, 1.0);
  spec.n = n;
  spec.seed = seed;
  const CsvTable data = generate_synthetic(spec);
  Eigen::MatrixXd x(n, 2);
  x.col(0) = data.column("x0");
  x.col(1) = data.column("x1");
  return LogisticModel(x, data.column("y"));
}

BananaModel banana_fixture(int n, std::uint64_t seed, Eigen::VectorXd* y_out = nullptr) {
  SyntheticSpec spec;
  spec.model = "banana";
  spec.true_params = Eigen::Vector2d(0.0, 1.0);
  spec.n = n;
  spec.seed = seed;
  const CsvTable data = generate_synthetic(spec);
  if (y_out) *y_out = data.column("y");
  return BananaModel(data.column("y"), 2.0, 1.0);
}

GpHyperModel gp_fixture(int n, std::uint64_t seed, Eigen::MatrixXd* sites_out = nullptr,
                        Eigen::VectorXd* y_out = nullptr) {
  SyntheticSpec spec;
  spec.model = "gp";
  spec.true_params = Eigen::Vector3d(0.0, 0.0, -0.5);
  spec.n = n;
  spec.seed = seed;
  const CsvTable data = generate_synthetic(spec);
  Eigen::MatrixXd sites(n, 2);
  sites.col(0) = data.column("x1");
  sites.col(1) = data.column("x2");
  if (sites_out) *sites_out = sites;
  if (y_out) *y_out = data.column("y");
  return GpHyperModel(sites, data.column("y"));
}

}  // namespace

TEST_CASE("gaussian conjugate: potential and force vanish at the joint centre") {
  const Eigen::Vector2d ybar(0.7, -0.3);
  Eigen::Matrix2d sigma;
  sigma << 1.0, 0.3, 0.3, 2.0;
  const GaussianConjugateModel model(ybar, 40, sigma, Eigen::Matrix2d::Identity(), ybar);
  CHECK(model.potential(ybar) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(model.force(ybar).norm() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("gaussian conjugate: sufficient statistics match raw data") {
  ChainRng rng(3);
  const int n = 25;
  Eigen::MatrixXd data(n, 2);
  for (int i = 0; i < n; ++i) data.row(i) = Eigen::RowVector2d(rng.normal(), 1.0 + rng.normal());
  Eigen::Matrix2d sigma;
  sigma << 1.5, 0.2, 0.2, 0.9;
  const Eigen::Matrix2d sigma0 = Eigen::Matrix2d::Identity();
  const Eigen::Vector2d mu0(0.1, 0.2);

  const auto from_raw = GaussianConjugateModel::from_data(data, sigma, sigma0, mu0);
  const GaussianConjugateModel from_stats(data.colwise().mean(), n, sigma, sigma0, mu0);
  ChainRng probes(4);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector2d q(probes.normal(), probes.normal());
    CHECK(from_raw.potential(q) == doctest::Approx(from_stats.potential(q)).epsilon(1e-12));
  }
}

TEST_CASE("gaussian conjugate: rejects non-spd covariances") {
  Eigen::Matrix2d bad;
  bad << 1.0, 2.0, 2.0, 1.0;  // indefinite
  CHECK_THROWS_AS(GaussianConjugateModel(Eigen::Vector2d(0, 0), 10, bad,
                                         Eigen::Matrix2d::Identity(), Eigen::Vector2d(0, 0)),
                  NumericalError);
}

TEST_CASE("logistic: closed forms at beta = 0") {
  const int n = 100;
  const LogisticModel model = logistic_fixture(n, 11);
  const Eigen::Vector2d zero(0.0, 0.0);
  CHECK(model.potential(zero) == doctest::Approx(n * std::log(2.0)).epsilon(1e-12));
  const Eigen::VectorXd expected =
      model.design().transpose() *
      (model.responses() - Eigen::VectorXd::Constant(n, 0.5));
  CHECK((model.force(zero) - expected).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("logistic: potential stays finite for extreme linear predictors") {
  const LogisticModel model = logistic_fixture(50, 12);
  CHECK(std::isfinite(model.potential(Eigen::Vector2d(400.0, -300.0))));
  CHECK(model.force(Eigen::Vector2d(400.0, -300.0)).allFinite());
}

TEST_CASE("logistic: input validation") {
  Eigen::MatrixXd x(3, 2);
  x << 1, 0.5, 1, -0.2, 2, 0.1;  // third design row breaks the ones column
  const Eigen::Vector3d y(0, 1, 0);
  CHECK_THROWS_AS(LogisticModel(x, y), ValidationError);
  x.col(0).setOnes();
  const Eigen::Vector3d bad_y(0, 2, 0);
  CHECK_THROWS_AS(LogisticModel(x, bad_y), ValidationError);
}

TEST_CASE("banana: potential matches the direct-summation oracle at (1,0)") {
  Eigen::VectorXd y;
  const BananaModel model = banana_fixture(100, 21, &y);
  double expected = 0.5;  // prior term at (1,0)
  for (Eigen::Index i = 0; i < y.size(); ++i) expected += (y[i] - 1.0) * (y[i] - 1.0) / 8.0;
  CHECK(model.potential(Eigen::Vector2d(1.0, 0.0)) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("analytic forces match central differences") {
  SUBCASE("gaussian") {
    const Eigen::Vector2d ybar(0.4, -0.1);
    Eigen::Matrix2d sigma;
    sigma << 1.0, 0.4, 0.4, 1.2;
    const GaussianConjugateModel model(ybar, 30, sigma, Eigen::Matrix2d::Identity(),
                                       Eigen::Vector2d(0, 0));
    check_force_matches_fd(model, Eigen::Vector2d(-1, -1), Eigen::Vector2d(2, 1), 100, 31);
  }
  SUBCASE("logistic") {
    const LogisticModel model = logistic_fixture(100, 32);
    check_force_matches_fd(model, Eigen::Vector2d(-3, -0.5), Eigen::Vector2d(0.5, 3), 100, 33);
  }
  SUBCASE("banana") {
    const BananaModel model = banana_fixture(100, 34);
    check_force_matches_fd(model, Eigen::Vector2d(-4, -4), Eigen::Vector2d(4, 4), 100, 35);
  }
  SUBCASE("gp") {
    const GpHyperModel model = gp_fixture(20, 36);
    check_force_matches_fd(model, Eigen::Vector3d(-1.6, -1.6, -1.2),
                           Eigen::Vector3d(1.6, 1.6, 0.4), 100, 37);
  }
}

TEST_CASE("gp: potential agrees with an eigenvalue log-determinant oracle") {
  Eigen::MatrixXd sites;
  Eigen::VectorXd y;
  const GpHyperModel model = gp_fixture(10, 41, &sites, &y);

  ChainRng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Vector3d q(-1.6 + 3.2 * rng.uniform(), -1.6 + 3.2 * rng.uniform(),
                            -1.2 + 1.6 * rng.uniform());
    const double eta = std::exp(q[0]), len = std::exp(q[1]), jitter = std::exp(q[2]);
    Eigen::MatrixXd cov(10, 10);
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j)
        cov(i, j) = eta * std::exp(-len * (sites.row(i) - sites.row(j)).squaredNorm()) +
                    (i == j ? jitter : 0.0);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const double log_det = eig.eigenvalues().array().log().sum();
    const Eigen::VectorXd alpha =
        eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
        (eig.eigenvectors().transpose() * y);
    const double expected = 0.5 * (log_det + y.dot(alpha) + (q.array() + 1.0).square().sum());
    CHECK(model.potential(q) == doctest::Approx(expected).epsilon(1e-8));
  }
}

TEST_CASE("gp: rejects dimension mismatch") {
  const GpHyperModel model = gp_fixture(10, 43);
  CHECK_THROWS_AS(model.potential(Eigen::Vector2d(0, 0)), ValidationError);
}

TEST_CASE("synthetic generation is reproducible under a fixed seed") {
  SyntheticSpec spec;
  spec.model = "logistic";
  spec.true_params = Eigen::Vector2d(-1.0, 1.0);
  spec.n = 60;
  spec.seed = 99;
  const CsvTable a = generate_synthetic(spec);
  const CsvTable b = generate_synthetic(spec);
  CHECK(a.rows == b.rows);
  CHECK(a.columns == b.columns);
}

TEST_CASE("synthetic banana data has the configured mean within monte carlo error") {
  SyntheticSpec spec;
  spec.model = "banana";
  spec.true_params = Eigen::Vector2d(0.0, 1.0);  // b1 + b2^2 = 1
  spec.sigma_y = 2.0;
  spec.n = 100;
  spec.seed = 7;
  const CsvTable data = generate_synthetic(spec);
  const double mean = data.column("y").mean();
  CHECK(std::abs(mean - 1.0) < 4.0 * 2.0 / std::sqrt(100.0));
}

TEST_CASE("synthetic logistic frequencies match a quadrature oracle") {
  SyntheticSpec spec;
  spec.model = "logistic";
  spec.true_params = Eigen::Vector2d(-1.0, 1.0);
  spec.n = 10000;
  spec.seed = 8;
  const CsvTable data = generate_synthetic(spec);
  const double frac = data.column("y").mean();

  // E[sigmoid(-1 + x)] under x ~ N(0,1), by dense midpoint quadrature.
  double expected = 0.0;
  const int cells = 40000;
  for (int i = 0; i < cells; ++i) {
    const double x = -10.0 + 20.0 * (i + 0.5) / cells;
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    expected += (20.0 / cells) * pdf / (1.0 + std::exp(1.0 - x));
  }
  CHECK(std::abs(frac - expected) < 0.02);
}

TEST_CASE("synthetic generation rejects unknown model names") {
  SyntheticSpec spec;
  spec.model = "mystery";
  spec.true_params = Eigen::Vector2d(0, 0);
  CHECK_THROWS_AS(generate_synthetic(spec), ValidationError);
}
