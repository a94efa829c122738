#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "gridhmc/force_grid.hpp"
#include "gridhmc/hmc.hpp"
#include "gridhmc/models.hpp"
#include "gridhmc/rng.hpp"

using namespace gridhmc;

namespace {

// Isotropic quadratic bowl, U = |q|^2 / 2.
class HarmonicModel final : public PotentialModel {
 public:
  explicit HarmonicModel(int dim) : dim_(dim) {}
  int dim() const override { return dim_; }
  std::string fingerprint() const override { return "harmonic|" + std::to_string(dim_); }

 protected:
  double potential_impl(const Eigen::VectorXd& q) const override { return 0.5 * q.squaredNorm(); }
  Eigen::VectorXd force_impl(const Eigen::VectorXd& q) const override { return -q; }

 private:
  int dim_;
};

class ZeroForce final : public ForceProvider {
 public:
  explicit ZeroForce(int dim) : dim_(dim) {}
  Eigen::VectorXd force(const Eigen::VectorXd&) const override {
    return Eigen::VectorXd::Zero(dim_);
  }

 private:
  int dim_;
};

class ExplodingForce final : public ForceProvider {
 public:
  Eigen::VectorXd force(const Eigen::VectorXd& q) const override {
    return Eigen::VectorXd::Constant(q.size(), 1e200);
  }
};

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

}  // namespace

TEST_CASE("hamiltonian: closed-form cases") {
  CHECK(hamiltonian(0.0, Eigen::VectorXd::Zero(2), Eigen::Matrix2d::Identity()) == 0.0);
  CHECK(hamiltonian(1.0, Eigen::Vector2d(2, 0), Eigen::Matrix2d::Identity()) ==
        doctest::Approx(3.0));
  const Eigen::Matrix2d mass = 2.0 * Eigen::Matrix2d::Identity();
  CHECK(hamiltonian(0.5, Eigen::Vector2d(1, 1), mass) == doctest::Approx(1.0));
  Eigen::Matrix2d singular;
  singular << 1, 1, 1, 1;
  CHECK_THROWS_AS(hamiltonian(0.0, Eigen::Vector2d(1, 0), singular), NumericalError);
}

TEST_CASE("leapfrog: one harmonic step matches the hand expansion") {
  const HarmonicModel model(1);
  const ExactForce force(model);
  const Eigen::VectorXd inv_mass = Eigen::VectorXd::Ones(1);
  ChainState s{Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Zero(1)};
  const LeapfrogResult r = leapfrog(s, 0.1, 1, force, inv_mass);
  CHECK(r.state.q[0] == doctest::Approx(0.995).epsilon(1e-12));
  CHECK(r.state.p[0] == doctest::Approx(-0.0997500).epsilon(1e-9));
  CHECK(!r.diverged);
}

TEST_CASE("leapfrog: free particle drifts linearly") {
  const ZeroForce force(2);
  const Eigen::VectorXd inv_mass = Eigen::VectorXd::Ones(2);
  const ChainState s{Eigen::Vector2d(0.5, -1.0), Eigen::Vector2d(2.0, 1.0)};
  const int steps = 7;
  const double eps = 0.05;
  const LeapfrogResult r = leapfrog(s, eps, steps, force, inv_mass);
  CHECK((r.state.q - (s.q + steps * eps * s.p)).lpNorm<Eigen::Infinity>() < 1e-14);
  CHECK((r.state.p - s.p).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("leapfrog: time reversibility on the logistic posterior") {
  const LogisticModel model = logistic_fixture(100, 5);
  const ExactForce force(model);
  const Eigen::VectorXd inv_mass = Eigen::VectorXd::Ones(2);
  ChainRng rng(6);
  for (int i = 0; i < 200; ++i) {
    const ChainState s{Eigen::Vector2d(-1.0 + rng.normal(), 1.0 + rng.normal()),
                       rng.normal_vector(2)};
    const LeapfrogResult fwd = leapfrog(s, 0.1, 20, force, inv_mass);
    const LeapfrogResult back =
        leapfrog({fwd.state.q, -fwd.state.p}, 0.1, 20, force, inv_mass);
    CHECK((back.state.q - s.q).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK((back.state.p + s.p).lpNorm<Eigen::Infinity>() < 1e-10);
  }
}

TEST_CASE("leapfrog: one step preserves phase-space volume") {
  // The 2-D harmonic step map is linear, so central differences recover the
  // exact Jacobian of (q, p) -> (q', p').
  const HarmonicModel model(2);
  const ExactForce force(model);
  const Eigen::VectorXd inv_mass = Eigen::VectorXd::Ones(2);
  auto step = [&](const Eigen::Vector4d& z) {
    const LeapfrogResult r = leapfrog({z.head<2>(), z.tail<2>()}, 0.3, 1, force, inv_mass);
    Eigen::Vector4d out;
    out << r.state.q, r.state.p;
    return out;
  };
  const Eigen::Vector4d z0(0.3, -0.2, 0.8, 0.1);
  Eigen::Matrix4d jac;
  const double h = 1e-6;
  for (int k = 0; k < 4; ++k) {
    Eigen::Vector4d e = Eigen::Vector4d::Zero();
    e[k] = h;
    jac.col(k) = (step(z0 + e) - step(z0 - e)) / (2.0 * h);
  }
  CHECK(std::abs(jac.determinant() - 1.0) < 1e-6);
}

TEST_CASE("metropolis_accept") {
  CHECK(metropolis_accept(5.0, 4.0, 0.999999));        // downhill always accepts
  CHECK(metropolis_accept(0.0, std::log(2.0), 0.49));  // rho = 0.5
  CHECK(!metropolis_accept(0.0, std::log(2.0), 0.51));
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(!metropolis_accept(0.0, inf, 0.0));  // diverged proposal
  CHECK(!metropolis_accept(0.0, std::nan(""), 0.0));
}

TEST_CASE("sample: recovers the moments of a standard normal") {
  const HarmonicModel model(1);
  const ExactForce force(model);
  const ExactEnergy energy(model);
  HmcConfig config;
  config.step_size = 0.5;
  config.leapfrog_steps = 10;
  config.iterations = 20000;
  config.burn_in = 500;
  config.seed = 12345;
  const ChainResult result = sample(config, force, energy, Eigen::VectorXd::Zero(1));
  const double mean = result.samples.col(0).mean();
  const double var =
      (result.samples.col(0).array() - mean).square().sum() / (result.samples.rows() - 1);
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.05);
  CHECK(result.acceptance_rate() > 0.9);
}

TEST_CASE("sample: identical seeds give bitwise-identical chains") {
  const LogisticModel model = logistic_fixture(50, 9);
  const ExactForce force(model);
  const ExactEnergy energy(model);
  HmcConfig config;
  config.step_size = 0.1;
  config.leapfrog_steps = 10;
  config.iterations = 200;
  config.burn_in = 50;
  config.seed = 777;
  const ChainResult a = sample(config, force, energy, Eigen::Vector2d(0, 0));
  const ChainResult b = sample(config, force, energy, Eigen::Vector2d(0, 0));
  CHECK(a.samples == b.samples);
  CHECK(a.accepted == b.accepted);
  CHECK(a.delta_h == b.delta_h);
}

TEST_CASE("sample: rejected iterations repeat the previous row bit for bit") {
  const HarmonicModel model(2);
  const ExactForce force(model);
  const ExactEnergy energy(model);
  HmcConfig config;
  config.step_size = 1.9;  // deliberately coarse to force rejections
  config.leapfrog_steps = 3;
  config.iterations = 500;
  config.burn_in = 0;
  config.seed = 31;
  const ChainResult r = sample(config, force, energy, Eigen::Vector2d(1.5, -0.5));
  int rejected = 0;
  for (int i = 1; i < 500; ++i) {
    if (!r.accepted[static_cast<size_t>(i)]) {
      ++rejected;
      CHECK(r.samples.row(i) == r.samples.row(i - 1));
    }
  }
  CHECK(rejected > 10);
}

TEST_CASE("sample: diverged trajectories reject and the chain stays finite") {
  const HarmonicModel model(2);
  const ExplodingForce force;
  const ExactEnergy energy(model);
  HmcConfig config;
  config.step_size = 0.5;
  config.leapfrog_steps = 5;
  config.iterations = 20;
  config.seed = 1;
  const ChainResult r = sample(config, force, energy, Eigen::Vector2d(0.1, 0.1));
  CHECK(r.acceptance_rate() == 0.0);
  CHECK(r.samples.allFinite());
  CHECK((r.samples.row(19) - Eigen::RowVector2d(0.1, 0.1)).norm() == 0.0);
}

TEST_CASE("sample: momentum draw sequence is provider independent") {
  const LogisticModel model = logistic_fixture(100, 13);
  DomainBox box;
  box.lo = Eigen::Vector2d(-3.0, -0.5);
  box.hi = Eigen::Vector2d(0.5, 3.0);
  const ForceGrid grid = build_force_map(model, box, {35, 35});

  const ExactForce exact(model);
  const GridForce gridded(grid, model);
  const ExactEnergy energy(model);
  HmcConfig config;
  config.step_size = 0.1;
  config.leapfrog_steps = 10;
  config.iterations = 100;
  config.burn_in = 20;
  config.seed = 99;
  config.record_momenta = true;
  const ChainResult a = sample(config, exact, energy, Eigen::Vector2d(0, 0));
  const ChainResult b = sample(config, gridded, energy, Eigen::Vector2d(0, 0));
  CHECK(a.momenta == b.momenta);  // same stream positions, provider swapped
  CHECK(a.samples != b.samples);  // but the chains themselves differ
}

TEST_CASE("sample: diagonal mass matrix leaves the target invariant") {
  const HarmonicModel model(2);
  const ExactForce force(model);
  const ExactEnergy energy(model);
  HmcConfig config;
  config.step_size = 0.3;
  config.leapfrog_steps = 12;
  config.iterations = 20000;
  config.burn_in = 500;
  config.seed = 8;
  config.mass_diag = Eigen::Vector2d(2.0, 0.5);
  const ChainResult r = sample(config, force, energy, Eigen::Vector2d(0, 0));
  for (int k = 0; k < 2; ++k) {
    const double mean = r.samples.col(k).mean();
    const double var = (r.samples.col(k).array() - mean).square().sum() / (r.samples.rows() - 1);
    CHECK(std::abs(mean) < 0.1);
    CHECK(std::abs(var - 1.0) < 0.12);
  }
}

TEST_CASE("sample: exact-force acceptance stays high at experiment tuning") {
  const LogisticModel model = logistic_fixture(100, 17);
  const ExactForce force(model);
  const ExactEnergy energy(model);
  HmcConfig config;
  config.step_size = 0.1;
  config.leapfrog_steps = 15;
  config.iterations = 800;
  config.burn_in = 200;
  config.seed = 55;
  const ChainResult r = sample(config, force, energy, Eigen::Vector2d(0, 0));
  double mean_min_rho = 0.0;
  for (double dh : r.delta_h) mean_min_rho += std::min(1.0, std::exp(-dh));
  mean_min_rho /= static_cast<double>(r.delta_h.size());
  CHECK(mean_min_rho >= 0.6);
}

TEST_CASE("hmc config validation") {
  HmcConfig config;
  config.step_size = -0.1;
  CHECK_THROWS_AS(config.validate(2), ValidationError);
  config.step_size = 0.1;
  config.leapfrog_steps = 0;
  CHECK_THROWS_AS(config.validate(2), ValidationError);
  config.leapfrog_steps = 5;
  config.mass_diag = Eigen::Vector3d(1, 1, 1);
  CHECK_THROWS_AS(config.validate(2), ValidationError);
}
