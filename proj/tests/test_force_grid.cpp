#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>

#include "gridhmc/force_grid.hpp"
#include "gridhmc/models.hpp"
#include "gridhmc/rng.hpp"

using namespace gridhmc;

namespace {

class LinearPullModel final : public PotentialModel {
 public:
  explicit LinearPullModel(int dim) : dim_(dim) {}
  int dim() const override { return dim_; }
  std::string fingerprint() const override { return "linear-pull"; }

 protected:
  double potential_impl(const Eigen::VectorXd& q) const override { return 0.5 * q.squaredNorm(); }
  Eigen::VectorXd force_impl(const Eigen::VectorXd& q) const override { return -q; }

 private:
  int dim_;
};

class ConstantForceModel final : public PotentialModel {
 public:
  int dim() const override { return 2; }
  std::string fingerprint() const override { return "constant-force"; }

 protected:
  double potential_impl(const Eigen::VectorXd& q) const override { return -q.sum(); }
  Eigen::VectorXd force_impl(const Eigen::VectorXd&) const override {
    return Eigen::Vector2d(1.0, 1.0);
  }
};

class PoleModel final : public PotentialModel {
 public:
  int dim() const override { return 1; }
  std::string fingerprint() const override { return "pole"; }

 protected:
  double potential_impl(const Eigen::VectorXd& q) const override { return 1.0 / q[0]; }
  Eigen::VectorXd force_impl(const Eigen::VectorXd& q) const override {
    return Eigen::VectorXd::Constant(1, q[0] == 0.25 ? std::nan("") : -q[0]);
  }
};

DomainBox box2d(double ax, double bx, double ay, double by) {
  DomainBox box;
  box.lo = Eigen::Vector2d(ax, ay);
  box.hi = Eigen::Vector2d(bx, by);
  return box;
}

DomainBox box1d(double a, double b) {
  DomainBox box;
  box.lo = Eigen::VectorXd::Constant(1, a);
  box.hi = Eigen::VectorXd::Constant(1, b);
  return box;
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

double sup_lookup_error(const ForceGrid& grid, const PotentialModel& model, int probes,
                        std::uint64_t seed) {
  ChainRng rng(seed);
  double sup = 0.0;
  Eigen::VectorXd q(grid.dim());
  for (int i = 0; i < probes; ++i) {
    for (int k = 0; k < grid.dim(); ++k)
      q[k] = grid.domain().lo[k] + rng.uniform() * (grid.domain().hi[k] - grid.domain().lo[k]);
    sup = std::max(sup,
                   (lookup_force(grid, model, q) - model.force(q)).lpNorm<Eigen::Infinity>());
  }
  return sup;
}

}  // namespace

TEST_CASE("build: 1-d two-cell map stores the centre forces") {
  const LinearPullModel model(1);
  const ForceGrid grid = build_force_map(model, box1d(0.0, 1.0), {2});
  CHECK(grid.cell_count() == 2);
  CHECK(grid.stored_force(0)[0] == doctest::Approx(-0.25).epsilon(1e-15));
  CHECK(grid.stored_force(1)[0] == doctest::Approx(-0.75).epsilon(1e-15));
}

TEST_CASE("build: the logistic experiment grid is 35 x 35 at cell size 0.1") {
  const LogisticModel model = logistic_fixture(100, 3);
  const ForceGrid grid = build_force_map(model, box2d(-3.0, 0.5, -0.5, 3.0), {35, 35});
  CHECK(grid.cell_count() == 35 * 35);
  CHECK(grid.deltas()[0] == doctest::Approx(0.1));
  CHECK(grid.deltas()[1] == doctest::Approx(0.1));
  // stored values are the exact centre forces
  const std::vector<int> idx{7, 21};
  const Eigen::VectorXd center = grid.cell_center(idx);
  CHECK((grid.stored_force(grid.flat_index(idx)) - model.force(center))
            .lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("build: constant force fields give a constant table") {
  const ConstantForceModel model;
  const ForceGrid grid = build_force_map(model, box2d(-1, 1, -1, 1), {5, 7});
  for (Eigen::Index i = 0; i < grid.cell_count(); ++i)
    CHECK((grid.stored_force(i) - Eigen::Vector2d(1, 1)).norm() == 0.0);
}

TEST_CASE("build: evaluation failures carry the cell index") {
  const PoleModel model;
  CHECK_THROWS_AS(build_force_map(model, box1d(0.0, 1.0), {2}), NumericalError);
}

TEST_CASE("locate_cell conventions") {
  const LinearPullModel model(1);
  const ForceGrid grid = build_force_map(model, box1d(0.0, 1.0), {4});
  CHECK((*grid.locate_cell(Eigen::VectorXd::Constant(1, 0.3)))[0] == 1);
  // interior boundaries belong to the higher cell
  CHECK((*grid.locate_cell(Eigen::VectorXd::Constant(1, 0.25)))[0] == 1);
  CHECK((*grid.locate_cell(Eigen::VectorXd::Constant(1, 0.0)))[0] == 0);
  // the upper domain edge maps into the last cell
  CHECK((*grid.locate_cell(Eigen::VectorXd::Constant(1, 1.0)))[0] == 3);
  CHECK(!grid.locate_cell(Eigen::VectorXd::Constant(1, 1.5)).has_value());
  CHECK(!grid.locate_cell(Eigen::VectorXd::Constant(1, -0.1)).has_value());
}

TEST_CASE("lookup: piecewise constant within a cell, exact fallback outside") {
  const LogisticModel model = logistic_fixture(80, 5);
  const ForceGrid grid = build_force_map(model, box2d(-3.0, 0.5, -0.5, 3.0), {35, 35});

  const std::vector<int> idx{10, 12};
  const Eigen::VectorXd center = grid.cell_center(idx);
  CHECK((lookup_force(grid, model, center) - model.force(center)).norm() == 0.0);

  // same stored vector anywhere in the cell
  Eigen::VectorXd off = center;
  off[0] += 0.33 * grid.deltas()[0];
  off[1] -= 0.49 * grid.deltas()[1];
  CHECK((lookup_force(grid, model, off) - lookup_force(grid, model, center)).norm() == 0.0);

  const GridForce provider(grid, model);
  CHECK(provider.fallback_count() == 0);
  const Eigen::Vector2d outside(5.0, 5.0);
  CHECK((provider.force(outside) - model.force(outside)).norm() == 0.0);
  CHECK(provider.fallback_count() == 1);
  provider.force(center);
  CHECK(provider.fallback_count() == 1);
}

TEST_CASE("refinement: sup lookup error is non-increasing as cells shrink") {
  const LogisticModel logistic = logistic_fixture(100, 7);
  const DomainBox lbox = box2d(-3.0, 0.5, -0.5, 3.0);
  SyntheticSpec bspec;
  bspec.model = "banana";
  bspec.true_params = Eigen::Vector2d(0.0, 1.0);
  bspec.n = 100;
  bspec.seed = 8;
  const BananaModel banana(generate_synthetic(bspec).column("y"), 2.0, 1.0);
  const DomainBox bbox = box2d(-4.0, 4.0, -4.0, 4.0);

  const std::vector<double> sizes{0.4, 0.2, 0.1, 0.05};
  auto run = [&](const PotentialModel& model, const DomainBox& box) {
    double prev = std::numeric_limits<double>::infinity();
    for (double delta : sizes) {
      std::vector<int> cells(2);
      for (int k = 0; k < 2; ++k)
        cells[k] = static_cast<int>(std::lround((box.hi[k] - box.lo[k]) / delta));
      const ForceGrid grid = build_force_map(model, box, cells);
      const double sup = sup_lookup_error(grid, model, 10000, 11);
      CHECK(sup <= prev);
      prev = sup;
    }
  };
  run(logistic, lbox);
  run(banana, bbox);
}

TEST_CASE("build: parallel and serial builds are bit-identical") {
  const LogisticModel model = logistic_fixture(60, 9);
  const DomainBox box = box2d(-3.0, 0.5, -0.5, 3.0);
  ForceGridBuildOptions serial, parallel;
  serial.with_vertex_potential = true;
  parallel.with_vertex_potential = true;
  parallel.threads = 4;
  const ForceGrid a = build_force_map(model, box, {35, 35}, serial);
  const ForceGrid b = build_force_map(model, box, {35, 35}, parallel);
  CHECK(a.values() == b.values());
  CHECK(a.vertex_potential() == b.vertex_potential());
}

TEST_CASE("cache file round trip and fingerprint checks") {
  const LinearPullModel model(2);
  const DomainBox box = box2d(-1.0, 1.0, -2.0, 2.0);
  ForceGridBuildOptions options;
  options.with_vertex_potential = true;
  const ForceGrid grid = build_force_map(model, box, {4, 8}, options);
  const std::string path = "force_grid_test_cache.json";
  save_force_grid(grid, "fp123", path);

  const ForceGrid loaded = load_force_grid(path, "fp123");
  CHECK(loaded.values() == grid.values());
  CHECK(loaded.vertex_potential() == grid.vertex_potential());
  CHECK(loaded.cells() == grid.cells());

  CHECK_THROWS_WITH_AS(load_force_grid(path, "other"),
                       doctest::Contains("model_fingerprint"), ValidationError);

  // corrupt the values field
  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("{\"format_version\":1,\"model_fingerprint\":\"fp123\","
               "\"domain\":{\"lo\":[-1,-2],\"hi\":[1,2],\"provenance\":\"manual\",\"param\":0},"
               "\"cells\":[4,8],\"values\":[1,2,3]}",
               f);
    std::fclose(f);
  }
  CHECK_THROWS_WITH_AS(load_force_grid(path, "fp123"), doctest::Contains("values"),
                       ValidationError);
  std::remove(path.c_str());
}
