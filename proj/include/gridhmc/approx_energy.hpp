#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <vector>

#include "gridhmc/force_grid.hpp"
#include "gridhmc/sparse_grid.hpp"

namespace gridhmc {

// Approximate correction energies for the *-complete samplers. Both are
// continuous inside the domain of interest, agree with the exact U at their
// nodes, and fall back to the exact model potential outside the box.

class VertexEnergy final : public EnergyProvider {
 public:
  VertexEnergy(const ForceGrid& grid, const PotentialModel& model);

  double energy(const Eigen::VectorXd& q) const override {
    if (grid_->domain().contains(q)) return grid_->interpolated_potential(q);
    return model_->potential(q);
  }

 private:
  const ForceGrid* grid_;
  const PotentialModel* model_;
};

class SparseEnergy final : public EnergyProvider {
 public:
  SparseEnergy(const SparseInterpolant& interp, const PotentialModel& model)
      : interp_(&interp), model_(&model) {}

  double energy(const Eigen::VectorXd& q) const override {
    if (interp_->domain().contains(q)) return interp_->value(q);
    return model_->potential(q);
  }

 private:
  const SparseInterpolant* interp_;
  const PotentialModel* model_;
};

// Numerical check of the divergence bound D_KL(P||Q) <= 2 sup |U - V| for
// P ~ exp(-U), Q ~ exp(-V) restricted to the domain box.
struct KlReport {
  double sup_diff = 0.0;     // estimated sup |U - V|
  double bound = 0.0;        // 2 * sup_diff
  double kl_estimate = 0.0;  // trapezoidal quadrature of D_KL(P||Q)
  int probe_resolution = 0;
  int quadrature_resolution = 0;
  int random_probes = 0;
};

// sup |U - V| over a probe lattice (probe_resolution points per axis) plus
// uniform random probes; KL by trapezoidal quadrature on a lattice with
// quadrature_resolution cells per axis, normalized with log-sum-exp shifts.
// Restricted to d <= 3.
KlReport kl_bound_check(const std::function<double(const Eigen::VectorXd&)>& u_exact,
                        const std::function<double(const Eigen::VectorXd&)>& u_approx,
                        const DomainBox& domain, int probe_resolution,
                        int quadrature_resolution, int random_probes = 10000,
                        std::uint64_t seed = 20240101);

}  // namespace gridhmc
