#pragma once

#include <Eigen/Core>
#include <vector>

#include "gridhmc/domain_box.hpp"
#include "gridhmc/model.hpp"

namespace gridhmc {

// Gaussian approximation N(mode, hessian^{-1}) at the posterior mode.
struct LaplaceFit {
  Eigen::VectorXd mode;
  Eigen::MatrixXd hessian;
  Eigen::MatrixXd covariance;
};

// Standard normal quantile; p in (0, 1).
double normal_quantile(double p);

// Standard normal CDF.
double normal_cdf(double x);

// Quasi-Newton minimization of U starting from q0 until the force sup-norm
// drops below tol, then a finite-difference Hessian of the analytic force at
// the minimizer. Throws NumericalError on non-convergence or an indefinite
// Hessian (saddle/ridge). u_history, when given, records U after every
// accepted step.
LaplaceFit find_mode(const PotentialModel& model, const Eigen::VectorXd& q0, double tol = 1e-8,
                     int max_iters = 200, std::vector<double>* u_history = nullptr);

// Axis-aligned box mode_k +- z * sd_k with per-axis coverage p^(1/d), so the
// product of marginal coverages is at least p under independence.
DomainBox laplace_box(const LaplaceFit& fit, double coverage);

// Componentwise hull of visited leapfrog positions, expanded by
// padding * range per side.
DomainBox trajectory_box(const std::vector<Eigen::VectorXd>& points, double padding);

// Union-bound lower estimate of the fit's probability mass inside the box.
double laplace_mass_lower_bound(const LaplaceFit& fit, const DomainBox& box);

}  // namespace gridhmc
