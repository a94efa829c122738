#include "gridhmc/domain_finder.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace gridhmc {

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("normal_quantile: p must be in (0,1)");
  // Acklam's rational approximation, then one Halley step against erfc.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double r = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
        ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double r = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
        ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
  }
  const double err = normal_cdf(x) - p;
  const double step = err * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - step / (1.0 + 0.5 * x * step);
}

LaplaceFit find_mode(const PotentialModel& model, const Eigen::VectorXd& q0, double tol,
                     int max_iters, std::vector<double>* u_history) {
  if (!q0.allFinite()) throw ValidationError("find_mode: starting point must be finite");
  const int d = model.dim();
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(d, d);

  Eigen::VectorXd q = q0;
  double u = model.potential(q);
  Eigen::VectorXd grad = -model.force(q);
  if (u_history) u_history->push_back(u);

  Eigen::MatrixXd h_inv = identity;
  for (int it = 0; it < max_iters && grad.lpNorm<Eigen::Infinity>() >= tol; ++it) {
    Eigen::VectorXd dir = -(h_inv * grad);
    double slope = grad.dot(dir);
    if (!(slope < 0.0)) {  // lost positive definiteness; restart from steepest descent
      h_inv = identity;
      dir = -grad;
      slope = grad.dot(dir);
    }
    // Armijo backtracking keeps U strictly decreasing across accepted steps.
    double step = 1.0;
    Eigen::VectorXd q_next;
    double u_next = u;
    bool accepted = false;
    for (int half = 0; half < 60; ++half) {
      q_next = q + step * dir;
      u_next = model.potential(q_next);
      if (std::isfinite(u_next) && u_next <= u + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) throw NumericalError("find_mode: line search failed to decrease U");

    const Eigen::VectorXd grad_next = -model.force(q_next);
    const Eigen::VectorXd s = q_next - q;
    const Eigen::VectorXd y = grad_next - grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const Eigen::MatrixXd v = identity - s * y.transpose() / sy;
      h_inv = v * h_inv * v.transpose() + s * s.transpose() / sy;
    }
    q = q_next;
    u = u_next;
    grad = grad_next;
    if (u_history) u_history->push_back(u);
  }
  if (grad.lpNorm<Eigen::Infinity>() >= tol)
    throw NumericalError("find_mode: no convergence within max_iters");

  // Hessian of U by central differences of the analytic force.
  const double h = 1e-4;
  Eigen::MatrixXd hess(d, d);
  for (int k = 0; k < d; ++k) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
    e[k] = h;
    hess.col(k) = -(model.force(q + e) - model.force(q - e)) / (2.0 * h);
  }
  hess = (0.5 * (hess + hess.transpose())).eval();

  Eigen::LLT<Eigen::MatrixXd> llt(hess);
  if (llt.info() != Eigen::Success)
    throw NumericalError("find_mode: Hessian at the mode is not positive definite (saddle or ridge)");

  LaplaceFit fit;
  fit.mode = std::move(q);
  fit.hessian = std::move(hess);
  fit.covariance = llt.solve(identity);
  return fit;
}

DomainBox laplace_box(const LaplaceFit& fit, double coverage) {
  if (!(coverage > 0.0 && coverage < 1.0))
    throw ValidationError("laplace_box: coverage must be in (0,1)");
  const int d = static_cast<int>(fit.mode.size());
  const double per_axis = std::pow(coverage, 1.0 / d);
  const double z = normal_quantile(0.5 * (1.0 + per_axis));
  DomainBox box;
  box.lo.resize(d);
  box.hi.resize(d);
  for (int k = 0; k < d; ++k) {
    const double sd = std::sqrt(fit.covariance(k, k));
    if (!(sd > 0.0) || !std::isfinite(sd))
      throw NumericalError("laplace_box: singular covariance");
    box.lo[k] = fit.mode[k] - z * sd;
    box.hi[k] = fit.mode[k] + z * sd;
  }
  box.provenance = BoxProvenance::Laplace;
  box.param = coverage;
  box.validate();
  return box;
}

DomainBox trajectory_box(const std::vector<Eigen::VectorXd>& points, double padding) {
  if (points.size() < 2) throw ValidationError("trajectory_box: need at least two points");
  if (padding < 0.0) throw ValidationError("trajectory_box: padding must be >= 0");
  const int d = static_cast<int>(points.front().size());
  Eigen::VectorXd lo = points.front(), hi = points.front();
  for (const auto& p : points) {
    if (static_cast<int>(p.size()) != d)
      throw ValidationError("trajectory_box: inconsistent point dimensions");
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  for (int k = 0; k < d; ++k)
    if (!(lo[k] < hi[k]))
      throw ValidationError("trajectory_box: points are degenerate on axis " + std::to_string(k));
  const Eigen::VectorXd range = hi - lo;
  DomainBox box;
  box.lo = lo - padding * range;
  box.hi = hi + padding * range;
  box.provenance = BoxProvenance::Trajectory;
  box.param = padding;
  box.validate();
  return box;
}

double laplace_mass_lower_bound(const LaplaceFit& fit, const DomainBox& box) {
  double tail = 0.0;
  for (int k = 0; k < box.dim(); ++k) {
    const double sd = std::sqrt(fit.covariance(k, k));
    tail += normal_cdf((box.lo[k] - fit.mode[k]) / sd);
    tail += 1.0 - normal_cdf((box.hi[k] - fit.mode[k]) / sd);
  }
  return 1.0 - tail;
}

}  // namespace gridhmc
