#include "gridhmc/approx_energy.hpp"

#include <cmath>

#include "gridhmc/rng.hpp"

namespace gridhmc {

VertexEnergy::VertexEnergy(const ForceGrid& grid, const PotentialModel& model)
    : grid_(&grid), model_(&model) {
  if (!grid.has_vertex_potential())
    throw ValidationError("vertex energy: the grid was built without a vertex potential table");
}

namespace {

// Walks a lattice with `res + 1` points per axis, calling fn(point, trapezoid
// weight in index space).
void for_each_lattice(const DomainBox& box, int res,
                      const std::function<void(const Eigen::VectorXd&, double)>& fn) {
  const int d = box.dim();
  std::vector<int> idx(d, 0);
  Eigen::VectorXd x(d);
  while (true) {
    double w = 1.0;
    for (int k = 0; k < d; ++k) {
      x[k] = box.lo[k] + (box.hi[k] - box.lo[k]) * idx[k] / res;
      if (idx[k] == 0 || idx[k] == res) w *= 0.5;
    }
    fn(x, w);
    int k = d - 1;
    while (k >= 0 && ++idx[k] > res) idx[k--] = 0;
    if (k < 0) break;
  }
}

}  // namespace

KlReport kl_bound_check(const std::function<double(const Eigen::VectorXd&)>& u_exact,
                        const std::function<double(const Eigen::VectorXd&)>& u_approx,
                        const DomainBox& domain, int probe_resolution,
                        int quadrature_resolution, int random_probes, std::uint64_t seed) {
  domain.validate();
  const int d = domain.dim();
  if (d > 3) throw ValidationError("kl_bound_check: quadrature is limited to d <= 3");
  if (probe_resolution < 1 || quadrature_resolution < 2)
    throw ValidationError("kl_bound_check: resolutions too small");

  KlReport report;
  report.probe_resolution = probe_resolution;
  report.quadrature_resolution = quadrature_resolution;
  report.random_probes = random_probes;

  // Probe pass: lattice plus random interior points.
  double sup = 0.0;
  for_each_lattice(domain, probe_resolution, [&](const Eigen::VectorXd& x, double) {
    sup = std::max(sup, std::abs(u_exact(x) - u_approx(x)));
  });
  ChainRng rng(seed);
  Eigen::VectorXd x(d);
  for (int i = 0; i < random_probes; ++i) {
    for (int k = 0; k < d; ++k) x[k] = domain.lo[k] + rng.uniform() * (domain.hi[k] - domain.lo[k]);
    sup = std::max(sup, std::abs(u_exact(x) - u_approx(x)));
  }
  report.sup_diff = sup;
  report.bound = 2.0 * sup;

  // Quadrature pass. Densities are normalized on the box; both energies are
  // shifted by the same amount so exponentials stay in range.
  std::vector<double> us, vs, ws;
  for_each_lattice(domain, quadrature_resolution, [&](const Eigen::VectorXd& p, double w) {
    us.push_back(u_exact(p));
    vs.push_back(u_approx(p));
    ws.push_back(w);
  });
  const double shift_u = *std::min_element(us.begin(), us.end());
  const double shift_v = *std::min_element(vs.begin(), vs.end());
  double z_p = 0.0, z_q = 0.0, cross = 0.0;
  for (size_t i = 0; i < us.size(); ++i) {
    const double pw = ws[i] * std::exp(-(us[i] - shift_u));
    z_p += pw;
    z_q += ws[i] * std::exp(-(vs[i] - shift_v));
    cross += pw * (vs[i] - us[i]);
  }
  if (!(z_p > 0.0) || !(z_q > 0.0) || !std::isfinite(z_p) || !std::isfinite(z_q))
    throw NumericalError("kl_bound_check: quadrature underflowed or diverged");
  // D_KL = E_P[V - U] + ln I_Q - ln I_P, cell volumes cancelling in the ratio.
  report.kl_estimate = cross / z_p + (std::log(z_q) - shift_v) - (std::log(z_p) - shift_u);
  if (!std::isfinite(report.kl_estimate))
    throw NumericalError("kl_bound_check: non-finite divergence estimate");
  return report;
}

}  // namespace gridhmc
