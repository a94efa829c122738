#include "gridhmc/hmc.hpp"

#include <Eigen/Cholesky>
#include <chrono>
#include <cmath>
#include <limits>

namespace gridhmc {

namespace {

// Divergence guard: reject trajectories whose energy error exceeds this.
constexpr double kMaxEnergyError = 1000.0;

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

void HmcConfig::validate(int dim) const {
  if (!(step_size > 0.0)) throw ValidationError("hmc: step_size must be positive");
  if (leapfrog_steps < 1) throw ValidationError("hmc: leapfrog_steps must be >= 1");
  if (iterations < 1) throw ValidationError("hmc: iterations must be >= 1");
  if (burn_in < 0) throw ValidationError("hmc: burn_in must be >= 0");
  if (mass_diag.size() != 0) {
    if (static_cast<int>(mass_diag.size()) != dim)
      throw ValidationError("hmc: mass_diag dimension mismatch");
    if ((mass_diag.array() <= 0.0).any())
      throw ValidationError("hmc: mass_diag entries must be positive");
  }
}

double ChainResult::acceptance_rate() const {
  if (accepted.empty()) return 0.0;
  double n = 0.0;
  for (auto a : accepted) n += a ? 1.0 : 0.0;
  return n / static_cast<double>(accepted.size());
}

double hamiltonian(double u_value, const Eigen::VectorXd& p, const Eigen::MatrixXd& mass) {
  Eigen::LLT<Eigen::MatrixXd> llt(mass);
  if (llt.info() != Eigen::Success)
    throw NumericalError("hamiltonian: mass matrix is not positive definite");
  return u_value + 0.5 * p.dot(llt.solve(p));
}

LeapfrogResult leapfrog_traced(ChainState state, double step_size, int steps,
                               const ForceProvider& force,
                               const Eigen::VectorXd& inv_mass_diag,
                               std::vector<Eigen::VectorXd>* visited) {
  const double half = 0.5 * step_size;
  if (visited) visited->push_back(state.q);
  for (int l = 0; l < steps; ++l) {
    state.p += half * force.force(state.q);
    state.q += step_size * inv_mass_diag.cwiseProduct(state.p);
    if (!finite(state.q)) return {std::move(state), true};
    if (visited) visited->push_back(state.q);
    state.p += half * force.force(state.q);
    if (!finite(state.p)) return {std::move(state), true};
  }
  return {std::move(state), false};
}

LeapfrogResult leapfrog(ChainState state, double step_size, int steps,
                        const ForceProvider& force, const Eigen::VectorXd& inv_mass_diag) {
  return leapfrog_traced(std::move(state), step_size, steps, force, inv_mass_diag, nullptr);
}

bool metropolis_accept(double h_old, double h_new, double u) {
  if (std::isnan(h_new) || h_new == std::numeric_limits<double>::infinity()) return false;
  if (h_new <= h_old) return true;
  return u < std::exp(h_old - h_new);
}

ChainResult sample(const HmcConfig& config, const ForceProvider& force,
                   const EnergyProvider& energy, const Eigen::VectorXd& q1) {
  const int dim = static_cast<int>(q1.size());
  config.validate(dim);
  if (!finite(q1)) throw ValidationError("hmc: starting position must be finite");

  Eigen::VectorXd mass = config.mass_diag.size() ? config.mass_diag
                                                 : Eigen::VectorXd::Ones(dim);
  const Eigen::VectorXd inv_mass = mass.cwiseInverse();
  const Eigen::VectorXd mass_sqrt = mass.cwiseSqrt();

  ChainRng rng(config.seed);
  const int total = config.burn_in + config.iterations;

  ChainResult result;
  result.samples.resize(config.iterations, dim);
  result.accepted.assign(config.iterations, 0);
  result.delta_h.assign(config.iterations, 0.0);
  result.iter_seconds.assign(config.iterations, 0.0);
  if (config.record_momenta) result.momenta.resize(total, dim);

  force.reset_fallback_count();

  Eigen::VectorXd q = q1;
  double u_current = energy.energy(q);

  using clock = std::chrono::steady_clock;
  const auto run_start = clock::now();

  for (int t = 0; t < total; ++t) {
    const auto iter_start = clock::now();
    const bool warmup = t < config.burn_in;

    Eigen::VectorXd p = mass_sqrt.cwiseProduct(rng.normal_vector(dim));
    if (config.record_momenta) result.momenta.row(t) = p.transpose();

    const double kinetic = 0.5 * p.dot(inv_mass.cwiseProduct(p));
    const double h_old = u_current + kinetic;

    std::vector<Eigen::VectorXd>* trace = nullptr;
    if (warmup && config.record_burnin_trajectory) trace = &result.burnin_trajectory;
    LeapfrogResult traj =
        leapfrog_traced({q, p}, config.step_size, config.leapfrog_steps, force, inv_mass, trace);

    double h_new = std::numeric_limits<double>::infinity();
    double u_new = 0.0;
    if (!traj.diverged) {
      u_new = energy.energy(traj.state.q);
      const double k_new = 0.5 * traj.state.p.dot(inv_mass.cwiseProduct(traj.state.p));
      h_new = u_new + k_new;
      if (!std::isfinite(h_new) || std::abs(h_new - h_old) > kMaxEnergyError)
        h_new = std::numeric_limits<double>::infinity();
    }

    const double u_draw = rng.uniform();
    const bool accept = metropolis_accept(h_old, h_new, u_draw);
    if (accept) {
      q = traj.state.q;
      u_current = u_new;
    }

    const double seconds = std::chrono::duration<double>(clock::now() - iter_start).count();
    if (!warmup) {
      const int i = t - config.burn_in;
      result.samples.row(i) = q.transpose();
      result.accepted[i] = accept ? 1 : 0;
      result.delta_h[i] = h_new - h_old;
      result.iter_seconds[i] = seconds;
      result.sampling_seconds += seconds;
    }
  }

  result.total_seconds = std::chrono::duration<double>(clock::now() - run_start).count();
  result.force_fallbacks = force.fallback_count();
  return result;
}

}  // namespace gridhmc
