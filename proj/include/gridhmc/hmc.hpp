#pragma once

#include <Eigen/Core>
#include <atomic>
#include <cstdint>
#include <vector>

#include "gridhmc/model.hpp"
#include "gridhmc/rng.hpp"

namespace gridhmc {

// Force field used inside the leapfrog loop: exact, grid lookup, or sparse
// grid interpolant gradient. Providers must return a finite vector for any
// finite q (approximate providers fall back to the exact force outside their
// domain of interest and count how often that happens).
class ForceProvider {
 public:
  virtual ~ForceProvider() = default;
  virtual Eigen::VectorXd force(const Eigen::VectorXd& q) const = 0;
  virtual std::uint64_t fallback_count() const { return 0; }
  virtual void reset_fallback_count() const {}
};

// Potential energy used in the Metropolis correction: exact U for samplers
// that target the exact posterior, approximate U-tilde for the *-complete
// variants.
class EnergyProvider {
 public:
  virtual ~EnergyProvider() = default;
  virtual double energy(const Eigen::VectorXd& q) const = 0;
};

class ExactForce final : public ForceProvider {
 public:
  explicit ExactForce(const PotentialModel& model) : model_(&model) {}
  Eigen::VectorXd force(const Eigen::VectorXd& q) const override { return model_->force(q); }

 private:
  const PotentialModel* model_;
};

class ExactEnergy final : public EnergyProvider {
 public:
  explicit ExactEnergy(const PotentialModel& model) : model_(&model) {}
  double energy(const Eigen::VectorXd& q) const override { return model_->potential(q); }

 private:
  const PotentialModel* model_;
};

struct HmcConfig {
  double step_size = 0.1;
  int leapfrog_steps = 10;
  int iterations = 1000;  // kept samples
  int burn_in = 0;
  Eigen::VectorXd mass_diag;  // empty = identity
  std::uint64_t seed = 0;
  bool record_burnin_trajectory = false;
  bool record_momenta = false;

  void validate(int dim) const;
};

struct ChainState {
  Eigen::VectorXd q;
  Eigen::VectorXd p;
};

struct ChainResult {
  Eigen::MatrixXd samples;             // iterations x dim, post burn-in
  std::vector<std::uint8_t> accepted;  // per kept iteration
  std::vector<double> delta_h;         // H(proposal) - H(current), per kept iteration
  std::vector<double> iter_seconds;    // wall time per kept iteration
  double sampling_seconds = 0.0;       // sum of iter_seconds
  double total_seconds = 0.0;          // including burn-in
  std::uint64_t force_fallbacks = 0;
  std::vector<Eigen::VectorXd> burnin_trajectory;  // leapfrog positions, burn-in only
  Eigen::MatrixXd momenta;  // (burn_in + iterations) x dim when recorded

  double acceptance_rate() const;
};

// H(q, p) = U + p^T M^{-1} p / 2 with a dense mass matrix. Throws on a
// non-SPD mass.
double hamiltonian(double u_value, const Eigen::VectorXd& p, const Eigen::MatrixXd& mass);

struct LeapfrogResult {
  ChainState state;
  bool diverged = false;
};

// L half-kick / drift / half-kick steps. inv_mass_diag holds 1/M_kk.
LeapfrogResult leapfrog(ChainState state, double step_size, int steps,
                        const ForceProvider& force, const Eigen::VectorXd& inv_mass_diag);

// Records leapfrog positions (start plus every drift) into `visited`.
LeapfrogResult leapfrog_traced(ChainState state, double step_size, int steps,
                               const ForceProvider& force,
                               const Eigen::VectorXd& inv_mass_diag,
                               std::vector<Eigen::VectorXd>* visited);

// u < min(1, exp(h_old - h_new)); a non-finite proposal energy always rejects.
bool metropolis_accept(double h_old, double h_new, double u);

// Algorithm shared by all samplers: per iteration, resample momentum
// (dim normal draws), simulate the trajectory with `force`, draw one uniform,
// and accept with the correction energy from `energy`. The fixed draw order
// makes chains with equal seeds consume identical random streams across
// providers.
ChainResult sample(const HmcConfig& config, const ForceProvider& force,
                   const EnergyProvider& energy, const Eigen::VectorXd& q1);

}  // namespace gridhmc
