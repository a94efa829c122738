#pragma once

#include <Eigen/Core>
#include <atomic>
#include <cstdint>
#include <string>

#include "gridhmc/errors.hpp"

namespace gridhmc {

// A target posterior: potential energy U(q) = -log posterior + const and the
// exact force F(q) = -dU/dq. Models are immutable after construction and safe
// to share across threads; potential/force are pure functions of (model, q).
// Evaluation counters exist so cache reuse can be audited.
class PotentialModel {
 public:
  virtual ~PotentialModel() = default;

  virtual int dim() const = 0;

  // Identity of model type + parameters + data; used to validate cache files.
  virtual std::string fingerprint() const = 0;

  double potential(const Eigen::VectorXd& q) const {
    check_dim(q);
    potential_evals_.fetch_add(1, std::memory_order_relaxed);
    return potential_impl(q);
  }

  Eigen::VectorXd force(const Eigen::VectorXd& q) const {
    check_dim(q);
    force_evals_.fetch_add(1, std::memory_order_relaxed);
    return force_impl(q);
  }

  std::uint64_t potential_evals() const { return potential_evals_.load(); }
  std::uint64_t force_evals() const { return force_evals_.load(); }

 protected:
  PotentialModel() = default;
  // Copies start with fresh counters.
  PotentialModel(const PotentialModel&) noexcept {}
  PotentialModel& operator=(const PotentialModel&) noexcept { return *this; }

  virtual double potential_impl(const Eigen::VectorXd& q) const = 0;
  virtual Eigen::VectorXd force_impl(const Eigen::VectorXd& q) const = 0;

  void check_dim(const Eigen::VectorXd& q) const {
    if (static_cast<int>(q.size()) != dim())
      throw ValidationError("model expects dimension " + std::to_string(dim()) +
                            ", got " + std::to_string(q.size()));
  }

 private:
  mutable std::atomic<std::uint64_t> potential_evals_{0};
  mutable std::atomic<std::uint64_t> force_evals_{0};
};

}  // namespace gridhmc
