#pragma once

#include <Eigen/Core>
#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gridhmc/domain_box.hpp"
#include "gridhmc/hmc.hpp"
#include "gridhmc/model.hpp"

namespace gridhmc {

// Piecewise-constant force map: the exact force evaluated once at every cell
// center of a regular partition of the domain of interest. Immutable after
// build; lookups are plain table reads.
class ForceGrid {
 public:
  ForceGrid(DomainBox domain, std::vector<int> cells_per_axis, Eigen::MatrixXd values,
            Eigen::VectorXd vertex_potential = {});

  const DomainBox& domain() const { return domain_; }
  const std::vector<int>& cells() const { return cells_; }
  const Eigen::VectorXd& deltas() const { return delta_; }
  int dim() const { return domain_.dim(); }
  Eigen::Index cell_count() const { return values_.rows(); }

  // Cell membership: [x_{i-1}, x_i) per axis, boundary points belong to the
  // higher cell, q = hi maps to the last cell. Out-of-domain -> nullopt.
  std::optional<std::vector<int>> locate_cell(const Eigen::VectorXd& q) const;

  Eigen::Index flat_index(const std::vector<int>& idx) const;
  Eigen::VectorXd cell_center(const std::vector<int>& idx) const;
  Eigen::VectorXd stored_force(Eigen::Index flat) const { return values_.row(flat); }
  const Eigen::MatrixXd& values() const { return values_; }

  bool has_vertex_potential() const { return vertex_potential_.size() > 0; }
  const Eigen::VectorXd& vertex_potential() const { return vertex_potential_; }
  Eigen::VectorXd vertex_coord(const std::vector<int>& idx) const;
  Eigen::Index vertex_flat_index(const std::vector<int>& idx) const;

  // Multilinear interpolation of the vertex potential table at an in-domain
  // point. Requires the table; continuous across cell boundaries.
  double interpolated_potential(const Eigen::VectorXd& q) const;

 private:
  DomainBox domain_;
  std::vector<int> cells_;
  Eigen::VectorXd delta_;
  Eigen::MatrixXd values_;            // cell_count x dim, row-major cell order
  Eigen::VectorXd vertex_potential_;  // prod(cells+1) entries when present
};

struct ForceGridBuildOptions {
  bool with_vertex_potential = false;
  int threads = 1;
};

// Evaluates the model force at every cell center (and U at every vertex when
// requested). Deterministic and schedule-independent: entries are computed
// independently and written to disjoint slots.
ForceGrid build_force_map(const PotentialModel& model, const DomainBox& domain,
                          const std::vector<int>& cells_per_axis,
                          const ForceGridBuildOptions& options = {});

// In-domain: the stored center value. Out-of-domain: the model's exact force.
Eigen::VectorXd lookup_force(const ForceGrid& grid, const PotentialModel& model,
                             const Eigen::VectorXd& q);

void save_force_grid(const ForceGrid& grid, const std::string& model_fingerprint,
                     const std::string& path);

// Verifies format and, when expected_fingerprint is non-empty, the model
// fingerprint recorded in the file.
ForceGrid load_force_grid(const std::string& path, const std::string& expected_fingerprint);

// Grid-backed force provider with exact-force fallback outside the domain.
class GridForce final : public ForceProvider {
 public:
  GridForce(const ForceGrid& grid, const PotentialModel& model)
      : grid_(&grid), model_(&model) {}

  Eigen::VectorXd force(const Eigen::VectorXd& q) const override {
    if (auto idx = grid_->locate_cell(q)) return grid_->stored_force(grid_->flat_index(*idx));
    fallbacks_.fetch_add(1, std::memory_order_relaxed);
    return model_->force(q);
  }

  std::uint64_t fallback_count() const override { return fallbacks_.load(); }
  void reset_fallback_count() const override { fallbacks_.store(0); }

 private:
  const ForceGrid* grid_;
  const PotentialModel* model_;
  mutable std::atomic<std::uint64_t> fallbacks_{0};
};

}  // namespace gridhmc
