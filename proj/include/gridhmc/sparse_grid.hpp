#pragma once

#include <Eigen/Core>
#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gridhmc/domain_box.hpp"
#include "gridhmc/hmc.hpp"
#include "gridhmc/model.hpp"

namespace gridhmc {

// -------------------------------------------------------- node hierarchy
//
// Nested univariate node family on [0,1]: one point (0.5) at level 1, then
// m_i = 2^{i-1} + 1 equidistant points at level i. Basis functions are the
// piecewise linear hats of width 1/(m_i - 1); the level-1 basis is the
// constant 1.

// Node count m_i.
int cc_node_count(int level);

// Sorted node coordinates of level `level`.
std::vector<double> cc_nodes(int level);

// Number of nodes new at `level` (not present at level-1).
int cc_new_node_count(int level);

// Coordinate of the t-th new node of `level`, t in [0, cc_new_node_count).
double cc_new_node(int level, int t);

// Hat function value for the j-th node (1-based, full nodal indexing) of
// `level` at x in [0,1].
double basis_eval(int level, int j, double x);

// At any x, at most one basis within a level's new-node set is non-zero.
// basis_point resolves which one, with its value and the one-sided slope
// used for gradients (left derivative at kinks; right derivative at x = 0).
struct BasisPoint {
  int t;         // new-node index within the level
  double value;  // hat value, >= 0
  double slope;  // d(hat)/dx under the kink convention
};
BasisPoint basis_point(int level, double x);

// Deduplicated sparse grid H_{q,d} (union over q-d+1 <= |i| <= q of the
// tensor grids), points in [0,1]^d, lexicographically sorted.
std::vector<Eigen::VectorXd> sparse_grid_points(int q, int d);

// ------------------------------------------------------------ interpolant

// Smolyak interpolant A_{q,d}(f) in hierarchical-surplus form, affinely
// mapped onto a domain box. Immutable once built.
class SparseInterpolant {
 public:
  struct Block {
    std::vector<int> levels;      // multi-level i, |i| <= q
    Eigen::VectorXd surplus;      // dense over new-node multi-indices, last axis fastest
  };

  SparseInterpolant(DomainBox domain, std::vector<Block> blocks);

  int dim() const { return domain_.dim(); }
  const DomainBox& domain() const { return domain_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  int max_level_sum() const { return max_level_sum_; }       // q of A_{q,d}
  int depth() const { return max_level_sum_ - dim(); }       // k = q - d
  Eigen::Index node_count() const;

  // max |surplus| over the deepest committed level sum; the builder's
  // stopping statistic and a usable error scale.
  double error_estimate() const;

  double value(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;

  // Unit-cube evaluations (used by the builder and tests).
  double value_unit(const Eigen::VectorXd& u) const;
  Eigen::VectorXd gradient_unit(const Eigen::VectorXd& u) const;

 private:
  void check_domain(const Eigen::VectorXd& x) const;

  DomainBox domain_;
  std::vector<Block> blocks_;
  int max_level_sum_ = 0;
};

struct SparseBuildOptions {
  int max_depth = 6;                 // build up to |i| = d + max_depth
  std::optional<double> tolerance;   // stop when max |new surplus| drops below;
                                     // default 1e-3 * (f range over the first two depths)
  int threads = 1;
};

// Builds A(f) on the box, depth by depth, evaluating f exactly once per
// distinct grid point. Several outputs can share the node evaluations; the
// stopping rule uses the max surplus across outputs.
std::vector<SparseInterpolant> build_interpolants(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f, int outputs,
    const DomainBox& domain, const SparseBuildOptions& options = {});

SparseInterpolant build_interpolant(const std::function<double(const Eigen::VectorXd&)>& f,
                                    const DomainBox& domain,
                                    const SparseBuildOptions& options = {});

void save_interpolant(const SparseInterpolant& interp, const std::string& model_fingerprint,
                      const std::string& path);

SparseInterpolant load_interpolant(const std::string& path,
                                   const std::string& expected_fingerprint);

// ---------------------------------------------------------------- provider

// Force provider for Sparse Grid HMC. Default mode differentiates one scalar
// interpolant of U (a conservative field); the per-component mode reads d
// interpolants of the force components instead.
class SparseGridForce final : public ForceProvider {
 public:
  SparseGridForce(const SparseInterpolant& potential_interp, const PotentialModel& model)
      : potential_(&potential_interp), model_(&model) {}

  SparseGridForce(const std::vector<SparseInterpolant>* component_interps,
                  const PotentialModel& model)
      : components_(component_interps), model_(&model) {}

  Eigen::VectorXd force(const Eigen::VectorXd& q) const override;

  std::uint64_t fallback_count() const override { return fallbacks_.load(); }
  void reset_fallback_count() const override { fallbacks_.store(0); }

 private:
  const SparseInterpolant* potential_ = nullptr;
  const std::vector<SparseInterpolant>* components_ = nullptr;
  const PotentialModel* model_;
  mutable std::atomic<std::uint64_t> fallbacks_{0};
};

}  // namespace gridhmc
