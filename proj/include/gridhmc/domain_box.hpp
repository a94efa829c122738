#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>

#include "gridhmc/errors.hpp"

namespace gridhmc {

enum class BoxProvenance { Manual, Laplace, Trajectory };

inline std::string to_string(BoxProvenance p) {
  switch (p) {
    case BoxProvenance::Laplace:
      return "laplace";
    case BoxProvenance::Trajectory:
      return "trajectory";
    default:
      return "manual";
  }
}

inline BoxProvenance box_provenance_from_string(const std::string& s) {
  if (s == "laplace") return BoxProvenance::Laplace;
  if (s == "trajectory") return BoxProvenance::Trajectory;
  if (s == "manual") return BoxProvenance::Manual;
  throw ValidationError("unknown domain provenance: " + s);
}

// Axis-aligned domain of interest D. Finite, lo < hi per axis.
struct DomainBox {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  BoxProvenance provenance = BoxProvenance::Manual;
  double param = 0.0;  // coverage p (laplace) or padding fraction (trajectory)

  int dim() const { return static_cast<int>(lo.size()); }

  Eigen::VectorXd widths() const { return hi - lo; }

  bool contains(const Eigen::VectorXd& q) const {
    for (int k = 0; k < dim(); ++k) {
      if (!(q[k] >= lo[k] && q[k] <= hi[k])) return false;
    }
    return true;
  }

  Eigen::VectorXd to_unit(const Eigen::VectorXd& q) const {
    return (q - lo).cwiseQuotient(hi - lo);
  }

  Eigen::VectorXd from_unit(const Eigen::VectorXd& u) const {
    return lo + u.cwiseProduct(hi - lo);
  }

  void validate() const {
    if (lo.size() == 0 || lo.size() != hi.size())
      throw ValidationError("domain box: lo/hi dimension mismatch");
    for (int k = 0; k < dim(); ++k) {
      if (!std::isfinite(lo[k]) || !std::isfinite(hi[k]) || !(lo[k] < hi[k]))
        throw ValidationError("domain box: needs finite lo < hi on every axis");
    }
  }
};

}  // namespace gridhmc
