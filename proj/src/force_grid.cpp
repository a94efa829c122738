#include "gridhmc/force_grid.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gridhmc/parallel.hpp"

namespace gridhmc {

namespace {

using json = nlohmann::json;

Eigen::Index product_plus(const std::vector<int>& cells, int extra) {
  Eigen::Index n = 1;
  for (int c : cells) n *= c + extra;
  return n;
}

// Decodes a flat row-major index (last axis fastest) into a multi-index.
std::vector<int> unflatten(Eigen::Index flat, const std::vector<int>& sizes) {
  std::vector<int> idx(sizes.size());
  for (int k = static_cast<int>(sizes.size()) - 1; k >= 0; --k) {
    idx[k] = static_cast<int>(flat % sizes[k]);
    flat /= sizes[k];
  }
  return idx;
}

}  // namespace

ForceGrid::ForceGrid(DomainBox domain, std::vector<int> cells_per_axis, Eigen::MatrixXd values,
                     Eigen::VectorXd vertex_potential)
    : domain_(std::move(domain)),
      cells_(std::move(cells_per_axis)),
      values_(std::move(values)),
      vertex_potential_(std::move(vertex_potential)) {
  domain_.validate();
  if (static_cast<int>(cells_.size()) != domain_.dim())
    throw ValidationError("force grid: cells/domain dimension mismatch");
  for (int c : cells_)
    if (c < 1) throw ValidationError("force grid: cells per axis must be >= 1");
  delta_ = domain_.widths();
  for (int k = 0; k < domain_.dim(); ++k) delta_[k] /= cells_[k];
  if (values_.rows() != product_plus(cells_, 0) || values_.cols() != domain_.dim())
    throw ValidationError("force grid: values table has the wrong shape");
  if (!values_.allFinite()) throw ValidationError("force grid: values table has non-finite entries");
  if (vertex_potential_.size() > 0 && vertex_potential_.size() != product_plus(cells_, 1))
    throw ValidationError("force grid: vertex potential table has the wrong length");
}

std::optional<std::vector<int>> ForceGrid::locate_cell(const Eigen::VectorXd& q) const {
  if (static_cast<int>(q.size()) != dim())
    throw ValidationError("force grid: query dimension mismatch");
  if (!domain_.contains(q)) return std::nullopt;
  std::vector<int> idx(dim());
  for (int k = 0; k < dim(); ++k) {
    int i = static_cast<int>(std::floor((q[k] - domain_.lo[k]) / delta_[k]));
    idx[k] = std::min(std::max(i, 0), cells_[k] - 1);  // q = hi lands in the last cell
  }
  return idx;
}

Eigen::Index ForceGrid::flat_index(const std::vector<int>& idx) const {
  Eigen::Index flat = 0;
  for (int k = 0; k < dim(); ++k) flat = flat * cells_[k] + idx[k];
  return flat;
}

Eigen::VectorXd ForceGrid::cell_center(const std::vector<int>& idx) const {
  Eigen::VectorXd c(dim());
  for (int k = 0; k < dim(); ++k) c[k] = domain_.lo[k] + (idx[k] + 0.5) * delta_[k];
  return c;
}

Eigen::Index ForceGrid::vertex_flat_index(const std::vector<int>& idx) const {
  Eigen::Index flat = 0;
  for (int k = 0; k < dim(); ++k) flat = flat * (cells_[k] + 1) + idx[k];
  return flat;
}

Eigen::VectorXd ForceGrid::vertex_coord(const std::vector<int>& idx) const {
  Eigen::VectorXd v(dim());
  for (int k = 0; k < dim(); ++k) v[k] = domain_.lo[k] + idx[k] * delta_[k];
  return v;
}

double ForceGrid::interpolated_potential(const Eigen::VectorXd& q) const {
  if (!has_vertex_potential())
    throw ValidationError("force grid: no vertex potential table was built");
  const auto cell = locate_cell(q);
  if (!cell) throw ValidationError("force grid: interpolated_potential called out of domain");

  // Local coordinates in [0,1]^d within the cell, then the 2^d corner blend.
  Eigen::VectorXd t(dim());
  for (int k = 0; k < dim(); ++k) {
    const double lo = domain_.lo[k] + (*cell)[k] * delta_[k];
    t[k] = (q[k] - lo) / delta_[k];
  }
  double value = 0.0;
  const int corners = 1 << dim();
  std::vector<int> vidx(dim());
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    for (int k = 0; k < dim(); ++k) {
      const int bit = (c >> k) & 1;
      w *= bit ? t[k] : 1.0 - t[k];
      vidx[k] = (*cell)[k] + bit;
    }
    if (w != 0.0) value += w * vertex_potential_[vertex_flat_index(vidx)];
  }
  return value;
}

ForceGrid build_force_map(const PotentialModel& model, const DomainBox& domain,
                          const std::vector<int>& cells_per_axis,
                          const ForceGridBuildOptions& options) {
  domain.validate();
  if (static_cast<int>(cells_per_axis.size()) != domain.dim())
    throw ValidationError("force grid: cells/domain dimension mismatch");
  for (int c : cells_per_axis)
    if (c < 1) throw ValidationError("force grid: cells per axis must be >= 1");

  const int d = domain.dim();
  Eigen::VectorXd delta = domain.widths();
  for (int k = 0; k < d; ++k) delta[k] /= cells_per_axis[k];

  const Eigen::Index n_cells = product_plus(cells_per_axis, 0);
  Eigen::MatrixXd values(n_cells, d);
  parallel_over(n_cells, options.threads, [&](Eigen::Index flat) {
    const auto idx = unflatten(flat, cells_per_axis);
    Eigen::VectorXd center(d);
    for (int k = 0; k < d; ++k) center[k] = domain.lo[k] + (idx[k] + 0.5) * delta[k];
    Eigen::VectorXd f;
    try {
      f = model.force(center);
    } catch (const std::exception& e) {
      throw NumericalError("force map build failed at cell " + std::to_string(flat) + ": " +
                           e.what());
    }
    if (!f.allFinite())
      throw NumericalError("force map build: non-finite force at cell " + std::to_string(flat));
    values.row(flat) = f.transpose();
  });

  Eigen::VectorXd vertex;
  if (options.with_vertex_potential) {
    std::vector<int> vertex_sizes(cells_per_axis);
    for (int& v : vertex_sizes) ++v;
    vertex.resize(product_plus(cells_per_axis, 1));
    parallel_over(vertex.size(), options.threads, [&](Eigen::Index flat) {
      const auto idx = unflatten(flat, vertex_sizes);
      Eigen::VectorXd x(d);
      for (int k = 0; k < d; ++k) x[k] = domain.lo[k] + idx[k] * delta[k];
      vertex[flat] = model.potential(x);
    });
    if (!vertex.allFinite())
      throw NumericalError("force map build: non-finite potential at a vertex");
  }

  return ForceGrid(domain, cells_per_axis, std::move(values), std::move(vertex));
}

Eigen::VectorXd lookup_force(const ForceGrid& grid, const PotentialModel& model,
                             const Eigen::VectorXd& q) {
  if (auto idx = grid.locate_cell(q)) return grid.stored_force(grid.flat_index(*idx));
  return model.force(q);
}

void save_force_grid(const ForceGrid& grid, const std::string& model_fingerprint,
                     const std::string& path) {
  json doc;
  doc["format_version"] = 1;
  doc["model_fingerprint"] = model_fingerprint;
  doc["domain"] = {{"lo", std::vector<double>(grid.domain().lo.begin(), grid.domain().lo.end())},
                   {"hi", std::vector<double>(grid.domain().hi.begin(), grid.domain().hi.end())},
                   {"provenance", to_string(grid.domain().provenance)},
                   {"param", grid.domain().param}};
  doc["cells"] = grid.cells();
  std::vector<double> flat(grid.values().size());
  for (Eigen::Index r = 0; r < grid.values().rows(); ++r)
    for (Eigen::Index c = 0; c < grid.values().cols(); ++c)
      flat[static_cast<size_t>(r * grid.values().cols() + c)] = grid.values()(r, c);
  doc["values"] = flat;
  if (grid.has_vertex_potential())
    doc["vertex_potential"] = std::vector<double>(grid.vertex_potential().begin(),
                                                  grid.vertex_potential().end());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write grid cache: " + path);
  out << doc.dump();
}

namespace {

const json& require_field(const json& doc, const char* name, const char* what) {
  auto it = doc.find(name);
  if (it == doc.end())
    throw ValidationError(std::string(what) + ": missing field '" + name + "'");
  return *it;
}

}  // namespace

ForceGrid load_force_grid(const std::string& path, const std::string& expected_fingerprint) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open grid cache: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ValidationError("grid cache " + path + ": invalid json: " + e.what());
  }
  const char* what = "grid cache";
  try {
    if (require_field(doc, "format_version", what).get<int>() != 1)
      throw ValidationError("grid cache: unsupported field 'format_version'");
    const std::string fp = require_field(doc, "model_fingerprint", what).get<std::string>();
    if (!expected_fingerprint.empty() && fp != expected_fingerprint)
      throw ValidationError("grid cache: field 'model_fingerprint' does not match the model (" +
                            fp + " vs " + expected_fingerprint + ")");
    const json& dom = require_field(doc, "domain", what);
    DomainBox box;
    const auto lo = require_field(dom, "lo", "grid cache domain").get<std::vector<double>>();
    const auto hi = require_field(dom, "hi", "grid cache domain").get<std::vector<double>>();
    box.lo = Eigen::Map<const Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size()));
    box.hi = Eigen::Map<const Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size()));
    box.provenance = box_provenance_from_string(
        require_field(dom, "provenance", "grid cache domain").get<std::string>());
    box.param = require_field(dom, "param", "grid cache domain").get<double>();

    const auto cells = require_field(doc, "cells", what).get<std::vector<int>>();
    const auto flat = require_field(doc, "values", what).get<std::vector<double>>();
    Eigen::Index n_cells = 1;
    for (int c : cells) n_cells *= c;
    const int d = box.dim();
    if (static_cast<Eigen::Index>(flat.size()) != n_cells * d)
      throw ValidationError("grid cache: field 'values' has the wrong length");
    Eigen::MatrixXd values(n_cells, d);
    for (Eigen::Index r = 0; r < n_cells; ++r)
      for (int c = 0; c < d; ++c) values(r, c) = flat[static_cast<size_t>(r * d + c)];

    Eigen::VectorXd vertex;
    if (doc.contains("vertex_potential")) {
      const auto v = doc["vertex_potential"].get<std::vector<double>>();
      vertex = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    return ForceGrid(box, cells, std::move(values), std::move(vertex));
  } catch (const json::exception& e) {
    throw ValidationError("grid cache " + path + ": malformed field: " + e.what());
  }
}

}  // namespace gridhmc
