#include "gridhmc/sparse_grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "gridhmc/parallel.hpp"

namespace gridhmc {

namespace {

using json = nlohmann::json;

void check_level(int level) {
  if (level < 1 || level > 30)
    throw ValidationError("sparse grid: level out of range: " + std::to_string(level));
}

// All level vectors i >= 1 with |i| = total.
void for_each_composition(int d, int total, std::vector<int>& current,
                          const std::function<void(const std::vector<int>&)>& fn) {
  if (d == 1) {
    if (total >= 1) {
      current.push_back(total);
      fn(current);
      current.pop_back();
    }
    return;
  }
  for (int i = 1; i <= total - (d - 1); ++i) {
    current.push_back(i);
    for_each_composition(d - 1, total - i, current, fn);
    current.pop_back();
  }
}

double eval_blocks(const std::vector<SparseInterpolant::Block>& blocks, int d,
                   const Eigen::VectorXd& u) {
  double total = 0.0;
  for (const auto& b : blocks) {
    double prod = 1.0;
    Eigen::Index flat = 0;
    bool dead = false;
    for (int k = 0; k < d; ++k) {
      const BasisPoint bp = basis_point(b.levels[k], u[k]);
      if (bp.value == 0.0) {
        dead = true;
        break;
      }
      prod *= bp.value;
      flat = flat * cc_new_node_count(b.levels[k]) + bp.t;
    }
    if (!dead) total += b.surplus[flat] * prod;
  }
  return total;
}

}  // namespace

int cc_node_count(int level) {
  check_level(level);
  return level == 1 ? 1 : (1 << (level - 1)) + 1;
}

std::vector<double> cc_nodes(int level) {
  const int m = cc_node_count(level);
  if (m == 1) return {0.5};
  std::vector<double> nodes(m);
  for (int j = 0; j < m; ++j) nodes[j] = static_cast<double>(j) / (m - 1);
  return nodes;
}

int cc_new_node_count(int level) {
  check_level(level);
  if (level == 1) return 1;
  if (level == 2) return 2;
  return 1 << (level - 2);
}

double cc_new_node(int level, int t) {
  if (t < 0 || t >= cc_new_node_count(level))
    throw ValidationError("sparse grid: new-node index out of range");
  if (level == 1) return 0.5;
  if (level == 2) return t == 0 ? 0.0 : 1.0;
  return (2.0 * t + 1.0) * std::ldexp(1.0, 1 - level);
}

double basis_eval(int level, int j, double x) {
  const int m = cc_node_count(level);
  if (j < 1 || j > m) throw ValidationError("sparse grid: nodal index out of range");
  if (m == 1) return 1.0;
  const double node = static_cast<double>(j - 1) / (m - 1);
  const double v = 1.0 - (m - 1) * std::abs(x - node);
  return v > 0.0 ? v : 0.0;
}

BasisPoint basis_point(int level, double x) {
  check_level(level);
  if (level == 1) return {0, 1.0, 0.0};
  if (level == 2) {
    if (x <= 0.5) return {0, std::max(0.0, 1.0 - 2.0 * x), -2.0};
    return {1, 2.0 * x - 1.0, 2.0};
  }
  const double scale = std::ldexp(1.0, level - 1);  // m_i - 1
  const int n_new = 1 << (level - 2);
  const double u = x * scale;
  double tile = std::floor(0.5 * u);
  // Exactly on an interior even node: both neighbouring hats vanish; take the
  // left tile so the slope is the left derivative.
  if (u == 2.0 * tile && u > 0.0) tile -= 1.0;
  const int s = std::min(std::max(static_cast<int>(tile), 0), n_new - 1);
  const double dist = u - (2.0 * s + 1.0);
  const double value = std::max(0.0, 1.0 - std::abs(dist));
  return {s, value, dist <= 0.0 ? scale : -scale};
}

std::vector<Eigen::VectorXd> sparse_grid_points(int q, int d) {
  if (d < 1 || q < d) throw ValidationError("sparse grid: need q >= d >= 1");
  std::set<std::vector<double>> seen;
  std::vector<int> scratch;
  for (int total = std::max(d, q - d + 1); total <= q; ++total) {
    for_each_composition(d, total, scratch, [&](const std::vector<int>& levels) {
      std::vector<std::vector<double>> axes(d);
      for (int k = 0; k < d; ++k) axes[k] = cc_nodes(levels[k]);
      std::vector<size_t> idx(d, 0);
      while (true) {
        std::vector<double> pt(d);
        for (int k = 0; k < d; ++k) pt[k] = axes[k][idx[k]];
        seen.insert(std::move(pt));
        int k = d - 1;
        while (k >= 0 && ++idx[k] == axes[k].size()) idx[k--] = 0;
        if (k < 0) break;
      }
    });
  }
  std::vector<Eigen::VectorXd> out;
  out.reserve(seen.size());
  for (const auto& pt : seen)
    out.push_back(Eigen::Map<const Eigen::VectorXd>(pt.data(), d));
  return out;
}

// --------------------------------------------------------------- interpolant

SparseInterpolant::SparseInterpolant(DomainBox domain, std::vector<Block> blocks)
    : domain_(std::move(domain)), blocks_(std::move(blocks)) {
  domain_.validate();
  if (blocks_.empty()) throw ValidationError("sparse interpolant: no surplus records");
  for (const Block& b : blocks_) {
    if (static_cast<int>(b.levels.size()) != dim())
      throw ValidationError("sparse interpolant: block level arity mismatch");
    Eigen::Index expected = 1;
    int sum = 0;
    for (int lv : b.levels) {
      check_level(lv);
      expected *= cc_new_node_count(lv);
      sum += lv;
    }
    if (b.surplus.size() != expected)
      throw ValidationError("sparse interpolant: surplus block has the wrong length");
    if (!b.surplus.allFinite())
      throw ValidationError("sparse interpolant: non-finite surplus");
    max_level_sum_ = std::max(max_level_sum_, sum);
  }
}

Eigen::Index SparseInterpolant::node_count() const {
  Eigen::Index n = 0;
  for (const auto& b : blocks_) n += b.surplus.size();
  return n;
}

double SparseInterpolant::error_estimate() const {
  double est = 0.0;
  for (const auto& b : blocks_) {
    int sum = 0;
    for (int lv : b.levels) sum += lv;
    if (sum == max_level_sum_) est = std::max(est, b.surplus.cwiseAbs().maxCoeff());
  }
  return est;
}

void SparseInterpolant::check_domain(const Eigen::VectorXd& x) const {
  if (static_cast<int>(x.size()) != dim())
    throw ValidationError("sparse interpolant: query dimension mismatch");
  if (!domain_.contains(x))
    throw ValidationError("sparse interpolant: query point lies outside the domain box");
}

double SparseInterpolant::value_unit(const Eigen::VectorXd& u) const {
  return eval_blocks(blocks_, dim(), u);
}

Eigen::VectorXd SparseInterpolant::gradient_unit(const Eigen::VectorXd& u) const {
  const int d = dim();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
  std::vector<BasisPoint> bps(static_cast<size_t>(d));
  std::vector<double> prefix(static_cast<size_t>(d) + 1), suffix(static_cast<size_t>(d) + 1);
  for (const Block& b : blocks_) {
    Eigen::Index flat = 0;
    for (int k = 0; k < d; ++k) {
      bps[k] = basis_point(b.levels[k], u[k]);
      flat = flat * cc_new_node_count(b.levels[k]) + bps[k].t;
    }
    const double w = b.surplus[flat];
    if (w == 0.0) continue;
    prefix[0] = 1.0;
    for (int k = 0; k < d; ++k) prefix[k + 1] = prefix[k] * bps[k].value;
    suffix[d] = 1.0;
    for (int k = d - 1; k >= 0; --k) suffix[k] = suffix[k + 1] * bps[k].value;
    for (int k = 0; k < d; ++k) {
      const double others = prefix[k] * suffix[k + 1];
      if (others != 0.0) g[k] += w * bps[k].slope * others;
    }
  }
  return g;
}

double SparseInterpolant::value(const Eigen::VectorXd& x) const {
  check_domain(x);
  return value_unit(domain_.to_unit(x));
}

Eigen::VectorXd SparseInterpolant::gradient(const Eigen::VectorXd& x) const {
  check_domain(x);
  return gradient_unit(domain_.to_unit(x)).cwiseQuotient(domain_.widths());
}

// ------------------------------------------------------------------- builder

std::vector<SparseInterpolant> build_interpolants(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f, int outputs,
    const DomainBox& domain, const SparseBuildOptions& options) {
  domain.validate();
  if (outputs < 1) throw ValidationError("sparse grid build: outputs must be >= 1");
  if (options.max_depth < 0) throw ValidationError("sparse grid build: max_depth must be >= 0");
  if (options.tolerance && !(*options.tolerance > 0.0))
    throw ValidationError("sparse grid build: tolerance must be positive");
  const int d = domain.dim();

  std::vector<std::vector<SparseInterpolant::Block>> committed(outputs);
  double f_lo = std::numeric_limits<double>::infinity();
  double f_hi = -std::numeric_limits<double>::infinity();
  double tolerance = options.tolerance.value_or(0.0);
  bool tolerance_known = options.tolerance.has_value();

  for (int depth = 0; depth <= options.max_depth; ++depth) {
    // Stage every block of this level sum, then evaluate all of its nodes
    // against the interpolant committed so far.
    struct Pending {
      std::vector<int> levels;
      Eigen::Index count;
    };
    std::vector<Pending> pending;
    std::vector<int> scratch;
    Eigen::Index total_nodes = 0;
    for_each_composition(d, d + depth, scratch, [&](const std::vector<int>& levels) {
      Eigen::Index n = 1;
      for (int lv : levels) n *= cc_new_node_count(lv);
      pending.push_back({levels, n});
      total_nodes += n;
    });

    std::vector<Eigen::MatrixXd> surpluses(pending.size());
    for (size_t b = 0; b < pending.size(); ++b)
      surpluses[b].resize(pending[b].count, outputs);

    // Flat enumeration across blocks for the parallel map.
    std::vector<std::pair<size_t, Eigen::Index>> slots;
    slots.reserve(static_cast<size_t>(total_nodes));
    for (size_t b = 0; b < pending.size(); ++b)
      for (Eigen::Index i = 0; i < pending[b].count; ++i) slots.emplace_back(b, i);

    parallel_over(total_nodes, options.threads, [&](Eigen::Index slot) {
      const auto [b, node] = slots[static_cast<size_t>(slot)];
      const auto& levels = pending[b].levels;
      Eigen::VectorXd u(d);
      Eigen::Index rest = node;
      for (int k = d - 1; k >= 0; --k) {
        const int n_new = cc_new_node_count(levels[k]);
        u[k] = cc_new_node(levels[k], static_cast<int>(rest % n_new));
        rest /= n_new;
      }
      const Eigen::VectorXd x = domain.from_unit(u);
      Eigen::VectorXd fx = f(x);
      if (static_cast<int>(fx.size()) != outputs)
        throw ValidationError("sparse grid build: callable returned the wrong arity");
      if (!fx.allFinite()) {
        std::string coords;
        for (int k = 0; k < d; ++k) coords += (k ? ", " : "") + std::to_string(x[k]);
        throw NumericalError("sparse grid build: non-finite value at node (" + coords + ")");
      }
      for (int o = 0; o < outputs; ++o)
        surpluses[b](node, o) = fx[o] - eval_blocks(committed[o], d, u);
    });

    double depth_max = 0.0;
    for (size_t b = 0; b < pending.size(); ++b) {
      for (int o = 0; o < outputs; ++o) {
        committed[o].push_back({pending[b].levels, surpluses[b].col(o)});
        depth_max = std::max(depth_max, surpluses[b].col(o).cwiseAbs().maxCoeff());
      }
    }

    if (depth <= 1) {
      // Function range over the first two depths seeds the default tolerance.
      // A depth-1 node value is its surplus plus the centre value A_{d,d}.
      for (size_t b = 0; b < pending.size(); ++b) {
        for (int o = 0; o < outputs; ++o) {
          const double center = depth == 0 ? 0.0 : committed[o].front().surplus[0];
          for (Eigen::Index i = 0; i < pending[b].count; ++i) {
            const double fx = surpluses[b](i, o) + center;
            f_lo = std::min(f_lo, fx);
            f_hi = std::max(f_hi, fx);
          }
        }
      }
      if (depth == 1 && !tolerance_known) {
        tolerance = 1e-3 * (f_hi - f_lo);
        tolerance_known = tolerance > 0.0;
      }
    }

    if (depth >= 1 && tolerance_known && depth_max < tolerance) break;
  }

  std::vector<SparseInterpolant> result;
  result.reserve(static_cast<size_t>(outputs));
  for (int o = 0; o < outputs; ++o)
    result.emplace_back(domain, std::move(committed[o]));
  return result;
}

SparseInterpolant build_interpolant(const std::function<double(const Eigen::VectorXd&)>& f,
                                    const DomainBox& domain, const SparseBuildOptions& options) {
  auto wrap = [&f](const Eigen::VectorXd& x) {
    Eigen::VectorXd v(1);
    v[0] = f(x);
    return v;
  };
  auto built = build_interpolants(wrap, 1, domain, options);
  return std::move(built.front());
}

// ----------------------------------------------------------------- file io

void save_interpolant(const SparseInterpolant& interp, const std::string& model_fingerprint,
                      const std::string& path) {
  json records = json::array();
  for (const auto& b : interp.blocks()) {
    const int d = static_cast<int>(b.levels.size());
    for (Eigen::Index node = 0; node < b.surplus.size(); ++node) {
      std::vector<int> indices(d);
      Eigen::Index rest = node;
      for (int k = d - 1; k >= 0; --k) {
        indices[k] = static_cast<int>(rest % cc_new_node_count(b.levels[k]));
        rest /= cc_new_node_count(b.levels[k]);
      }
      records.push_back({{"levels", b.levels}, {"indices", indices}, {"surplus", b.surplus[node]}});
    }
  }
  json doc;
  doc["format_version"] = 1;
  doc["model_fingerprint"] = model_fingerprint;
  doc["d"] = interp.dim();
  doc["depth"] = interp.depth();
  doc["domain"] = {
      {"lo", std::vector<double>(interp.domain().lo.begin(), interp.domain().lo.end())},
      {"hi", std::vector<double>(interp.domain().hi.begin(), interp.domain().hi.end())},
      {"provenance", to_string(interp.domain().provenance)},
      {"param", interp.domain().param}};
  doc["records"] = std::move(records);
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write interpolant cache: " + path);
  out << doc.dump();
}

SparseInterpolant load_interpolant(const std::string& path,
                                   const std::string& expected_fingerprint) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open interpolant cache: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ValidationError("interpolant cache " + path + ": invalid json: " + e.what());
  }
  try {
    if (!doc.contains("format_version") || doc["format_version"].get<int>() != 1)
      throw ValidationError("interpolant cache: missing or unsupported field 'format_version'");
    if (!doc.contains("model_fingerprint"))
      throw ValidationError("interpolant cache: missing field 'model_fingerprint'");
    const std::string fp = doc["model_fingerprint"].get<std::string>();
    if (!expected_fingerprint.empty() && fp != expected_fingerprint)
      throw ValidationError(
          "interpolant cache: field 'model_fingerprint' does not match the model (" + fp +
          " vs " + expected_fingerprint + ")");
    if (!doc.contains("d") || !doc.contains("domain") || !doc.contains("records"))
      throw ValidationError("interpolant cache: missing field 'd', 'domain' or 'records'");
    const int d = doc["d"].get<int>();
    const json& dom = doc["domain"];
    DomainBox box;
    const auto lo = dom.at("lo").get<std::vector<double>>();
    const auto hi = dom.at("hi").get<std::vector<double>>();
    box.lo = Eigen::Map<const Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size()));
    box.hi = Eigen::Map<const Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size()));
    box.provenance = box_provenance_from_string(dom.at("provenance").get<std::string>());
    box.param = dom.at("param").get<double>();
    if (box.dim() != d) throw ValidationError("interpolant cache: field 'd' contradicts 'domain'");

    std::map<std::vector<int>, Eigen::VectorXd> grouped;
    for (const json& rec : doc["records"]) {
      const auto levels = rec.at("levels").get<std::vector<int>>();
      const auto indices = rec.at("indices").get<std::vector<int>>();
      const double surplus = rec.at("surplus").get<double>();
      if (static_cast<int>(levels.size()) != d || static_cast<int>(indices.size()) != d)
        throw ValidationError("interpolant cache: field 'records' has a malformed entry");
      Eigen::Index count = 1, flat = 0;
      for (int k = 0; k < d; ++k) {
        const int n_new = cc_new_node_count(levels[k]);
        if (indices[k] < 0 || indices[k] >= n_new)
          throw ValidationError("interpolant cache: field 'records' has an index out of range");
        count *= n_new;
        flat = flat * n_new + indices[k];
      }
      auto [it, fresh] = grouped.try_emplace(levels);
      if (fresh)
        it->second = Eigen::VectorXd::Constant(count, std::numeric_limits<double>::quiet_NaN());
      it->second[flat] = surplus;
    }
    std::vector<SparseInterpolant::Block> blocks;
    for (auto& [levels, surplus] : grouped) {
      if (!surplus.allFinite())
        throw ValidationError("interpolant cache: field 'records' is missing nodes of a block");
      blocks.push_back({levels, std::move(surplus)});
    }
    SparseInterpolant interp(std::move(box), std::move(blocks));
    if (doc.contains("depth") && doc["depth"].get<int>() != interp.depth())
      throw ValidationError("interpolant cache: field 'depth' contradicts 'records'");
    return interp;
  } catch (const json::exception& e) {
    throw ValidationError("interpolant cache " + path + ": malformed field: " + e.what());
  }
}

// ----------------------------------------------------------------- provider

Eigen::VectorXd SparseGridForce::force(const Eigen::VectorXd& q) const {
  const DomainBox& box = potential_ ? potential_->domain() : components_->front().domain();
  if (box.contains(q)) {
    if (potential_) return -potential_->gradient(q);
    Eigen::VectorXd f(static_cast<Eigen::Index>(components_->size()));
    for (size_t k = 0; k < components_->size(); ++k)
      f[static_cast<Eigen::Index>(k)] = (*components_)[k].value(q);
    return f;
  }
  fallbacks_.fetch_add(1, std::memory_order_relaxed);
  return model_->force(q);
}

}  // namespace gridhmc
