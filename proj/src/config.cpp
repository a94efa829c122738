#include "gridhmc/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "gridhmc/csv.hpp"
#include "gridhmc/hash.hpp"

namespace gridhmc {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

double to_double(const std::string& s, const std::string& key) {
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (trim(s.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError("config: key '" + key + "' is not a number: " + s);
}

long to_long(const std::string& s, const std::string& key) {
  try {
    size_t used = 0;
    const long v = std::stol(s, &used);
    if (trim(s.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError("config: key '" + key + "' is not an integer: " + s);
}

// Small lookup helper over parsed sections.
struct Reader {
  const IniSections& sections;

  bool has(const std::string& sec) const { return sections.count(sec) > 0; }

  const std::string* find(const std::string& sec, const std::string& key) const {
    auto s = sections.find(sec);
    if (s == sections.end()) return nullptr;
    auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }

  std::string str(const std::string& sec, const std::string& key,
                  const std::string& fallback) const {
    const std::string* v = find(sec, key);
    return v ? *v : fallback;
  }

  double num(const std::string& sec, const std::string& key, double fallback) const {
    const std::string* v = find(sec, key);
    return v ? to_double(*v, sec + "." + key) : fallback;
  }

  long integer(const std::string& sec, const std::string& key, long fallback) const {
    const std::string* v = find(sec, key);
    return v ? to_long(*v, sec + "." + key) : fallback;
  }

  Eigen::VectorXd vec(const std::string& sec, const std::string& key) const {
    const std::string* v = find(sec, key);
    return v ? parse_vector(*v) : Eigen::VectorXd();
  }
};

}  // namespace

IniSections parse_ini(const std::string& text) {
  IniSections sections;
  std::istringstream in(text);
  std::string line, current;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ValidationError("config line " + std::to_string(line_no) + ": unterminated section");
      current = trim(line.substr(1, line.size() - 2));
      sections[current];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || current.empty())
      throw ValidationError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ValidationError("config line " + std::to_string(line_no) + ": empty key");
    sections[current][key] = value;
  }
  return sections;
}

Eigen::VectorXd parse_vector(const std::string& text) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    cell = trim(cell);
    if (cell.empty()) throw ValidationError("config: empty vector entry in: " + text);
    values.push_back(to_double(cell, "vector"));
  }
  if (values.empty()) throw ValidationError("config: empty vector: " + text);
  return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                           static_cast<Eigen::Index>(values.size()));
}

Eigen::MatrixXd parse_matrix(const std::string& text) {
  std::vector<Eigen::VectorXd> rows;
  std::stringstream in(text);
  std::string row;
  while (std::getline(in, row, ';')) rows.push_back(parse_vector(row));
  const Eigen::Index cols = rows.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), cols);
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw ValidationError("config: ragged matrix: " + text);
    m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return m;
}

std::string DomainConfig::serialize() const {
  std::string s = "mode=" + mode;
  if (mode == "manual") {
    s += "|lo=";
    for (Eigen::Index k = 0; k < box_lo.size(); ++k) s += format_double(box_lo[k]) + ",";
    s += "|hi=";
    for (Eigen::Index k = 0; k < box_hi.size(); ++k) s += format_double(box_hi[k]) + ",";
  } else if (mode == "laplace") {
    s += "|p=" + format_double(p);
  } else {
    s += "|padding=" + format_double(padding) + "|burn=" + std::to_string(burn_in_iters);
  }
  return s;
}

std::string ExperimentConfig::config_hash() const { return hash_hex(raw_text); }

void ExperimentConfig::validate() const {
  static const std::vector<std::string> samplers = {"hmc", "ghmc", "sghmc", "ghmc-complete",
                                                    "sghmc-complete"};
  if (std::find(samplers.begin(), samplers.end(), sampler) == samplers.end())
    throw ValidationError("config: unknown sampler '" + sampler + "'");
  if (needs_grid() && !grid.present)
    throw ValidationError("config: sampler '" + sampler + "' requires a [grid] section");
  if (needs_sparse() && !sparse.present)
    throw ValidationError("config: sampler '" + sampler + "' requires a [sparse] section");
  if (sampler == "sghmc-complete" && sparse.force_mode != "gradient")
    throw ValidationError(
        "config: sghmc-complete needs sparse.force_mode = gradient (the correction reads the "
        "potential interpolant)");
  if (sparse.present && sparse.force_mode != "gradient" && sparse.force_mode != "components")
    throw ValidationError("config: sparse.force_mode must be 'gradient' or 'components'");
  if (sparse.present && sparse.depth < 0)
    throw ValidationError("config: sparse.depth must be >= 0");
  if (model.name != "gaussian" && model.name != "logistic" && model.name != "banana" &&
      model.name != "gp")
    throw ValidationError("config: unknown model '" + model.name + "'");
  if (!model.synthetic && model.dataset_path.empty())
    throw ValidationError("config: model needs either synthetic = true or a dataset path");
  if (domain.mode != "manual" && domain.mode != "laplace" && domain.mode != "trajectory")
    throw ValidationError("config: domain.mode must be manual, laplace or trajectory");
  if (domain.mode == "manual" && (needs_grid() || needs_sparse())) {
    if (domain.box_lo.size() == 0 || domain.box_lo.size() != domain.box_hi.size())
      throw ValidationError("config: manual domain needs box_lo and box_hi of equal length");
  }
  if (!(hmc.step_size > 0.0) || hmc.leapfrog_steps < 1 || hmc.iterations < 1 || hmc.burn_in < 0)
    throw ValidationError("config: invalid [hmc] section");
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();

  ExperimentConfig cfg;
  cfg.config_path = path;
  cfg.raw_text = buf.str();
  const IniSections sections = parse_ini(cfg.raw_text);
  const Reader r{sections};

  cfg.model.name = r.str("model", "name", "");
  cfg.model.dataset_path = r.str("model", "dataset", "");
  cfg.model.synthetic = r.str("model", "synthetic", "false") == "true";
  if (const std::string* v = r.find("model", "true_params")) cfg.model.true_params = parse_vector(*v);
  cfg.model.n = static_cast<int>(r.integer("model", "n", 100));
  cfg.model.seed = static_cast<std::uint64_t>(r.integer("model", "seed", 0));
  cfg.model.sigma_y = r.num("model", "sigma_y", 2.0);
  cfg.model.sigma_beta = r.num("model", "sigma_beta", 1.0);
  if (const std::string* v = r.find("model", "sigma")) cfg.model.sigma = parse_matrix(*v);
  if (const std::string* v = r.find("model", "sigma0")) cfg.model.sigma0 = parse_matrix(*v);
  if (const std::string* v = r.find("model", "mu0")) cfg.model.mu0 = parse_vector(*v);

  cfg.sampler = r.str("sampler", "kind", "hmc");

  cfg.hmc.step_size = r.num("hmc", "eps", 0.1);
  cfg.hmc.leapfrog_steps = static_cast<int>(r.integer("hmc", "L", 10));
  cfg.hmc.iterations = static_cast<int>(r.integer("hmc", "iterations", 1000));
  cfg.hmc.burn_in = static_cast<int>(r.integer("hmc", "burn_in", 0));
  cfg.hmc.seed = static_cast<std::uint64_t>(r.integer("hmc", "seed", 0));
  if (const std::string* v = r.find("hmc", "mass_diag")) cfg.hmc.mass_diag = parse_vector(*v);
  if (const std::string* v = r.find("hmc", "q1")) cfg.q1 = parse_vector(*v);

  cfg.domain.mode = r.str("domain", "mode", "manual");
  if (const std::string* v = r.find("domain", "box_lo")) cfg.domain.box_lo = parse_vector(*v);
  if (const std::string* v = r.find("domain", "box_hi")) cfg.domain.box_hi = parse_vector(*v);
  cfg.domain.p = r.num("domain", "p", 0.999);
  cfg.domain.padding = r.num("domain", "padding", 0.1);
  cfg.domain.burn_in_iters = static_cast<int>(r.integer("domain", "burn_in_iters", 500));

  cfg.grid.present = r.has("grid");
  if (const std::string* v = r.find("grid", "cell_size")) cfg.grid.cell_size = parse_vector(*v);
  if (const std::string* v = r.find("grid", "cells")) {
    const Eigen::VectorXd c = parse_vector(*v);
    for (Eigen::Index k = 0; k < c.size(); ++k) cfg.grid.cells.push_back(static_cast<int>(c[k]));
  }

  cfg.sparse.present = r.has("sparse");
  cfg.sparse.depth = static_cast<int>(r.integer("sparse", "depth", 6));
  if (const std::string* v = r.find("sparse", "tolerance"))
    cfg.sparse.tolerance = to_double(*v, "sparse.tolerance");
  cfg.sparse.force_mode = r.str("sparse", "force_mode", "gradient");

  cfg.output_dir = r.str("output", "dir", "runs/out");

  cfg.validate();
  return cfg;
}

}  // namespace gridhmc
