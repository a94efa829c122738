// Experiment driver: precompute force caches, run samplers, and compare
// their sampling efficiency.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gridhmc/approx_energy.hpp"
#include "gridhmc/diagnostics.hpp"
#include "gridhmc/experiment.hpp"
#include "gridhmc/hash.hpp"
#include "gridhmc/rng.hpp"

namespace {

using json = nlohmann::json;
using namespace gridhmc;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ExperimentConfig load_with_overrides(const std::string& config_path, const std::string& out_dir) {
  ExperimentConfig cfg = load_config(config_path);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  return cfg;
}

json report_to_json(const EfficiencyReport& rep) {
  json j;
  j["ess"] = std::vector<double>(rep.ess.begin(), rep.ess.end());
  json flags = json::array();
  for (const auto& d : rep.ess_detail)
    flags.push_back({{"degenerate", d.degenerate}, {"exceeded_b", d.exceeded_b}});
  j["ess_flags"] = flags;
  j["acceptance_rate"] = rep.acceptance_rate;
  j["seconds_per_iteration"] = rep.seconds_per_iteration;
  j["min_ess_per_second"] = rep.min_ess_per_second;
  j["total_seconds"] = rep.total_seconds;
  j["samples"] = rep.samples;
  return j;
}

std::string ess_cell(const EfficiencyReport& rep) {
  std::string s = "(";
  for (Eigen::Index k = 0; k < rep.ess.size(); ++k) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", rep.ess[k]);
    s += buf;
    if (k + 1 < rep.ess.size()) s += ", ";
  }
  return s + ")";
}

void print_comparison(const std::vector<std::string>& names,
                      const std::vector<EfficiencyReport>& reports,
                      const std::vector<double>& precompute_s,
                      const std::vector<std::uint64_t>& fallbacks) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"Method", "AR", "ESS", "s/Iteration", "min ESS/s", "Precompute s", "Fallbacks"});
  for (size_t i = 0; i < names.size(); ++i) {
    char ar[32], spi[32], mes[32], pre[32];
    std::snprintf(ar, sizeof(ar), "%.4f", reports[i].acceptance_rate);
    std::snprintf(spi, sizeof(spi), "%.4e", reports[i].seconds_per_iteration);
    std::snprintf(mes, sizeof(mes), "%.4f", reports[i].min_ess_per_second);
    std::snprintf(pre, sizeof(pre), "%.3f", precompute_s[i]);
    rows.push_back({names[i], ar, ess_cell(reports[i]), spi, mes, pre,
                    std::to_string(fallbacks[i])});
  }
  std::vector<size_t> widths(rows[0].size(), 0);
  for (const auto& row : rows)
    for (size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  for (const auto& row : rows) {
    for (size_t c = 0; c < row.size(); ++c)
      std::printf("%-*s  ", static_cast<int>(widths[c]), row[c].c_str());
    std::printf("\n");
  }
}

int cmd_precompute(const std::string& config_path, const std::string& out_dir, bool force,
                   int threads) {
  const Experiment exp = prepare_experiment(load_with_overrides(config_path, out_dir));
  if (!exp.config.needs_grid() && !exp.config.needs_sparse()) {
    std::cout << "sampler '" << exp.config.sampler << "' needs no precompute\n";
    return 0;
  }
  const PrecomputeOutcome out = run_precompute(exp, force, threads);
  json j;
  j["caches"] = out.cache_paths;
  j["seconds"] = out.seconds;
  j["reused"] = out.reused;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_sample(const std::string& config_path, const std::string& out_dir, int chains,
               int threads) {
  const Experiment exp = prepare_experiment(load_with_overrides(config_path, out_dir));
  const RunOutcome out = run_sample(exp, chains, threads);
  json j;
  j["chains"] = out.chain_paths;
  j["manifest"] = out.manifest_path;
  j["sampling_seconds"] = out.sampling_seconds;
  j["precompute_seconds"] = out.precompute_seconds;
  j["fallbacks"] = out.fallbacks;
  json reports = json::array();
  for (const auto& rep : out.reports) reports.push_back(report_to_json(rep));
  j["reports"] = reports;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_compare(const std::vector<std::string>& run_dirs, const std::string& json_out) {
  if (run_dirs.size() < 2)
    throw ValidationError("compare: need at least two completed run directories");
  std::vector<std::string> names;
  std::vector<EfficiencyReport> reports;
  std::vector<double> precompute_s;
  std::vector<std::uint64_t> fallbacks;
  std::string dataset_hash;
  for (const auto& dir : run_dirs) {
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw ValidationError("compare: no manifest in " + dir);
    json manifest;
    in >> manifest;
    const std::string hash = manifest.at("dataset").at("hash").get<std::string>();
    if (dataset_hash.empty()) dataset_hash = hash;
    if (hash != dataset_hash)
      throw ValidationError("compare: mismatched datasets across runs (" + dir + ")");
    const auto chains = manifest.at("chains");
    if (chains.empty()) throw ValidationError("compare: run has no chains: " + dir);
    const ChainResult chain = read_chain_csv(chains[0].at("path").get<std::string>());
    names.push_back(manifest.at("sampler").get<std::string>());
    reports.push_back(efficiency_report(chain));
    precompute_s.push_back(manifest.at("timings").at("precompute_s").get<double>());
    fallbacks.push_back(manifest.value("fallbacks", 0ull));
  }
  print_comparison(names, reports, precompute_s, fallbacks);
  if (!json_out.empty()) {
    json doc = json::array();
    for (size_t i = 0; i < names.size(); ++i) {
      json row = report_to_json(reports[i]);
      row["method"] = names[i];
      row["precompute_seconds"] = precompute_s[i];
      row["fallbacks"] = fallbacks[i];
      doc.push_back(row);
    }
    std::ofstream out(json_out);
    out << doc.dump(2);
  }
  return 0;
}

int cmd_diagnose(const std::vector<std::string>& chain_files) {
  if (chain_files.empty()) throw UsageError("diagnose: give at least one chain csv");
  for (const auto& path : chain_files) {
    const ChainResult chain = read_chain_csv(path);
    const EfficiencyReport rep = efficiency_report(chain);
    json j = report_to_json(rep);
    j["chain"] = path;
    std::cout << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_domain(const std::string& config_path, const std::string& out_dir) {
  const Experiment exp = prepare_experiment(load_with_overrides(config_path, out_dir));
  const DomainBox box = resolve_domain(exp);
  json j;
  j["lo"] = std::vector<double>(box.lo.begin(), box.lo.end());
  j["hi"] = std::vector<double>(box.hi.begin(), box.hi.end());
  j["provenance"] = to_string(box.provenance);
  j["param"] = box.param;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_verify_kl(const std::string& config_path, const std::string& out_dir, int threads) {
  const Experiment exp = prepare_experiment(load_with_overrides(config_path, out_dir));
  if (!exp.config.needs_grid() && !exp.config.needs_sparse())
    throw ValidationError("verify-kl: config must use a grid or sparse sampler");
  run_precompute(exp, false, threads);
  const SamplerSetup setup = load_sampler(exp);

  const PotentialModel& model = *exp.model;
  auto u_exact = [&model](const Eigen::VectorXd& q) { return model.potential(q); };
  const EnergyProvider* approx =
      exp.config.approximate_correction()
          ? setup.energy.get()
          : nullptr;
  std::unique_ptr<EnergyProvider> fallback_energy;
  if (!approx) {
    // The sampler keeps the exact correction; verify the grid's U-tilde anyway.
    if (setup.grid)
      fallback_energy = std::make_unique<VertexEnergy>(*setup.grid, model);
    else
      fallback_energy = std::make_unique<SparseEnergy>(*setup.potential_interp, model);
    approx = fallback_energy.get();
  }
  auto u_approx = [approx](const Eigen::VectorXd& q) { return approx->energy(q); };

  const int d = setup.domain.dim();
  int probe_res = 64;
  if (setup.grid) probe_res = 4 * *std::max_element(setup.grid->cells().begin(),
                                                    setup.grid->cells().end());
  const int quad_res = d == 1 ? 2000 : (d == 2 ? 150 : 24);
  const KlReport report =
      kl_bound_check(u_exact, u_approx, setup.domain, probe_res, quad_res);

  json j;
  j["sup_diff"] = report.sup_diff;
  j["bound"] = report.bound;
  j["kl_estimate"] = report.kl_estimate;
  j["probe_resolution"] = report.probe_resolution;
  j["quadrature_resolution"] = report.quadrature_resolution;
  j["random_probes"] = report.random_probes;
  j["within_bound"] = report.kl_estimate <= report.bound + 1e-3;
  std::cout << j.dump(2) << "\n";
  std::ofstream out(exp.config.output_dir + "/kl_report.json");
  out << j.dump(2);
  return 0;
}

// ---------------------------------------------------------------- verify

json check_line(const std::string& name, bool pass, double measured, double limit) {
  std::printf("%-38s %s  measured=%.3e  limit=%.3e\n", name.c_str(), pass ? "PASS" : "FAIL",
              measured, limit);
  return {{"name", name}, {"pass", pass}, {"measured", measured}, {"limit", limit}};
}

json verify_leapfrog() {
  // Reversibility on a 2-D Gaussian posterior: forward, negate, back.
  const GaussianConjugateModel model(Eigen::Vector2d(0.3, -0.2), 50,
                                     Eigen::Matrix2d::Identity(),
                                     Eigen::Matrix2d::Identity(), Eigen::Vector2d(0, 0));
  const ExactForce force(model);
  const Eigen::VectorXd inv_mass = Eigen::VectorXd::Ones(2);
  ChainRng rng(7);
  double max_dev = 0.0;
  for (int i = 0; i < 500; ++i) {
    ChainState s{rng.normal_vector(2), rng.normal_vector(2)};
    const LeapfrogResult fwd = leapfrog(s, 0.1, 20, force, inv_mass);
    LeapfrogResult back = leapfrog({fwd.state.q, -fwd.state.p}, 0.1, 20, force, inv_mass);
    max_dev = std::max(max_dev, (back.state.q - s.q).lpNorm<Eigen::Infinity>());
    max_dev = std::max(max_dev, (back.state.p + s.p).lpNorm<Eigen::Infinity>());
  }
  json checks = json::array();
  checks.push_back(check_line("leapfrog.reversibility", max_dev < 1e-10, max_dev, 1e-10));
  return checks;
}

json verify_interp() {
  json checks = json::array();
  DomainBox unit;
  unit.lo = Eigen::Vector2d(0, 0);
  unit.hi = Eigen::Vector2d(1, 1);
  auto f = [](const Eigen::VectorXd& x) { return std::exp(-x.squaredNorm()); };
  SparseBuildOptions opt;
  opt.max_depth = 6;
  opt.tolerance = 1e-12;  // run to the depth limit
  const SparseInterpolant interp = build_interpolant(f, unit, opt);
  double node_err = 0.0;
  for (const auto& pt : sparse_grid_points(interp.max_level_sum(), 2))
    node_err = std::max(node_err, std::abs(interp.value(pt) - f(pt)));
  checks.push_back(check_line("interp.node_exactness", node_err < 1e-12, node_err, 1e-12));

  ChainRng rng(11);
  double probe_err = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const Eigen::Vector2d x(rng.uniform(), rng.uniform());
    probe_err = std::max(probe_err, std::abs(interp.value(x) - f(x)));
  }
  checks.push_back(check_line("interp.probe_error", probe_err < 1e-2, probe_err, 1e-2));

  const SparseInterpolant flat =
      build_interpolant([](const Eigen::VectorXd&) { return 3.0; }, unit, opt);
  const double const_err = std::abs(flat.value(Eigen::Vector2d(0.37, 0.81)) - 3.0);
  checks.push_back(check_line("interp.constant", const_err < 1e-12, const_err, 1e-12));
  return checks;
}

json verify_kl_suite() {
  json checks = json::array();
  DomainBox line;
  line.lo = Eigen::VectorXd::Constant(1, -6.0);
  line.hi = Eigen::VectorXd::Constant(1, 6.0);
  auto u = [](const Eigen::VectorXd& q) { return 0.5 * q.squaredNorm(); };

  auto shifted = [&u](const Eigen::VectorXd& q) { return u(q) + 0.7; };
  const KlReport constant = kl_bound_check(u, shifted, line, 200, 2000);
  checks.push_back(check_line("kl.constant_shift", std::abs(constant.kl_estimate) < 1e-8,
                              constant.kl_estimate, 1e-8));

  auto wobble = [&u](const Eigen::VectorXd& q) { return u(q) + 0.1 * std::sin(q[0]); };
  const KlReport sine = kl_bound_check(u, wobble, line, 200, 2000);
  const bool pass = sine.kl_estimate >= 0.0 && sine.kl_estimate <= sine.bound + 1e-3;
  checks.push_back(check_line("kl.sine_within_bound", pass, sine.kl_estimate, sine.bound));
  return checks;
}

json verify_ess() {
  json checks = json::array();
  ChainRng rng(5);
  const int b = 20000;
  Eigen::VectorXd iid(b);
  for (int i = 0; i < b; ++i) iid[i] = rng.normal();
  const double ess_iid = ess(iid).value;
  checks.push_back(check_line("ess.iid_ratio", std::abs(ess_iid / b - 1.0) < 0.1,
                              ess_iid / b, 0.1));

  const double phi = 0.9;
  Eigen::VectorXd ar(b);
  ar[0] = rng.normal();
  for (int i = 1; i < b; ++i) ar[i] = phi * ar[i - 1] + rng.normal();
  const double expected = b * (1.0 - phi) / (1.0 + phi);
  const double ess_ar = ess(ar).value;
  checks.push_back(check_line("ess.ar1_ratio", std::abs(ess_ar / expected - 1.0) < 0.15,
                              ess_ar / expected, 0.15));
  return checks;
}

int cmd_verify(const std::string& suite) {
  json checks;
  if (suite == "leapfrog")
    checks = verify_leapfrog();
  else if (suite == "interp")
    checks = verify_interp();
  else if (suite == "kl")
    checks = verify_kl_suite();
  else if (suite == "ess")
    checks = verify_ess();
  else
    throw UsageError("unknown suite '" + suite + "'; available: leapfrog interp kl ess");
  json j;
  j["suite"] = suite;
  j["checks"] = checks;
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Precomputed-force HMC experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, json_out, suite;
  std::vector<std::string> run_dirs, chain_files;
  bool force = false;
  int chains = 1, threads = 1;

  auto* pre = app.add_subcommand("precompute", "build the force map / interpolant cache");
  pre->add_option("--config", config_path, "experiment config")->required();
  pre->add_option("--out", out_dir, "override output directory");
  pre->add_flag("--force", force, "rebuild even if a cache exists");
  pre->add_option("--threads", threads, "build threads");

  auto* smp = app.add_subcommand("sample", "run the configured sampler");
  smp->add_option("--config", config_path, "experiment config")->required();
  smp->add_option("--out", out_dir, "override output directory");
  smp->add_option("--chains", chains, "number of chains");
  smp->add_option("--threads", threads, "chains run in parallel");

  auto* cmp = app.add_subcommand("compare", "tabulate completed runs");
  cmp->add_option("runs", run_dirs, "run directories with manifest.json")->required();
  cmp->add_option("--json", json_out, "also write the table as json");

  auto* dia = app.add_subcommand("diagnose", "efficiency report for chain csv files");
  dia->add_option("chains", chain_files, "chain csv files")->required();

  auto* dom = app.add_subcommand("domain", "print the resolved domain of interest");
  dom->add_option("--config", config_path, "experiment config")->required();
  dom->add_option("--out", out_dir, "override output directory");

  auto* vkl = app.add_subcommand("verify-kl", "check the divergence bound for the approximate target");
  vkl->add_option("--config", config_path, "experiment config")->required();
  vkl->add_option("--out", out_dir, "override output directory");
  vkl->add_option("--threads", threads, "build threads");

  auto* ver = app.add_subcommand("verify", "run a property suite");
  ver->add_option("suite", suite, "leapfrog | interp | kl | ess")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*pre) return cmd_precompute(config_path, out_dir, force, threads);
    if (*smp) return cmd_sample(config_path, out_dir, chains, threads);
    if (*cmp) return cmd_compare(run_dirs, json_out);
    if (*dia) return cmd_diagnose(chain_files);
    if (*dom) return cmd_domain(config_path, out_dir);
    if (*vkl) return cmd_verify_kl(config_path, out_dir, threads);
    if (*ver) return cmd_verify(suite);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
