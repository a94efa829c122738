#include "gridhmc/experiment.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gridhmc/hash.hpp"
#include "gridhmc/parallel.hpp"

namespace gridhmc {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

Eigen::VectorXd default_true_params(const std::string& name) {
  if (name == "logistic") return Eigen::Vector2d(-1.0, 1.0);
  if (name == "banana") return Eigen::Vector2d(0.0, 1.0);  // b1 + b2^2 = 1
  if (name == "gp") return Eigen::Vector3d(0.0, 0.0, -0.5);
  return Eigen::Vector2d(0.0, 0.0);
}

double now_seconds(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string grid_cache_path(const ExperimentConfig& cfg) {
  return cfg.output_dir + "/grid_cache.json";
}

std::string sparse_cache_path(const ExperimentConfig& cfg, int component) {
  if (component < 0) return cfg.output_dir + "/sparse_cache.json";
  return cfg.output_dir + "/sparse_cache_c" + std::to_string(component) + ".json";
}

std::string precompute_manifest_path(const ExperimentConfig& cfg) {
  return cfg.output_dir + "/precompute.json";
}

void write_precompute_manifest(const ExperimentConfig& cfg, const PrecomputeOutcome& out,
                               const std::string& fingerprint) {
  json doc;
  doc["fingerprint"] = fingerprint;
  doc["seconds"] = out.seconds;
  doc["reused"] = out.reused;
  doc["caches"] = out.cache_paths;
  std::ofstream f(precompute_manifest_path(cfg));
  f << doc.dump(2);
}

double read_precompute_seconds(const ExperimentConfig& cfg) {
  std::ifstream f(precompute_manifest_path(cfg));
  if (!f) return 0.0;
  json doc;
  f >> doc;
  return doc.value("seconds", 0.0);
}

}  // namespace

std::unique_ptr<PotentialModel> build_model(const ModelConfig& config, const CsvTable& dataset) {
  if (config.name == "logistic") {
    const Eigen::VectorXd y = dataset.column("y");
    Eigen::MatrixXd x(dataset.rows.rows(), dataset.rows.cols() - 1);
    Eigen::Index col = 0;
    for (size_t j = 0; j < dataset.columns.size(); ++j)
      if (dataset.columns[j] != "y") x.col(col++) = dataset.rows.col(static_cast<Eigen::Index>(j));
    return std::make_unique<LogisticModel>(std::move(x), y);
  }
  if (config.name == "banana") {
    return std::make_unique<BananaModel>(dataset.column("y"), config.sigma_y, config.sigma_beta);
  }
  if (config.name == "gp") {
    Eigen::MatrixXd sites(dataset.rows.rows(), 2);
    sites.col(0) = dataset.column("x1");
    sites.col(1) = dataset.column("x2");
    return std::make_unique<GpHyperModel>(sites, dataset.column("y"));
  }
  if (config.name == "gaussian") {
    const Eigen::MatrixXd& rows = dataset.rows;
    const int d = static_cast<int>(rows.cols());
    Eigen::MatrixXd sigma = config.sigma.size() ? config.sigma : Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd sigma0 = config.sigma0.size() ? config.sigma0 : Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd mu0 = config.mu0.size() ? config.mu0 : Eigen::VectorXd::Zero(d);
    return std::make_unique<GaussianConjugateModel>(
        GaussianConjugateModel::from_data(rows, std::move(sigma), std::move(sigma0), std::move(mu0)));
  }
  throw ValidationError("unknown model name: " + config.name);
}

Experiment prepare_experiment(const ExperimentConfig& config) {
  config.validate();
  Experiment exp;
  exp.config = config;
  fs::create_directories(config.output_dir);

  if (config.model.synthetic) {
    SyntheticSpec spec;
    spec.model = config.model.name;
    spec.true_params = config.model.true_params.size() ? config.model.true_params
                                                       : default_true_params(config.model.name);
    spec.n = config.model.n;
    spec.seed = config.model.seed;
    spec.sigma_y = config.model.sigma_y;
    spec.sigma = config.model.sigma;
    exp.dataset = generate_synthetic(spec);
    exp.dataset_path = config.output_dir + "/dataset.csv";
    write_csv(exp.dataset_path, exp.dataset.columns, exp.dataset.rows);
  } else {
    exp.dataset_path = config.model.dataset_path;
    exp.dataset = read_csv(exp.dataset_path);
  }
  exp.dataset_hash = hash_file(exp.dataset_path);
  exp.model = build_model(config.model, exp.dataset);
  return exp;
}

Eigen::VectorXd Experiment::start_position(const DomainBox* box) const {
  if (config.q1.size()) {
    if (static_cast<int>(config.q1.size()) != model->dim())
      throw ValidationError("config: q1 dimension mismatch");
    return config.q1;
  }
  if (box && box->provenance == BoxProvenance::Laplace) return 0.5 * (box->lo + box->hi);
  return Eigen::VectorXd::Zero(model->dim());
}

DomainBox resolve_domain(const Experiment& exp) {
  const DomainConfig& dc = exp.config.domain;
  if (dc.mode == "manual") {
    DomainBox box;
    box.lo = dc.box_lo;
    box.hi = dc.box_hi;
    box.provenance = BoxProvenance::Manual;
    box.validate();
    if (box.dim() != exp.model->dim())
      throw ValidationError("config: manual domain box dimension mismatch");
    return box;
  }
  if (dc.mode == "laplace") {
    const LaplaceFit fit =
        find_mode(*exp.model, Eigen::VectorXd::Zero(exp.model->dim()), 1e-8, 500);
    return laplace_box(fit, dc.p);
  }
  // trajectory: hull of the leapfrog positions of an exact-force burn-in run
  HmcConfig warm = exp.config.hmc;
  warm.burn_in = dc.burn_in_iters;
  warm.iterations = 1;
  warm.record_burnin_trajectory = true;
  const ExactForce force(*exp.model);
  const ExactEnergy energy(*exp.model);
  const ChainResult run = sample(warm, force, energy, exp.start_position(nullptr));
  return trajectory_box(run.burnin_trajectory, dc.padding);
}

std::vector<int> grid_cells(const GridSectionConfig& grid, const DomainBox& box) {
  if (!grid.cells.empty()) {
    if (static_cast<int>(grid.cells.size()) != box.dim())
      throw ValidationError("config: grid.cells length mismatch");
    return grid.cells;
  }
  if (grid.cell_size.size() == 0)
    throw ValidationError("config: [grid] needs cell_size or cells");
  std::vector<int> cells(static_cast<size_t>(box.dim()));
  for (int k = 0; k < box.dim(); ++k) {
    const double size =
        grid.cell_size.size() == 1 ? grid.cell_size[0] : grid.cell_size[k];
    if (!(size > 0.0)) throw ValidationError("config: grid.cell_size must be positive");
    cells[static_cast<size_t>(k)] =
        std::max(1, static_cast<int>(std::lround((box.hi[k] - box.lo[k]) / size)));
  }
  return cells;
}

std::string cache_fingerprint(const Experiment& exp) {
  std::string s = exp.model->fingerprint() + "|" + exp.config.domain.serialize();
  if (exp.config.needs_grid()) {
    s += "|grid=";
    if (!exp.config.grid.cells.empty())
      for (int c : exp.config.grid.cells) s += std::to_string(c) + ",";
    else
      for (Eigen::Index k = 0; k < exp.config.grid.cell_size.size(); ++k)
        s += format_double(exp.config.grid.cell_size[k]) + ",";
  }
  if (exp.config.needs_sparse()) {
    s += "|sparse=depth" + std::to_string(exp.config.sparse.depth);
    if (exp.config.sparse.tolerance) s += ",tol" + format_double(*exp.config.sparse.tolerance);
    s += "," + exp.config.sparse.force_mode;
  }
  return hash_hex(s);
}

PrecomputeOutcome run_precompute(const Experiment& exp, bool force_rebuild, int threads) {
  PrecomputeOutcome out;
  if (!exp.config.needs_grid() && !exp.config.needs_sparse()) return out;

  const std::string fingerprint = cache_fingerprint(exp);
  std::vector<std::string> paths;
  if (exp.config.needs_grid()) paths.push_back(grid_cache_path(exp.config));
  if (exp.config.needs_sparse()) {
    if (exp.config.sparse.force_mode == "gradient")
      paths.push_back(sparse_cache_path(exp.config, -1));
    else
      for (int k = 0; k < exp.model->dim(); ++k)
        paths.push_back(sparse_cache_path(exp.config, k));
  }

  bool all_present = true;
  for (const auto& p : paths)
    if (!fs::exists(p)) all_present = false;

  if (all_present && !force_rebuild) {
    // Fingerprint check only; a match means the cache is exactly what this
    // config would rebuild.
    for (const auto& p : paths) {
      if (exp.config.needs_grid() && p == grid_cache_path(exp.config))
        load_force_grid(p, fingerprint);
      else
        load_interpolant(p, fingerprint);
    }
    out.cache_paths = paths;
    out.reused = true;
    write_precompute_manifest(exp.config, out, fingerprint);
    return out;
  }

  fs::create_directories(exp.config.output_dir);
  const auto start = std::chrono::steady_clock::now();
  const DomainBox box = resolve_domain(exp);

  if (exp.config.needs_grid()) {
    ForceGridBuildOptions options;
    options.threads = threads;
    options.with_vertex_potential = true;  // one cache serves ghmc and ghmc-complete
    const ForceGrid grid = build_force_map(*exp.model, box, grid_cells(exp.config.grid, box), options);
    save_force_grid(grid, fingerprint, grid_cache_path(exp.config));
  }
  if (exp.config.needs_sparse()) {
    SparseBuildOptions options;
    options.max_depth = exp.config.sparse.depth;
    options.tolerance = exp.config.sparse.tolerance;
    options.threads = threads;
    const PotentialModel& model = *exp.model;
    if (exp.config.sparse.force_mode == "gradient") {
      const SparseInterpolant interp = build_interpolant(
          [&model](const Eigen::VectorXd& x) { return model.potential(x); }, box, options);
      save_interpolant(interp, fingerprint, sparse_cache_path(exp.config, -1));
    } else {
      const auto interps = build_interpolants(
          [&model](const Eigen::VectorXd& x) { return model.force(x); }, model.dim(), box,
          options);
      for (int k = 0; k < model.dim(); ++k)
        save_interpolant(interps[static_cast<size_t>(k)], fingerprint,
                         sparse_cache_path(exp.config, k));
    }
  }

  out.cache_paths = paths;
  out.seconds = now_seconds(start);
  write_precompute_manifest(exp.config, out, fingerprint);
  return out;
}

SamplerSetup load_sampler(const Experiment& exp) {
  SamplerSetup setup;
  const std::string& kind = exp.config.sampler;
  if (kind == "hmc") {
    setup.force = std::make_unique<ExactForce>(*exp.model);
    setup.energy = std::make_unique<ExactEnergy>(*exp.model);
    return setup;
  }

  const std::string fingerprint = cache_fingerprint(exp);
  if (exp.config.needs_grid()) {
    const std::string path = grid_cache_path(exp.config);
    if (!fs::exists(path))
      throw ValidationError("missing grid cache for sampler '" + kind + "': run precompute first");
    setup.grid = std::make_unique<ForceGrid>(load_force_grid(path, fingerprint));
    setup.domain = setup.grid->domain();
    setup.has_domain = true;
    setup.force = std::make_unique<GridForce>(*setup.grid, *exp.model);
    if (kind == "ghmc-complete")
      setup.energy = std::make_unique<VertexEnergy>(*setup.grid, *exp.model);
    else
      setup.energy = std::make_unique<ExactEnergy>(*exp.model);
    return setup;
  }

  if (exp.config.sparse.force_mode == "gradient") {
    const std::string path = sparse_cache_path(exp.config, -1);
    if (!fs::exists(path))
      throw ValidationError("missing sparse cache for sampler '" + kind +
                            "': run precompute first");
    setup.potential_interp = std::make_unique<SparseInterpolant>(load_interpolant(path, fingerprint));
    setup.domain = setup.potential_interp->domain();
    setup.has_domain = true;
    setup.force = std::make_unique<SparseGridForce>(*setup.potential_interp, *exp.model);
    if (kind == "sghmc-complete")
      setup.energy = std::make_unique<SparseEnergy>(*setup.potential_interp, *exp.model);
    else
      setup.energy = std::make_unique<ExactEnergy>(*exp.model);
  } else {
    for (int k = 0; k < exp.model->dim(); ++k) {
      const std::string path = sparse_cache_path(exp.config, k);
      if (!fs::exists(path))
        throw ValidationError("missing sparse cache for sampler '" + kind +
                              "': run precompute first");
      setup.component_interps.push_back(load_interpolant(path, fingerprint));
    }
    setup.domain = setup.component_interps.front().domain();
    setup.has_domain = true;
    setup.force = std::make_unique<SparseGridForce>(&setup.component_interps, *exp.model);
    setup.energy = std::make_unique<ExactEnergy>(*exp.model);
  }
  return setup;
}

void write_chain_csv(const std::string& path, const ChainResult& result) {
  const Eigen::Index b = result.samples.rows();
  const Eigen::Index d = result.samples.cols();
  std::vector<std::string> columns;
  columns.push_back("iter");
  for (Eigen::Index k = 0; k < d; ++k) columns.push_back("q_" + std::to_string(k + 1));
  columns.push_back("accepted");
  columns.push_back("dH");
  columns.push_back("seconds");
  Eigen::MatrixXd rows(b, d + 4);
  for (Eigen::Index i = 0; i < b; ++i) {
    rows(i, 0) = static_cast<double>(i + 1);
    rows.block(i, 1, 1, d) = result.samples.row(i);
    rows(i, d + 1) = result.accepted[static_cast<size_t>(i)] ? 1.0 : 0.0;
    rows(i, d + 2) = result.delta_h[static_cast<size_t>(i)];
    rows(i, d + 3) = result.iter_seconds[static_cast<size_t>(i)];
  }
  write_csv(path, columns, rows);
}

ChainResult read_chain_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  const int iter = table.column_index("iter");
  const int accepted = table.column_index("accepted");
  const int dh = table.column_index("dH");
  const int seconds = table.column_index("seconds");
  if (iter < 0 || accepted < 0 || dh < 0 || seconds < 0)
    throw ValidationError("chain csv " + path + ": missing schema columns");
  const Eigen::Index b = table.rows.rows();
  const Eigen::Index d = table.rows.cols() - 4;
  if (d < 1) throw ValidationError("chain csv " + path + ": no parameter columns");

  ChainResult result;
  result.samples.resize(b, d);
  for (Eigen::Index k = 0; k < d; ++k)
    result.samples.col(k) = table.column("q_" + std::to_string(k + 1));
  result.accepted.resize(static_cast<size_t>(b));
  result.delta_h.resize(static_cast<size_t>(b));
  result.iter_seconds.resize(static_cast<size_t>(b));
  for (Eigen::Index i = 0; i < b; ++i) {
    result.accepted[static_cast<size_t>(i)] = table.rows(i, accepted) != 0.0 ? 1 : 0;
    result.delta_h[static_cast<size_t>(i)] = table.rows(i, dh);
    result.iter_seconds[static_cast<size_t>(i)] = table.rows(i, seconds);
    result.sampling_seconds += table.rows(i, seconds);
  }
  result.total_seconds = result.sampling_seconds;
  return result;
}

RunOutcome run_sample(const Experiment& exp, int chains, int threads) {
  if (chains < 1) throw ValidationError("run_sample: chains must be >= 1");
  fs::create_directories(exp.config.output_dir);

  SamplerSetup setup = load_sampler(exp);
  RunOutcome out;
  out.precompute_seconds = read_precompute_seconds(exp.config);

  const Eigen::VectorXd q1 = exp.start_position(setup.has_domain ? &setup.domain : nullptr);
  std::vector<ChainResult> results(static_cast<size_t>(chains));
  // Chains are independent: one seed and one result slot each.
  parallel_over(chains, std::min(threads, chains), [&](Eigen::Index i) {
    HmcConfig cfg = exp.config.hmc;
    cfg.seed = exp.config.hmc.seed + static_cast<std::uint64_t>(i);
    results[static_cast<size_t>(i)] = sample(cfg, *setup.force, *setup.energy, q1);
  });

  json chains_json = json::array();
  for (int i = 0; i < chains; ++i) {
    const std::string path = exp.config.output_dir + "/chain_" + std::to_string(i) + ".csv";
    write_chain_csv(path, results[static_cast<size_t>(i)]);
    out.chain_paths.push_back(path);
    out.reports.push_back(efficiency_report(results[static_cast<size_t>(i)]));
    out.sampling_seconds += results[static_cast<size_t>(i)].sampling_seconds;
    out.fallbacks += results[static_cast<size_t>(i)].force_fallbacks;
    chains_json.push_back({{"path", path}, {"hash", hash_file(path)}});
  }

  json manifest;
  manifest["config_hash"] = exp.config.config_hash();
  manifest["sampler"] = exp.config.sampler;
  manifest["model"] = exp.config.model.name;
  manifest["dataset"] = {{"path", exp.dataset_path}, {"hash", exp.dataset_hash}};
  json caches = json::array();
  std::vector<std::string> cache_paths;
  if (exp.config.needs_grid()) cache_paths.push_back(grid_cache_path(exp.config));
  if (exp.config.needs_sparse()) {
    if (exp.config.sparse.force_mode == "gradient")
      cache_paths.push_back(sparse_cache_path(exp.config, -1));
    else
      for (int k = 0; k < exp.model->dim(); ++k)
        cache_paths.push_back(sparse_cache_path(exp.config, k));
  }
  for (const auto& p : cache_paths) caches.push_back({{"path", p}, {"hash", hash_file(p)}});
  manifest["caches"] = caches;
  manifest["chains"] = chains_json;
  manifest["timings"] = {{"precompute_s", out.precompute_seconds},
                         {"sampling_s", out.sampling_seconds}};
  manifest["fallbacks"] = out.fallbacks;
  out.manifest_path = exp.config.output_dir + "/manifest.json";
  std::ofstream mf(out.manifest_path);
  mf << manifest.dump(2);
  return out;
}

void verify_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ValidationError("manifest " + path + ": invalid json: " + e.what());
  }
  auto check = [&](const json& entry) {
    const std::string file = entry.at("path").get<std::string>();
    const std::string expected = entry.at("hash").get<std::string>();
    if (hash_file(file) != expected)
      throw ValidationError("manifest " + path + ": hash mismatch for " + file);
  };
  if (doc.contains("dataset")) check(doc["dataset"]);
  for (const auto& e : doc.value("caches", json::array())) check(e);
  for (const auto& e : doc.value("chains", json::array())) check(e);
}

}  // namespace gridhmc
