#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gridhmc/approx_energy.hpp"
#include "gridhmc/config.hpp"
#include "gridhmc/diagnostics.hpp"
#include "gridhmc/domain_finder.hpp"
#include "gridhmc/force_grid.hpp"
#include "gridhmc/sparse_grid.hpp"

namespace gridhmc {

// A config materialized into data + model. The dataset is either read from
// the configured path or generated and written into the output directory so
// every run is re-creatable from files on disk.
struct Experiment {
  ExperimentConfig config;
  CsvTable dataset;
  std::string dataset_path;
  std::string dataset_hash;
  std::unique_ptr<PotentialModel> model;

  Eigen::VectorXd start_position(const DomainBox* box) const;
};

Experiment prepare_experiment(const ExperimentConfig& config);

std::unique_ptr<PotentialModel> build_model(const ModelConfig& config, const CsvTable& dataset);

// Domain of interest per the [domain] section: the configured box, the
// Laplace box at coverage p, or the hull of an exact-force burn-in run.
DomainBox resolve_domain(const Experiment& exp);

// Fingerprint recorded in cache files: model identity + domain request +
// approximation spec.
std::string cache_fingerprint(const Experiment& exp);
std::vector<int> grid_cells(const GridSectionConfig& grid, const DomainBox& box);

struct PrecomputeOutcome {
  std::vector<std::string> cache_paths;
  double seconds = 0.0;
  bool reused = false;
};

// Builds (or reuses) the force map / interpolant cache for the configured
// sampler. Rebuild only happens when the cache is absent or force_rebuild is
// set; a fingerprint mismatch without force_rebuild is an error.
PrecomputeOutcome run_precompute(const Experiment& exp, bool force_rebuild, int threads);

// Providers backed by loaded caches; keeps the loaded objects alive.
struct SamplerSetup {
  std::unique_ptr<ForceGrid> grid;
  std::unique_ptr<SparseInterpolant> potential_interp;
  std::vector<SparseInterpolant> component_interps;
  std::unique_ptr<ForceProvider> force;
  std::unique_ptr<EnergyProvider> energy;
  DomainBox domain;
  bool has_domain = false;
};

SamplerSetup load_sampler(const Experiment& exp);

struct RunOutcome {
  std::vector<std::string> chain_paths;
  std::vector<EfficiencyReport> reports;
  double precompute_seconds = 0.0;
  double sampling_seconds = 0.0;
  std::uint64_t fallbacks = 0;
  std::string manifest_path;
};

// Runs the configured sampler against caches written by run_precompute,
// then writes chain CSVs and the run manifest. Caches must already exist.
RunOutcome run_sample(const Experiment& exp, int chains, int threads);

void write_chain_csv(const std::string& path, const ChainResult& result);
ChainResult read_chain_csv(const std::string& path);

// Manifest integrity: every referenced file must exist and match its hash.
void verify_manifest(const std::string& path);

}  // namespace gridhmc
