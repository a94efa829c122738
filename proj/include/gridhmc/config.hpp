#pragma once

#include <Eigen/Core>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridhmc/hmc.hpp"
#include "gridhmc/models.hpp"

namespace gridhmc {

struct ModelConfig {
  std::string name;          // gaussian | logistic | banana | gp
  std::string dataset_path;  // used when not synthetic
  bool synthetic = false;
  Eigen::VectorXd true_params;
  int n = 100;
  std::uint64_t seed = 0;
  double sigma_y = 2.0;  // banana
  double sigma_beta = 1.0;
  Eigen::MatrixXd sigma, sigma0;  // gaussian
  Eigen::VectorXd mu0;
};

struct DomainConfig {
  std::string mode = "manual";  // manual | laplace | trajectory
  Eigen::VectorXd box_lo, box_hi;
  double p = 0.999;       // laplace coverage
  double padding = 0.1;   // trajectory expansion per side
  int burn_in_iters = 500;

  std::string serialize() const;  // canonical text for fingerprints
};

struct GridSectionConfig {
  bool present = false;
  Eigen::VectorXd cell_size;  // one entry broadcast or one per axis
  std::vector<int> cells;     // alternative to cell_size
};

struct SparseSectionConfig {
  bool present = false;
  int depth = 6;
  std::optional<double> tolerance;
  std::string force_mode = "gradient";  // gradient | components
};

struct ExperimentConfig {
  ModelConfig model;
  std::string sampler = "hmc";  // hmc | ghmc | sghmc | ghmc-complete | sghmc-complete
  HmcConfig hmc;
  Eigen::VectorXd q1;  // optional explicit start
  DomainConfig domain;
  GridSectionConfig grid;
  SparseSectionConfig sparse;
  std::string output_dir = "runs/out";

  std::string config_path;
  std::string raw_text;

  bool needs_grid() const { return sampler == "ghmc" || sampler == "ghmc-complete"; }
  bool needs_sparse() const { return sampler == "sghmc" || sampler == "sghmc-complete"; }
  bool approximate_correction() const {
    return sampler == "ghmc-complete" || sampler == "sghmc-complete";
  }
  std::string config_hash() const;
  void validate() const;
};

ExperimentConfig load_config(const std::string& path);

// Raw section/key access used by load_config; exposed for tests.
using IniSections = std::map<std::string, std::map<std::string, std::string>>;
IniSections parse_ini(const std::string& text);

Eigen::VectorXd parse_vector(const std::string& text);
Eigen::MatrixXd parse_matrix(const std::string& text);  // rows separated by ';'

}  // namespace gridhmc
