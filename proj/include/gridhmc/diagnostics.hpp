#pragma once

#include <Eigen/Core>
#include <vector>

#include "gridhmc/hmc.hpp"

namespace gridhmc {

// Biased (1/B) sample autocorrelations rho(1..max_lag) of a mean-centred
// series. Throws NumericalError on a zero-variance chain.
std::vector<double> autocorrelation(const Eigen::VectorXd& chain, int max_lag);

struct EssResult {
  double value = 0.0;
  bool degenerate = false;   // zero-variance column: reported as B, flagged
  bool exceeded_b = false;   // antithetic chains legitimately exceed B
};

// Effective sample size B / (1 + 2 sum rho) with Geyer-style truncation:
// adjacent-lag pair sums rho(2m) + rho(2m+1) are kept while positive and
// capped to be non-increasing. max_lag < 0 means no cap below B - 1.
EssResult ess(const Eigen::VectorXd& chain, int max_lag = -1);

struct EfficiencyReport {
  Eigen::VectorXd ess;  // per parameter
  std::vector<EssResult> ess_detail;
  double acceptance_rate = 0.0;
  double seconds_per_iteration = 0.0;
  double total_seconds = 0.0;
  double min_ess_per_second = 0.0;
  int samples = 0;
};

EfficiencyReport efficiency_report(const Eigen::MatrixXd& samples,
                                   const std::vector<std::uint8_t>& accepted,
                                   const std::vector<double>& iter_seconds);

EfficiencyReport efficiency_report(const ChainResult& result);

}  // namespace gridhmc
