#include "gridhmc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace gridhmc {

namespace {

void check_chain(const Eigen::VectorXd& chain) {
  if (chain.size() < 10) throw ValidationError("diagnostics: need at least 10 samples");
  if (!chain.allFinite()) throw ValidationError("diagnostics: chain has non-finite values");
}

}  // namespace

std::vector<double> autocorrelation(const Eigen::VectorXd& chain, int max_lag) {
  check_chain(chain);
  const Eigen::Index b = chain.size();
  if (max_lag < 1 || max_lag >= b)
    throw ValidationError("autocorrelation: max_lag out of range");
  const Eigen::VectorXd c = chain.array() - chain.mean();
  const double gamma0 = c.squaredNorm();
  if (gamma0 == 0.0) throw NumericalError("autocorrelation: zero-variance chain");
  std::vector<double> rho(static_cast<size_t>(max_lag));
  for (int k = 1; k <= max_lag; ++k)
    rho[static_cast<size_t>(k - 1)] = c.head(b - k).dot(c.tail(b - k)) / gamma0;
  return rho;
}

EssResult ess(const Eigen::VectorXd& chain, int max_lag) {
  check_chain(chain);
  const Eigen::Index b = chain.size();
  const Eigen::VectorXd c = chain.array() - chain.mean();
  const double gamma0 = c.squaredNorm();
  if (gamma0 == 0.0) return {static_cast<double>(b), true, false};

  if (max_lag < 0 || max_lag > b - 1) max_lag = static_cast<int>(b - 1);
  auto rho = [&](int k) {
    if (k == 0) return 1.0;
    return c.head(b - k).dot(c.tail(b - k)) / gamma0;
  };

  // Geyer truncation over adjacent-lag pairs, computed lazily: stop at the
  // first non-positive pair sum and never let the kept sums increase.
  double tau = -1.0;
  double prev = std::numeric_limits<double>::infinity();
  for (int m = 0; 2 * m + 1 <= max_lag; ++m) {
    double pair = rho(2 * m) + rho(2 * m + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev);
    prev = pair;
    tau += 2.0 * pair;
  }
  // Floor keeps perfectly antithetic chains finite and positive.
  tau = std::max(tau, 1.0 / static_cast<double>(b));

  EssResult result;
  result.value = static_cast<double>(b) / tau;
  result.exceeded_b = result.value > static_cast<double>(b);
  return result;
}

EfficiencyReport efficiency_report(const Eigen::MatrixXd& samples,
                                   const std::vector<std::uint8_t>& accepted,
                                   const std::vector<double>& iter_seconds) {
  const Eigen::Index b = samples.rows();
  if (b < 100) throw ValidationError("efficiency_report: need at least 100 samples");
  if (static_cast<Eigen::Index>(accepted.size()) != b ||
      static_cast<Eigen::Index>(iter_seconds.size()) != b)
    throw ValidationError("efficiency_report: column length mismatch");

  EfficiencyReport report;
  report.samples = static_cast<int>(b);
  report.ess.resize(samples.cols());
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    EssResult r = ess(samples.col(j));
    report.ess[j] = r.value;
    report.ess_detail.push_back(r);
  }
  report.acceptance_rate =
      std::accumulate(accepted.begin(), accepted.end(), 0.0) / static_cast<double>(b);
  report.total_seconds = std::accumulate(iter_seconds.begin(), iter_seconds.end(), 0.0);
  report.seconds_per_iteration = report.total_seconds / static_cast<double>(b);
  report.min_ess_per_second = report.ess.minCoeff() / report.total_seconds;
  return report;
}

EfficiencyReport efficiency_report(const ChainResult& result) {
  return efficiency_report(result.samples, result.accepted, result.iter_seconds);
}

}  // namespace gridhmc
