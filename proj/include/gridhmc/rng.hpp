#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <random>

namespace gridhmc {

// Per-chain random stream. All randomness in a chain flows through this class
// so that the stream position depends only on the number of uniform()/normal()
// calls made so far: uniform() consumes exactly one engine draw and normal()
// exactly two (Box-Muller, no cached second value). Two chains with the same
// seed therefore see identical momentum and accept/reject draws even when they
// run different force providers.
class ChainRng {
 public:
  explicit ChainRng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; two engine draws per call.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    return r * std::cos(2.0 * M_PI * u2);
  }

  Eigen::VectorXd normal_vector(int n) {
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z[i] = normal();
    return z;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace gridhmc
