#pragma once

#include <stdexcept>
#include <string>

namespace gridhmc {

// Invalid configuration, malformed files, fingerprint mismatches. CLI exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failures: non-SPD matrices, non-convergence, non-finite results. CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gridhmc
