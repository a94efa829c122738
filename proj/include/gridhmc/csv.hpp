#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace gridhmc {

// Numeric CSV with a header row. Good enough for datasets and chain output;
// no quoting or escaping.
struct CsvTable {
  std::vector<std::string> columns;
  Eigen::MatrixXd rows;

  int column_index(const std::string& name) const;
  Eigen::VectorXd column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const Eigen::MatrixXd& rows);

// Shortest round-trip-exact decimal representation (%.17g).
std::string format_double(double v);

}  // namespace gridhmc
