#include "gridhmc/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "gridhmc/errors.hpp"

namespace gridhmc {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int CsvTable::column_index(const std::string& name) const {
  for (size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  return -1;
}

Eigen::VectorXd CsvTable::column(const std::string& name) const {
  const int idx = column_index(name);
  if (idx < 0) throw ValidationError("csv: missing column '" + name + "'");
  return rows.col(idx);
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open csv file: " + path);

  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty csv file: " + path);
  {
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) table.columns.push_back(cell);
  }
  if (table.columns.empty()) throw ValidationError("csv header has no columns: " + path);

  std::vector<double> values;
  Eigen::Index n_rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    size_t n_cells = 0;
    while (std::getline(row, cell, ',')) {
      size_t used = 0;
      double v;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw ValidationError("csv: non-numeric cell '" + cell + "' in " + path);
      }
      values.push_back(v);
      ++n_cells;
    }
    if (n_cells != table.columns.size())
      throw ValidationError("csv: ragged row in " + path);
    ++n_rows;
  }

  table.rows.resize(n_rows, static_cast<Eigen::Index>(table.columns.size()));
  for (Eigen::Index i = 0; i < n_rows; ++i)
    for (Eigen::Index j = 0; j < table.rows.cols(); ++j)
      table.rows(i, j) = values[static_cast<size_t>(i * table.rows.cols() + j)];
  return table;
}

void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const Eigen::MatrixXd& rows) {
  if (rows.size() > 0 && rows.cols() != static_cast<Eigen::Index>(columns.size()))
    throw ValidationError("csv write: header/row width mismatch");
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write csv file: " + path);
  for (size_t j = 0; j < columns.size(); ++j)
    out << columns[j] << (j + 1 < columns.size() ? "," : "\n");
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    for (Eigen::Index j = 0; j < rows.cols(); ++j)
      out << format_double(rows(i, j)) << (j + 1 < rows.cols() ? "," : "\n");
}

}  // namespace gridhmc
