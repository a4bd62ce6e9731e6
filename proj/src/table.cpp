#include "giantatom/table.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "giantatom/error.hpp"

namespace giantatom {

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::InvalidArgument, "cannot open '" + tmp.string() + "' for writing");
    out << content;
    if (!out.flush()) throw Error(ErrorKind::InvalidArgument, "write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

void ObservableTable::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size()) {
    throw Error(ErrorKind::DimensionMismatch, "row has " + std::to_string(row.size()) +
                                                  " cells, table has " +
                                                  std::to_string(columns.size()) + " columns");
  }
  rows.push_back(std::move(row));
}

void ObservableTable::add_row(std::initializer_list<double> values) {
  add_row(std::vector<Cell>(values.begin(), values.end()));
}

int ObservableTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  return -1;
}

std::vector<double> ObservableTable::column(const std::string& name) const {
  const int c = column_index(name);
  if (c < 0) throw Error(ErrorKind::InvalidArgument, "no column '" + name + "'");
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    const auto* v = std::get_if<double>(&row[c]);
    if (!v) throw Error(ErrorKind::InvalidArgument, "column '" + name + "' is not numeric");
    out.push_back(*v);
  }
  return out;
}

std::string ObservableTable::to_csv() const {
  std::ostringstream out;
  if (!preamble.empty()) {
    std::istringstream lines(preamble);
    std::string line;
    while (std::getline(lines, line)) out << "# " << line << '\n';
  }
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      if (const auto* v = std::get_if<double>(&row[i])) {
        out << format_double(*v);
      } else {
        out << std::get<std::string>(row[i]);
      }
    }
    out << '\n';
  }
  return out.str();
}

void ObservableTable::write_csv(const std::string& path) const { write_file_atomic(path, to_csv()); }

}  // namespace giantatom
