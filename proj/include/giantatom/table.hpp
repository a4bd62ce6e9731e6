// table.hpp - column-oriented result records and deterministic CSV output.

#pragma once

#include <initializer_list>
#include <string>
#include <variant>
#include <vector>

namespace giantatom {

using Cell = std::variant<double, std::string>;

/// Round-trip exact text for a double (17 significant digits).
std::string format_double(double value);

/// Writes `content` to `path` via a temporary file and rename, so readers
/// never observe a partial file.
void write_file_atomic(const std::string& path, const std::string& content);

struct ObservableTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  // Emitted before the header, one "# " line per text line.
  std::string preamble;

  ObservableTable() = default;
  explicit ObservableTable(std::vector<std::string> names) : columns(std::move(names)) {}

  void add_row(std::vector<Cell> row);
  void add_row(std::initializer_list<double> values);
  std::size_t size() const { return rows.size(); }
  int column_index(const std::string& name) const;
  /// Numeric column by name; throws for text cells.
  std::vector<double> column(const std::string& name) const;

  std::string to_csv() const;
  void write_csv(const std::string& path) const;
};

}  // namespace giantatom
