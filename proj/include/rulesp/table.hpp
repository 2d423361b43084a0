#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "rulesp/text.hpp"

namespace rulesp {

enum class ColumnType { Text, Number };

const char* to_string(ColumnType t);
ColumnType column_type_from_string(const std::string& s);

/// A web table: the world a query executes against. Immutable after
/// construction; the constructor validates shape, name uniqueness and
/// numeric columns, and precomputes normalized forms used everywhere else.
class Table {
 public:
  Table() = default;
  Table(std::string id, std::vector<std::string> header, std::vector<ColumnType> types,
        std::vector<std::vector<std::string>> rows);

  const std::string& id() const { return id_; }
  const std::vector<std::string>& header() const { return header_; }
  const std::vector<ColumnType>& column_types() const { return types_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

  std::size_t num_columns() const { return header_.size(); }
  std::size_t num_rows() const { return rows_.size(); }
  ColumnType type(std::size_t col) const { return types_.at(col); }
  bool is_numeric(std::size_t col) const { return types_.at(col) == ColumnType::Number; }

  /// Normalized column name, e.g. "Gold Medals" -> "gold medals".
  const std::string& column_name(std::size_t col) const { return names_.at(col); }
  /// Tokens of the normalized column name.
  const Tokens& column_tokens(std::size_t col) const { return name_tokens_.at(col); }
  std::optional<std::size_t> find_column(const std::string& normalized_name) const;

  const std::string& cell(std::size_t row, std::size_t col) const { return rows_.at(row).at(col); }
  const std::string& normalized_cell(std::size_t row, std::size_t col) const {
    return norm_cells_.at(row).at(col);
  }
  /// Numeric value of a NUMBER cell.
  double numeric_cell(std::size_t row, std::size_t col) const { return numbers_.at(row).at(col); }

  /// True if some cell of `col` normalizes to `normalized_value`.
  bool column_contains(std::size_t col, const std::string& normalized_value) const;

 private:
  std::string id_;
  std::vector<std::string> header_;
  std::vector<ColumnType> types_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::string> names_;
  std::vector<Tokens> name_tokens_;
  std::vector<std::vector<std::string>> norm_cells_;
  std::vector<std::vector<double>> numbers_;
};

}  // namespace rulesp
