#include "rulesp/table.hpp"

#include <cmath>
#include <unordered_set>

#include "rulesp/errors.hpp"

namespace rulesp {

const char* to_string(ColumnType t) { return t == ColumnType::Number ? "real" : "text"; }

ColumnType column_type_from_string(const std::string& s) {
  std::string l = normalize(s);
  if (l == "real" || l == "number" || l == "numeric") return ColumnType::Number;
  if (l == "text" || l == "string") return ColumnType::Text;
  throw InvalidTable("unknown column type '" + s + "'");
}

Table::Table(std::string id, std::vector<std::string> header, std::vector<ColumnType> types,
             std::vector<std::vector<std::string>> rows)
    : id_(std::move(id)), header_(std::move(header)), types_(std::move(types)), rows_(std::move(rows)) {
  if (header_.empty()) throw InvalidTable("table '" + id_ + "' has no columns");
  if (types_.size() != header_.size())
    throw InvalidTable("table '" + id_ + "': types and header differ in length");

  std::unordered_set<std::string> seen;
  for (const auto& h : header_) {
    Tokens toks = tokenize(h);
    std::string n = normalize_tokens(toks);
    if (n.empty()) throw InvalidTable("table '" + id_ + "': empty column name '" + h + "'");
    if (!seen.insert(n).second)
      throw InvalidTable("table '" + id_ + "': duplicate normalized column name '" + n + "'");
    Tokens content;
    for (auto& t : toks)
      if (!is_punctuation(t)) content.push_back(std::move(t));
    names_.push_back(std::move(n));
    name_tokens_.push_back(std::move(content));
  }

  norm_cells_.reserve(rows_.size());
  numbers_.reserve(rows_.size());
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    const auto& row = rows_[r];
    if (row.size() != header_.size())
      throw InvalidTable("table '" + id_ + "': row " + std::to_string(r) + " has " +
                         std::to_string(row.size()) + " cells, expected " + std::to_string(header_.size()));
    std::vector<std::string> norm(row.size());
    std::vector<double> nums(row.size(), std::nan(""));
    for (std::size_t c = 0; c < row.size(); ++c) {
      norm[c] = normalize(row[c]);
      if (types_[c] == ColumnType::Number) {
        auto v = parse_decimal(row[c]);
        if (!v)
          throw InvalidTable("table '" + id_ + "': cell '" + row[c] + "' in NUMBER column '" + header_[c] +
                             "' is not a finite decimal");
        nums[c] = *v;
      }
    }
    norm_cells_.push_back(std::move(norm));
    numbers_.push_back(std::move(nums));
  }
}

std::optional<std::size_t> Table::find_column(const std::string& normalized_name) const {
  for (std::size_t c = 0; c < names_.size(); ++c)
    if (names_[c] == normalized_name) return c;
  return std::nullopt;
}

bool Table::column_contains(std::size_t col, const std::string& normalized_value) const {
  for (const auto& row : norm_cells_)
    if (row.at(col) == normalized_value) return true;
  return false;
}

}  // namespace rulesp
