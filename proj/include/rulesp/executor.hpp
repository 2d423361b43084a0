#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rulesp/dataset.hpp"
#include "rulesp/sql.hpp"
#include "rulesp/table.hpp"

namespace rulesp {

/// Denotation of a query: a scalar for COUNT/MAX/MIN/SUM/AVG, otherwise the
/// multiset of projected cells.
struct Answer {
  enum class Kind { Scalar, CellSet };

  Kind kind = Kind::CellSet;
  std::optional<double> scalar;
  std::optional<std::vector<std::string>> cells;

  static Answer of_scalar(double v) { return {Kind::Scalar, v, std::nullopt}; }
  static Answer of_cells(std::vector<std::string> c) { return {Kind::CellSet, std::nullopt, std::move(c)}; }
};

/// Filters rows by the conjunction of conditions, projects the select column
/// and applies the aggregator. Throws InvalidQuery or EmptyAggregate.
Answer execute(const SQLQuery& q, const Table& table);

/// Indices of rows satisfying every condition of `q`.
std::vector<std::size_t> matching_rows(const SQLQuery& q, const Table& table);

/// Same kind and equal content. Scalars are compared after rounding to a
/// 1e-6 grid; cell sets as multisets of normalized strings.
bool execution_match(const Answer& a, const Answer& b);

struct AccuracyReport {
  double covered = 0;
  double uncovered = 0;
  double overall = 0;
  std::size_t n_covered = 0;
  std::size_t n_uncovered = 0;
  std::size_t correct_covered = 0;
  std::size_t correct_uncovered = 0;
};

/// Execution accuracy split by each example's rule-coverage flag.
/// Abstentions (nullopt) and execution failures count as wrong.
AccuracyReport execution_accuracy(const std::vector<std::optional<SQLQuery>>& predictions,
                                  const std::vector<SQLQuery>& golds, const Dataset& dataset);

/// True iff `pred` executes and matches the denotation of `gold`.
bool denotation_correct(const std::optional<SQLQuery>& pred, const SQLQuery& gold, const Table& table);

}  // namespace rulesp
