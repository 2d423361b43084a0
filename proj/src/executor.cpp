#include "rulesp/executor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rulesp/errors.hpp"

namespace rulesp {
namespace {

bool condition_holds(const Condition& c, const Table& table, std::size_t row, const std::optional<double>& num_value,
                     const std::string& norm_value) {
  if (c.op == Op::Eq) {
    if (table.is_numeric(c.col) && num_value) return table.numeric_cell(row, c.col) == *num_value;
    return table.normalized_cell(row, c.col) == norm_value;
  }
  double cell = 0;
  if (table.is_numeric(c.col)) {
    cell = table.numeric_cell(row, c.col);
  } else {
    auto v = parse_decimal(table.cell(row, c.col));
    if (!v) return false;
    cell = *v;
  }
  return c.op == Op::Gt ? cell > *num_value : cell < *num_value;
}

}  // namespace

std::vector<std::size_t> matching_rows(const SQLQuery& q, const Table& table) {
  validate(q, table);
  std::vector<std::optional<double>> nums;
  std::vector<std::string> norms;
  for (const auto& c : q.conds) {
    nums.push_back(parse_decimal(c.value));
    norms.push_back(normalize(c.value));
    if (c.op != Op::Eq && !nums.back())
      throw InvalidQuery(std::string("operator ") + op_symbol(c.op) + " needs a numeric value, got '" + c.value + "'");
  }
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    bool ok = true;
    for (std::size_t i = 0; i < q.conds.size() && ok; ++i) ok = condition_holds(q.conds[i], table, r, nums[i], norms[i]);
    if (ok) rows.push_back(r);
  }
  return rows;
}

Answer execute(const SQLQuery& q, const Table& table) {
  auto rows = matching_rows(q, table);
  switch (q.agg) {
    case Agg::None: {
      std::vector<std::string> cells;
      cells.reserve(rows.size());
      for (auto r : rows) cells.push_back(table.cell(r, q.sel_col));
      return Answer::of_cells(std::move(cells));
    }
    case Agg::Count:
      return Answer::of_scalar(static_cast<double>(rows.size()));
    case Agg::Sum: {
      double s = 0;
      for (auto r : rows) s += table.numeric_cell(r, q.sel_col);
      return Answer::of_scalar(s);
    }
    case Agg::Max:
    case Agg::Min:
    case Agg::Avg: {
      if (rows.empty()) throw EmptyAggregate(std::string(agg_name(q.agg)) + " over an empty selection");
      double acc = q.agg == Agg::Max ? -std::numeric_limits<double>::infinity()
                                     : q.agg == Agg::Min ? std::numeric_limits<double>::infinity() : 0.0;
      for (auto r : rows) {
        double v = table.numeric_cell(r, q.sel_col);
        if (q.agg == Agg::Max) acc = std::max(acc, v);
        else if (q.agg == Agg::Min) acc = std::min(acc, v);
        else acc += v;
      }
      if (q.agg == Agg::Avg) acc /= static_cast<double>(rows.size());
      return Answer::of_scalar(acc);
    }
  }
  throw InvalidQuery("unknown aggregator");
}

bool execution_match(const Answer& a, const Answer& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == Answer::Kind::Scalar) {
    if (!a.scalar || !b.scalar) return false;
    return std::llround(*a.scalar * 1e6) == std::llround(*b.scalar * 1e6);
  }
  if (!a.cells || !b.cells) return false;
  if (a.cells->size() != b.cells->size()) return false;
  std::vector<std::string> x, y;
  for (const auto& c : *a.cells) x.push_back(normalize(c));
  for (const auto& c : *b.cells) y.push_back(normalize(c));
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  return x == y;
}

bool denotation_correct(const std::optional<SQLQuery>& pred, const SQLQuery& gold, const Table& table) {
  if (!pred) return false;
  try {
    return execution_match(execute(*pred, table), execute(gold, table));
  } catch (const Error&) {
    return false;
  }
}

AccuracyReport execution_accuracy(const std::vector<std::optional<SQLQuery>>& predictions,
                                  const std::vector<SQLQuery>& golds, const Dataset& dataset) {
  if (predictions.size() != golds.size() || golds.size() != dataset.examples.size())
    throw AlignmentError("predictions (" + std::to_string(predictions.size()) + "), golds (" +
                         std::to_string(golds.size()) + ") and examples (" +
                         std::to_string(dataset.examples.size()) + ") are not aligned");
  AccuracyReport rep;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const auto& ex = dataset.examples[i];
    bool ok = denotation_correct(predictions[i], golds[i], dataset.table_of(ex));
    if (ex.covered) {
      ++rep.n_covered;
      rep.correct_covered += ok;
    } else {
      ++rep.n_uncovered;
      rep.correct_uncovered += ok;
    }
  }
  auto frac = [](std::size_t k, std::size_t n) { return n ? static_cast<double>(k) / static_cast<double>(n) : 0.0; };
  rep.covered = frac(rep.correct_covered, rep.n_covered);
  rep.uncovered = frac(rep.correct_uncovered, rep.n_uncovered);
  rep.overall = frac(rep.correct_covered + rep.correct_uncovered, rep.n_covered + rep.n_uncovered);
  return rep;
}

}  // namespace rulesp
