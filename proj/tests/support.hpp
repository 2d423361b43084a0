#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rulesp/errors.hpp"
#include "rulesp/executor.hpp"
#include "rulesp/optim.hpp"
#include "rulesp/params.hpp"
#include "rulesp/rule_engine.hpp"
#include "rulesp/synthetic.hpp"
#include "rulesp/sql.hpp"
#include "rulesp/table.hpp"

namespace rulesp::testing {

/// Fresh directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("rulesp-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Table t1() {
  return Table("t1", {"Nation", "Gold", "Rank"}, {ColumnType::Text, ColumnType::Number, ColumnType::Number},
               {{"france", "3", "1"}, {"italy", "2", "2"}, {"spain", "2", "3"}});
}

inline constexpr std::size_t kNation = 0, kGold = 1, kRank = 2;

/// Random table with at most 6 rows and 6 columns. Cells are lowercase words
/// or small integers, so their normalized form is the cell itself.
inline Table random_table(std::mt19937_64& rng, const std::string& id = "r") {
  static const std::vector<std::string> words = {"red", "blue", "green", "oak", "pine", "lima", "oslo", "rome"};
  std::uniform_int_distribution<int> dim(1, 6), coin(0, 1), num(0, 5), word(0, static_cast<int>(words.size()) - 1);
  int cols = dim(rng), rows = dim(rng) - 1;
  std::vector<std::string> header;
  std::vector<ColumnType> types;
  for (int c = 0; c < cols; ++c) {
    header.push_back("col" + std::to_string(c));
    types.push_back(coin(rng) ? ColumnType::Number : ColumnType::Text);
  }
  std::vector<std::vector<std::string>> cells(rows);
  for (auto& row : cells)
    for (int c = 0; c < cols; ++c) {
      bool numeric_text = types[c] == ColumnType::Text && num(rng) == 0;
      row.push_back(types[c] == ColumnType::Number || numeric_text ? std::to_string(num(rng)) : words[word(rng)]);
    }
  return Table(id, header, types, cells);
}

/// Random query passing validate(); values come from the table's cells, or
/// from a small numeric range for comparisons.
inline SQLQuery random_query(std::mt19937_64& rng, const Table& t) {
  std::uniform_int_distribution<std::size_t> col(0, t.num_columns() - 1);
  std::uniform_int_distribution<int> agg(0, 5), nconds(0, 2), op(0, 2), num(-1, 6);
  SQLQuery q;
  q.sel_col = col(rng);
  do {
    q.agg = agg_from_int(agg(rng));
  } while (is_numeric_agg(q.agg) && !t.is_numeric(q.sel_col));
  int n = nconds(rng);
  for (int i = 0; i < n; ++i) {
    Condition c;
    c.col = col(rng);
    c.op = op_from_int(op(rng));
    if (c.op == Op::Eq && t.num_rows() > 0) {
      std::uniform_int_distribution<std::size_t> row(0, t.num_rows() - 1);
      c.value = t.cell(row(rng), c.col);
    } else {
      c.value = std::to_string(num(rng));
    }
    if (std::find(q.conds.begin(), q.conds.end(), c) == q.conds.end()) q.conds.push_back(c);
  }
  return q;
}

/// Outcome of the brute-force interpreter.
struct OracleResult {
  bool empty_aggregate = false;
  std::optional<double> scalar;
  std::vector<std::string> cells;  // sorted
};

inline std::optional<double> oracle_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return std::nullopt;
  return v;
}

/// Row-by-row interpreter written against the raw cells, independent of the
/// library's executor.
inline OracleResult oracle_execute(const SQLQuery& q, const Table& t) {
  std::vector<std::string> picked;
  for (std::size_t r = 0; r < t.num_rows(); ++r) {
    bool keep = true;
    for (const auto& c : q.conds) {
      const std::string& cell = t.rows()[r][c.col];
      auto cv = oracle_number(cell);
      auto vv = oracle_number(c.value);
      bool holds;
      if (c.op == Op::Eq)
        holds = t.column_types()[c.col] == ColumnType::Number && vv ? (cv && *cv == *vv) : cell == c.value;
      else if (!cv)
        holds = false;
      else
        holds = c.op == Op::Gt ? *cv > *vv : *cv < *vv;
      if (!holds) keep = false;
    }
    if (keep) picked.push_back(t.rows()[r][q.sel_col]);
  }
  OracleResult out;
  if (q.agg == Agg::None) {
    out.cells = picked;
    std::sort(out.cells.begin(), out.cells.end());
    return out;
  }
  if (q.agg == Agg::Count) {
    out.scalar = static_cast<double>(picked.size());
    return out;
  }
  if (picked.empty() && q.agg != Agg::Sum) {
    out.empty_aggregate = true;
    return out;
  }
  double acc = q.agg == Agg::Sum || q.agg == Agg::Avg ? 0.0 : *oracle_number(picked[0]);
  for (const auto& p : picked) {
    double v = *oracle_number(p);
    if (q.agg == Agg::Max) acc = std::max(acc, v);
    if (q.agg == Agg::Min) acc = std::min(acc, v);
    if (q.agg == Agg::Sum || q.agg == Agg::Avg) acc += v;
  }
  if (q.agg == Agg::Avg) acc /= static_cast<double>(picked.size());
  out.scalar = acc;
  return out;
}

/// True when execute() and the interpreter agree, including on EmptyAggregate.
inline bool executor_agrees(const SQLQuery& q, const Table& t) {
  OracleResult want = oracle_execute(q, t);
  Answer got;
  try {
    got = execute(q, t);
  } catch (const EmptyAggregate&) {
    return want.empty_aggregate;
  }
  if (want.empty_aggregate) return false;
  if (want.scalar) return got.kind == Answer::Kind::Scalar && got.scalar && std::abs(*got.scalar - *want.scalar) < 1e-9;
  if (got.kind != Answer::Kind::CellSet || !got.cells) return false;
  auto cells = *got.cells;
  std::sort(cells.begin(), cells.end());
  return cells == want.cells;
}

/// One 1x1 block holding `value`.
inline ParameterSet scalar_params(double value) {
  ParameterSet p;
  p.add("theta", 1, 1);
  p[0](0, 0) = value;
  return p;
}

/// L(theta) = theta^2, independent of the batch.
inline LossFn square_loss() {
  return [](const ParameterSet& p, std::span<const Example>) {
    LossGrad lg{p[0](0, 0) * p[0](0, 0), p.zeros_like()};
    lg.grad[0](0, 0) = 2 * p[0](0, 0);
    return lg;
  };
}

struct FdCheck {
  std::size_t checked = 0;
  double max_relative_error = 0;
};

/// Compares analytic gradient coordinates against central differences of
/// `f`. Coordinates whose analytic and numeric gradients are both below
/// `floor` are skipped because their relative error is pure round-off.
inline FdCheck finite_difference_check(const std::function<double(const ParameterSet&)>& f, const ParameterSet& at,
                                       const ParameterSet& grad, const std::vector<std::size_t>& coords,
                                       double h = 1e-5, double floor = 1e-7) {
  FdCheck out;
  for (std::size_t k : coords) {
    ParameterSet plus = at, minus = at;
    plus.at(k) += h;
    minus.at(k) -= h;
    double numeric = (f(plus) - f(minus)) / (2 * h);
    double analytic = grad.at(k);
    double scale = std::max(std::abs(numeric), std::abs(analytic));
    if (scale < floor) continue;
    ++out.checked;
    out.max_relative_error = std::max(out.max_relative_error, std::abs(numeric - analytic) / scale);
  }
  return out;
}

/// `n` distinct coordinates with a gradient of magnitude at least `min_abs`.
inline std::vector<std::size_t> informative_coords(const ParameterSet& grad, std::size_t n, std::uint64_t seed,
                                                   double min_abs = 1e-4) {
  std::vector<std::size_t> pool;
  for (std::size_t k = 0; k < grad.size(); ++k)
    if (std::abs(grad.at(k)) >= min_abs) pool.push_back(k);
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  if (pool.size() > n) pool.resize(n);
  return pool;
}

/// Small synthetic corpus: `tables` training tables, `questions` questions.
inline SyntheticCorpus small_corpus(std::size_t tables, std::size_t questions, std::uint64_t seed = 7) {
  SyntheticSpec spec;
  spec.train = {tables, questions};
  spec.dev = {3, 60};
  spec.test = {3, 60};
  spec.seed = seed;
  return generate_synthetic_corpus(spec);
}

/// Rule-labelled pairs of the covered questions of `ds`, at most `limit`.
inline std::vector<Example> rule_pairs(const Dataset& ds, std::size_t limit) {
  RuleEngine rules;
  std::vector<Example> out;
  for (const auto& ex : ds.examples) {
    if (out.size() == limit) break;
    RuleOutput r = rules.apply(ex.question, ds.table_of(ex));
    if (!r.covered()) continue;
    out.push_back({ex.question, ex.table_id, r.lf, Provenance::Rule, true});
  }
  return out;
}

/// Pseudo pairs with random (valid) logical forms over the same questions.
inline std::vector<Example> noisy_pairs(const Dataset& ds, std::size_t n, std::uint64_t seed, Provenance prov) {
  std::mt19937_64 rng(seed);
  std::vector<Example> out;
  for (std::size_t i = 0; i < n && i < ds.size(); ++i) {
    const auto& ex = ds.examples[i];
    out.push_back({ex.question, ex.table_id, random_query(rng, ds.table_of(ex)), prov, ex.covered});
  }
  return out;
}

}  // namespace rulesp::testing
