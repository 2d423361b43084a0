#include "rulesp/sampler.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

#include "rulesp/errors.hpp"
#include "rulesp/executor.hpp"

namespace rulesp {
namespace {

std::optional<SQLQuery> draw(const Table& t, std::size_t n_conds, std::mt19937_64& rng, const SamplerConfig& cfg) {
  const std::size_t ncol = t.num_columns();
  if (n_conds + 1 > ncol) return std::nullopt;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  SQLQuery q;
  q.sel_col = std::uniform_int_distribution<std::size_t>(0, ncol - 1)(rng);
  if (unif(rng) >= cfg.none_weight) {
    std::vector<Agg> options = {Agg::Count};
    if (t.is_numeric(q.sel_col)) options = {Agg::Max, Agg::Min, Agg::Count, Agg::Sum, Agg::Avg};
    q.agg = options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
  }
  std::vector<std::size_t> others;
  for (std::size_t j = 0; j < ncol; ++j)
    if (j != q.sel_col) others.push_back(j);
  std::shuffle(others.begin(), others.end(), rng);
  const std::size_t row = std::uniform_int_distribution<std::size_t>(0, t.num_rows() - 1)(rng);
  for (std::size_t c = 0; c < n_conds; ++c) {
    Condition cond;
    cond.col = others[c];
    cond.value = t.cell(row, cond.col);
    if (t.is_numeric(cond.col) && unif(rng) < cfg.comparison_weight) cond.op = unif(rng) < 0.5 ? Op::Gt : Op::Lt;
    q.conds.push_back(std::move(cond));
  }
  try {
    execute(q, t);
  } catch (const Error&) {
    return std::nullopt;
  }
  return q;
}

}  // namespace

std::vector<SampledLF> sample_logical_forms(const TableMap& tables, std::size_t n, std::uint64_t seed,
                                            const SamplerConfig& config, std::vector<std::string>* warnings) {
  if (n == 0) throw std::invalid_argument("sample_logical_forms: n must be positive");
  if (tables.empty()) throw std::invalid_argument("sample_logical_forms: no tables");
  std::vector<const Table*> pool;
  for (const auto& [id, t] : tables) {
    if (t.num_rows() == 0 || t.num_columns() == 0) {
      if (warnings) warnings->push_back("table '" + id + "' has no rows; skipped by the sampler");
      continue;
    }
    pool.push_back(&t);
  }
  if (pool.empty()) throw InvalidTable("no table can host a sampled query");

  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> n_conds_dist(config.cond_count_weights.begin(),
                                                       config.cond_count_weights.end());
  std::uniform_int_distribution<std::size_t> table_dist(0, pool.size() - 1);
  std::vector<SampledLF> out;
  out.reserve(n);
  while (out.size() < n) {
    const Table& t = *pool[table_dist(rng)];
    std::size_t k = n_conds_dist(rng);
    std::optional<SQLQuery> q;
    for (int a = 0; a < config.max_attempts && !q; ++a) q = draw(t, k, rng, config);
    // Narrow tables cannot hold k distinct condition columns besides the select column.
    while (!q && k > 0) q = draw(t, --k, rng, config);
    if (!q) {
      if (warnings) warnings->push_back("no executable query drawn for table '" + t.id() + "'");
      continue;
    }
    out.push_back({std::move(*q), t.id()});
  }
  return out;
}

}  // namespace rulesp
