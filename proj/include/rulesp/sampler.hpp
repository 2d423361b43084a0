#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rulesp/dataset.hpp"
#include "rulesp/sql.hpp"

namespace rulesp {

struct SamplerConfig {
  /// Relative weights of 0, 1 and 2 conditions.
  std::array<double, 3> cond_count_weights = {0.2, 0.6, 0.2};
  /// Probability of no aggregator; the rest is spread over the others that
  /// fit the chosen select column.
  double none_weight = 0.7;
  /// Probability that a condition on a NUMBER column uses > or < (split evenly).
  double comparison_weight = 0.4;
  /// Redraws allowed for a query that fails to execute.
  int max_attempts = 50;
};

struct SampledLF {
  SQLQuery lf;
  std::string table_id;
};

/// `n` valid, executable queries over uniformly chosen tables. Tables with
/// no rows cannot host one and are skipped with a warning.
std::vector<SampledLF> sample_logical_forms(const TableMap& tables, std::size_t n, std::uint64_t seed,
                                            const SamplerConfig& config = {},
                                            std::vector<std::string>* warnings = nullptr);

}  // namespace rulesp
