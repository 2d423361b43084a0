#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rulesp/dataset.hpp"

namespace rulesp {

/// Column concept of the synthetic world: header name, a paraphrase sharing
/// no word with any header or cell, and a cell generator.
struct ColumnConcept {
  std::string name;
  std::string paraphrase;
  ColumnType type;
};

const std::vector<ColumnConcept>& synthetic_concepts();

struct SplitSize {
  std::size_t tables = 0;
  std::size_t questions = 0;
};

struct SyntheticSpec {
  SplitSize train{50, 2000};
  SplitSize dev{15, 500};
  SplitSize test{25, 1000};
  std::size_t min_rows = 6, max_rows = 12;
  std::size_t min_cols = 5, max_cols = 7;
  /// Fraction of questions phrased with header words and rule keywords.
  double coverage_knob = 0.6;
  /// Literal questions saying "how many <column>" for a plain lookup.
  double trap_rate = 0.08;
  /// Paraphrased questions name their where column by its paraphrase this often.
  double where_paraphrase_rate = 0.8;
  /// Conditions stated by their value alone, without the column.
  double bare_value_rate = 0.2;
  /// Paraphrased questions still state their aggregator with a rule keyword this often.
  double literal_agg_rate = 0.5;
  std::uint64_t seed = 7;

  /// Throws ConfigError.
  void validate() const;
};

struct SyntheticCorpus {
  Dataset train, dev, test;
};

/// Template questions over random tables; gold queries only in evaluation_gold.
SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec);

}  // namespace rulesp
