#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rulesp/dataset.hpp"
#include "rulesp/model_config.hpp"
#include "rulesp/params.hpp"
#include "rulesp/rule_engine.hpp"
#include "rulesp/sql.hpp"
#include "rulesp/vocab.hpp"

namespace rulesp {

enum class Tag { O = 0, B = 1, I = 2 };

/// Supervision targets of one (question, lf) pair for the parser heads.
struct ParserTargets {
  std::vector<Tag> tags;
  /// Question span of each condition value, parallel to lf.conds; nullopt
  /// when the value text does not occur in the question.
  std::vector<std::optional<TokenSpan>> spans;
};

/// IOB tags marking every condition value that can be located in the question.
ParserTargets parser_targets(const Tokens& question, const SQLQuery& lf);

/// Spans of an IOB sequence; a stray I opens a new span.
std::vector<TokenSpan> decode_iob(const std::vector<Tag>& tags);

/// Modular slot-filling parser. The object holds the architecture (config,
/// vocabulary and block layout); parameters are separate value snapshots.
class Parser {
 public:
  Parser(ModelConfig config, Vocab vocab);

  const ModelConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }
  /// Config, vocabulary and block shapes.
  std::uint64_t fingerprint() const;

  ParameterSet init() const { return init(config_.seed); }
  ParameterSet init(std::uint64_t seed) const;

  /// Summed negative log-likelihood of tagger and all heads, with gradient.
  /// Throws EmptyBatch; every example needs an lf.
  LossGrad loss(const ParameterSet& params, std::span<const Example> batch, const TableMap& tables) const;
  double loss_value(const ParameterSet& params, std::span<const Example> batch, const TableMap& tables) const;

  /// Always returns a valid query that executes on `table`.
  SQLQuery parse(const Tokens& question, const Table& table, const ParameterSet& params) const;

 private:

  double example_loss(const ParameterSet& params, ParameterSet* grads, const Example& ex, const Table& table) const;

  ModelConfig config_;
  Vocab vocab_;
  ParameterSet layout_;
};

}  // namespace rulesp
