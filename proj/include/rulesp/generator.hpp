#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rulesp/dataset.hpp"
#include "rulesp/model_config.hpp"
#include "rulesp/params.hpp"
#include "rulesp/sql.hpp"
#include "rulesp/vocab.hpp"

namespace rulesp {

inline constexpr std::size_t kMaxQuestionLength = 40;

/// Encoder input for one logical form: one entry per word, with the slot it
/// came from (0 grammar symbol, 1 select column, 2 where column, 3 value).
struct GeneratorSource {
  std::vector<std::string> words;
  std::vector<int> slots;
};

GeneratorSource generator_source(const SQLQuery& lf, const Table& table);

struct GeneratedQuestion {
  Tokens tokens;
  /// Hit the length cap before emitting end-of-sentence.
  bool truncated = false;
};

enum class DecodeMode { Greedy, Sample };

/// Attentional encoder-decoder from linearized logical forms to question
/// tokens, with a copy distribution over source words.
class Generator {
 public:
  Generator(ModelConfig config, Vocab vocab);

  const ModelConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }
  std::uint64_t fingerprint() const;

  ParameterSet init() const { return init(config_.seed); }
  ParameterSet init(std::uint64_t seed) const;

  /// Token-level negative log-likelihood of each question (plus end marker)
  /// given its lf, with gradient. Throws EmptyBatch.
  LossGrad loss(const ParameterSet& params, std::span<const Example> batch, const TableMap& tables) const;
  double loss_value(const ParameterSet& params, std::span<const Example> batch, const TableMap& tables) const;

  /// `rng` is only drawn from in Sample mode.
  GeneratedQuestion generate(const SQLQuery& lf, const Table& table, const ParameterSet& params, DecodeMode mode,
                             std::mt19937_64* rng = nullptr) const;

 private:
  double example_loss(const ParameterSet& params, ParameterSet* grads, const Example& ex, const Table& table) const;

  ModelConfig config_;
  Vocab vocab_;
  ParameterSet layout_;
};

}  // namespace rulesp
