#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rulesp/dataset.hpp"
#include "rulesp/executor.hpp"
#include "rulesp/generator.hpp"
#include "rulesp/model_config.hpp"
#include "rulesp/optim.hpp"
#include "rulesp/parser.hpp"
#include "rulesp/phrase_table.hpp"
#include "rulesp/rule_engine.hpp"
#include "rulesp/sampler.hpp"

namespace rulesp {

enum class Regime { RuleOnly, Base, SelfTraining, QGenOnly, BT, BT_QC, BT_QC_MAML };

inline constexpr Regime kAllRegimes[] = {Regime::RuleOnly, Regime::Base,  Regime::SelfTraining,
                                         Regime::QGenOnly, Regime::BT,    Regime::BT_QC,
                                         Regime::BT_QC_MAML};

/// "RULE_ONLY", "BASE", ..., "BT_QC_MAML".
const char* to_string(Regime r);
/// Throws ConfigError.
Regime regime_from_string(const std::string& s);

enum class TaskKind { RuleCovered, RuleUncovered };

/// How the first-order meta-gradient is applied to theta.
enum class MetaOptimizer { Sgd, Adam };

struct TrainConfig {
  double alpha = 1e-3;
  double beta = 1e-3;
  std::size_t inner_steps = 1;
  std::size_t epochs = 15;
  double tau = 0.2;
  /// 0 means one per training question.
  std::size_t n_sampled_lfs = 0;
  std::size_t batch_size = 32;
  std::size_t meta_batch_size = 32;
  Regime regime = Regime::BT_QC_MAML;
  std::uint64_t seed = 1;

  /// Epochs of supervised training on D0 during initialization.
  std::size_t init_epochs = 20;
  /// Fine-tuning epochs for each task-specific model.
  std::size_t finalize_epochs = 5;
  /// Adam rate for initialization, monolithic fine-tuning and the generator.
  double lr = 5e-3;
  /// Gradient norm cap for Adam steps (0 = none).
  double clip_norm = 5.0;
  /// Gradient norm cap for inner, meta and finalization SGD steps (0 = none).
  double meta_clip_norm = 0.0;
  /// Passes over both tasks per training iteration.
  std::size_t episodes_per_iteration = 1;
  /// Sgd applies theta - beta * g; Adam feeds g to an Adam optimizer of rate beta.
  MetaOptimizer meta_optimizer = MetaOptimizer::Sgd;
  DecodeMode qgen_decode = DecodeMode::Sample;
  double qc_smoothing = kDefaultSmoothing;
  /// Keep the parameters of the iteration with the best dev accuracy.
  bool select_best_dev = true;
  SamplerConfig sampler;

  /// Throws ConfigError.
  void validate() const;
};

struct TrainerState {
  ParameterSet theta;
  ParameterSet theta_covered;
  ParameterSet theta_uncovered;
  ParameterSet gen;
  PhraseTable pt;
  std::vector<Example> d0;
  std::vector<Example> pool_self;
  std::vector<Example> pool_qgen;
  std::size_t epoch = 0;

  friend bool operator==(const TrainerState& a, const TrainerState& b);
};

/// Accuracies on the covered dev examples that drive test-phase routing.
struct DevStats {
  double rule_covered_acc = 0;
  double model_covered_acc = 0;
};

struct PoolCounts {
  std::size_t self = 0;
  std::size_t qgen = 0;
  std::size_t self_kept = 0;
  std::size_t qgen_kept = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  Regime regime = Regime::Base;
  AccuracyReport dev;
  PoolCounts pools;
  std::size_t meta_updates = 0;
};

/// theta after `steps` SGD steps of rate `alpha` on `batch`.
ParameterSet inner_update(const ParameterSet& theta, std::span<const Example> batch, const LossFn& loss, double alpha,
                          std::size_t steps, double clip_norm = 0);

/// First-order meta step: theta - beta * grad L(meta_batch) evaluated at theta_i.
ParameterSet meta_update(const ParameterSet& theta, const ParameterSet& theta_i, std::span<const Example> meta_batch,
                         const LossFn& loss, double beta, double clip_norm = 0);

/// Sets Example::covered from the rule engine for every example.
void mark_coverage(Dataset& dataset, const RuleEngine& rules);

/// Vocabulary over training questions and column names.
Vocab build_vocab(const Dataset& train, const ModelConfig& config);

/// Runs the training loop over the (unlabeled) training split. Parser and
/// generator architectures are fixed at construction.
class Trainer {
 public:
  Trainer(const Dataset& train, RuleEngine rules, ModelConfig model_config, TrainConfig config);

  const Parser& parser() const { return parser_; }
  const Generator& generator() const { return generator_; }
  const RuleEngine& rules() const { return rules_; }
  const TrainConfig& config() const { return config_; }
  void set_config(const TrainConfig& c);
  const Dataset& train() const { return train_; }

  LossFn parser_loss() const;
  LossFn generator_loss() const;

  /// D0 from the rule, parser and generator trained on it, phrase table
  /// seeded from it. Throws NoRuleCoverage.
  TrainerState initialize() const;

  struct Pools {
    std::vector<Example> self;
    std::vector<Example> qgen;
  };
  /// Self-inference pairs on rule-uncovered training questions and generated
  /// questions for sampled logical forms, as the regime requires.
  Pools generate_pseudo_data(const TrainerState& state) const;

  /// One pass of the training loop for config().regime.
  TrainerState train_iteration(TrainerState state, PoolCounts* counts = nullptr);

  /// Task models fine-tuned from theta; theta is untouched.
  TrainerState finalize_task_models(TrainerState state) const;

  /// Current training data of one task.
  std::vector<Example> task_data(const TrainerState& state, TaskKind kind) const;

  std::size_t meta_updates() const { return meta_updates_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  /// Drops optimizer state, counters and warnings before a new regime run.
  void reset();

 private:
  std::vector<Example> filtered(const TrainerState& state, const std::vector<Example>& pool) const;
  std::vector<Example> task_data_from(const TrainerState& state, TaskKind kind, const std::vector<Example>& self_kept,
                                      const std::vector<Example>& qgen_kept) const;
  void train_epochs(ParameterSet& params, std::span<const Example> data, const LossFn& loss, Adam& opt,
                    std::size_t epochs, std::uint64_t stream) const;
  std::uint64_t stream_seed(std::uint64_t epoch, std::uint64_t purpose) const;

  Dataset train_;
  RuleEngine rules_;
  TrainConfig config_;
  Parser parser_;
  Generator generator_;
  std::vector<std::size_t> uncovered_;
  std::unique_ptr<Adam> parser_opt_;
  std::unique_ptr<Adam> generator_opt_;
  std::unique_ptr<Adam> meta_opt_;
  std::size_t meta_updates_ = 0;
  std::vector<std::string> warnings_;
};

/// Test-phase prediction with dev-based routing on rule-covered questions.
SQLQuery predict(const Tokens& question, const Table& table, const TrainerState& state, const DevStats& dev_stats,
                 const Parser& parser, const RuleEngine& rules);

/// Parses every example with one parameter snapshot.
std::vector<std::optional<SQLQuery>> parse_all(const Parser& parser, const ParameterSet& params,
                                               const Dataset& dataset);

/// Rule output per example (nullopt where it abstains).
std::vector<std::optional<SQLQuery>> rule_all(const RuleEngine& rules, const Dataset& dataset);

/// Gold queries of an evaluation split; throws ConfigError when missing.
std::vector<SQLQuery> gold_of(const Dataset& dataset);

DevStats compute_dev_stats(const TrainerState& state, const Parser& parser, const RuleEngine& rules,
                           const Dataset& dev);

/// Final-system accuracy: the rule for RULE_ONLY, routed task models for
/// BT_QC_MAML, theta otherwise.
AccuracyReport evaluate_state(Regime regime, const TrainerState& state, const DevStats& dev_stats,
                              const Parser& parser, const RuleEngine& rules, const Dataset& split);

struct RegimeResult {
  Regime regime = Regime::Base;
  TrainerState state;
  DevStats dev_stats;
  AccuracyReport dev;
  AccuracyReport test;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&, const TrainerState&)>;

/// Trains one regime and evaluates it on dev and test. `initial`, when given,
/// replaces initialize() (it must come from an identically configured
/// trainer). dev/test coverage flags must already be set.
RegimeResult run_regime(Trainer& trainer, const Dataset& dev, const Dataset& test,
                        const TrainerState* initial = nullptr, const EpochCallback& on_epoch = {});

}  // namespace rulesp
