#pragma once

#include <cstdint>
#include <filesystem>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "rulesp/meta_trainer.hpp"
#include "rulesp/synthetic.hpp"

namespace rulesp {

/// Dataset files in the WikiSQL line-delimited layout.
struct DataFiles {
  std::filesystem::path train_questions, train_tables;
  std::filesystem::path dev_questions, dev_tables;
  std::filesystem::path test_questions, test_tables;
};

struct ExperimentConfig {
  std::optional<SyntheticSpec> synthetic;
  std::optional<DataFiles> files;
  ModelConfig model;
  TrainConfig train;
  RuleConfig rule;
  std::optional<std::filesystem::path> keywords_file;
  std::vector<Regime> sweep_regimes{std::begin(kAllRegimes), std::end(kAllRegimes)};
  std::vector<std::uint64_t> sweep_seeds = {1, 2, 3};
  bool save_checkpoints = true;

  /// Same seed for model init and training streams.
  void set_seed(std::uint64_t seed);
};

/// Parses a JSON config; relative data paths resolve against `base_dir`.
/// Unknown keys and bad values raise ConfigError.
ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical JSON form of a config (the run-directory snapshot).
std::string config_to_json(const ExperimentConfig& config);

struct Splits {
  Dataset train, dev, test;
};

/// Synthetic or file-backed splits, with coverage flags set on every split.
/// Throws ConfigError for missing files.
Splits load_splits(const ExperimentConfig& config);

/// Trains config.train.regime and writes config.json, metrics.jsonl,
/// report.json and (optionally) per-epoch checkpoints under `out_dir`.
RegimeResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);
RegimeResult run_experiment(const std::filesystem::path& config_path, const std::filesystem::path& out_dir);

struct EvalResult {
  DevStats dev_stats;
  AccuracyReport dev, test;
};

/// Evaluates a saved state as the final system of `config.train.regime`.
/// Throws IncompatibleCheckpoint when the checkpoint belongs to other models.
EvalResult evaluate_checkpoint(const ExperimentConfig& config, const std::filesystem::path& checkpoint);

/// Writes {train,dev,test}.jsonl and {train,dev,test}.tables.jsonl.
void write_corpus(const Splits& splits, const std::filesystem::path& out_dir);

struct SweepRow {
  Regime regime;
  std::uint64_t seed;
  AccuracyReport dev, test;
};

/// Every (regime, seed) of the config sweep; runs of one seed share their
/// initialization. Writes sweep.jsonl and a plain-text summary table.
std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const std::filesystem::path& out_dir);

struct SweepSummary {
  Regime regime;
  double covered = 0, uncovered = 0, overall = 0;
};

/// Mean test accuracies per regime, in sweep order.
std::vector<SweepSummary> summarize(const std::vector<SweepRow>& rows);

/// One line-delimited metrics record.
std::string metrics_record(const EpochRecord& rec, std::uint64_t seed);

}  // namespace rulesp
