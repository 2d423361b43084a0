#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rulesp/sql.hpp"
#include "rulesp/table.hpp"
#include "rulesp/text.hpp"

namespace rulesp {

/// Where a (question, lf) pair came from. Gold marks an unlabeled question
/// read from a dataset file.
enum class Provenance { Gold, Rule, Self, QGen };

const char* to_string(Provenance p);

struct Example {
  Tokens question;
  std::string table_id;
  std::optional<SQLQuery> lf;
  Provenance provenance = Provenance::Gold;
  bool covered = false;

  friend bool operator==(const Example&, const Example&) = default;
};

using TableMap = std::map<std::string, Table>;

/// Questions plus the tables they refer to. Gold logical forms read from
/// files never populate Example::lf; they are held in `evaluation_gold`
/// (parallel to `examples`) and only the evaluator reads them.
struct Dataset {
  std::vector<Example> examples;
  TableMap tables;
  std::vector<std::optional<SQLQuery>> evaluation_gold;

  const Table& table_of(const Example& ex) const;
  std::size_t size() const { return examples.size(); }
  bool has_evaluation_gold() const { return !evaluation_gold.empty(); }
};

struct LoadOptions {
  /// Throw on the first bad record instead of collecting errors.
  bool strict = true;
  /// Retain gold logical forms for evaluation.
  bool keep_evaluation_gold = true;
};

struct LoadReport {
  std::size_t lines = 0;
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
};

/// Reads WikiSQL-format line-delimited questions and tables.
Dataset load_dataset(const std::filesystem::path& questions_path, const std::filesystem::path& tables_path,
                     const LoadOptions& options = {}, LoadReport* report = nullptr);

TableMap load_tables(const std::filesystem::path& tables_path, const LoadOptions& options = {},
                     LoadReport* report = nullptr);

void write_tables(const std::filesystem::path& path, const TableMap& tables);
/// Writes one record per example; gold is emitted from `evaluation_gold` when present.
void write_questions(const std::filesystem::path& path, const Dataset& dataset);

}  // namespace rulesp
