#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rulesp/sql.hpp"
#include "rulesp/table.hpp"
#include "rulesp/text.hpp"

namespace rulesp {

/// Token-level keyword dictionary for aggregators and WHERE operators.
/// Phrases are stored tokenized and matched as contiguous subsequences.
class KeywordDictionary {
 public:
  /// The WikiSQL dictionary.
  static KeywordDictionary defaults();
  /// JSON: {"agg": {"count": ["how many", ...], ...}, "op": {">": [...], "<": [...]}}
  static KeywordDictionary from_file(const std::filesystem::path& path);
  static KeywordDictionary from_json_text(const std::string& text);

  KeywordDictionary() = default;
  KeywordDictionary(std::map<Agg, std::vector<std::string>> agg, std::map<Op, std::vector<std::string>> op);

  const std::map<Agg, std::vector<Tokens>>& agg_keywords() const { return agg_; }
  const std::map<Op, std::vector<Tokens>>& op_keywords() const { return op_; }

 private:
  std::map<Agg, std::vector<Tokens>> agg_;
  std::map<Op, std::vector<Tokens>> op_;
};

struct RuleConfig {
  KeywordDictionary dictionary = KeywordDictionary::defaults();
  /// Tokens before a value span searched for operator keywords.
  std::size_t op_window = 3;
  /// Minimum word overlap for picking among several columns holding a value.
  std::size_t resolve_min_overlap = 1;
  /// Words ignored when counting column/question word overlap.
  std::set<std::string> ignored_words = {"the", "a", "an", "of", "in", "on", "for", "to", "and", "is", "what", "which", "who"};
};

struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  std::size_t size() const { return end - begin; }
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

struct CellCandidate {
  std::size_t col = 0;
  std::string cell;  // normalized cell text
  friend bool operator==(const CellCandidate&, const CellCandidate&) = default;
};

struct ValueMatch {
  TokenSpan span;
  std::vector<CellCandidate> candidates;
};

struct RuleOutput {
  enum class Status { Covered, Uncovered };
  Status status = Status::Uncovered;
  std::optional<SQLQuery> lf;
  std::vector<std::string> trace;

  bool covered() const { return status == Status::Covered; }
};

/// The deterministic question -> SQL rule. Stateless apart from its config.
class RuleEngine {
 public:
  explicit RuleEngine(RuleConfig config = {});

  const RuleConfig& config() const { return config_; }

  /// Maximal non-overlapping question spans equal to some normalized cell,
  /// longest first, leftmost on ties; returned in question order.
  std::vector<ValueMatch> detect_where_values(const Tokens& question, const Table& table) const;

  /// Picks the column for an ambiguous value: most question words shared with
  /// the column name, at least `resolve_min_overlap`. `excluded` marks question
  /// positions (value spans) that do not count.
  std::optional<CellCandidate> resolve_where_column(const ValueMatch& match, const Tokens& question,
                                                    const Table& table,
                                                    const std::vector<bool>& excluded = {}) const;

  /// GT/LT if one of their keywords occurs in the window before `span`, else EQ.
  Op detect_where_operator(const Tokens& question, const TokenSpan& span) const;

  /// Select column with the largest word overlap outside `where_cols`, and
  /// the aggregator from the keyword dictionary.
  std::optional<std::pair<Agg, std::size_t>> select_clause(const Tokens& question, const Table& table,
                                                           const std::set<std::size_t>& where_cols,
                                                           const std::vector<bool>& excluded = {}) const;

  RuleOutput apply(const Tokens& question, const Table& table) const;
  bool is_covered(const Tokens& question, const Table& table) const;

  /// Number of non-excluded question positions whose word is in the column name.
  std::size_t column_overlap(const Tokens& question, const Table& table, std::size_t col,
                             const std::vector<bool>& excluded = {}) const;

 private:
  RuleConfig config_;
};

/// Overlap comparison form of a word: trailing plural "s"/"es" folded.
std::string overlap_form(const std::string& word);

/// First position at which `phrase` occurs inside question[begin, end), if any.
std::optional<std::size_t> find_phrase(const Tokens& question, const Tokens& phrase, std::size_t begin,
                                       std::size_t end);

}  // namespace rulesp
