#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rulesp/dataset.hpp"
#include "rulesp/sql.hpp"

namespace rulesp {

/// Co-occurrence counts between question words and logical-form tokens.
class PhraseTable {
 public:
  std::uint64_t cooc(const std::string& word, const std::string& token) const;
  std::uint64_t word_marginal(const std::string& word) const;
  std::uint64_t token_marginal(const std::string& token) const;
  std::uint64_t pair_total() const { return pair_total_; }
  bool empty() const { return pair_total_ == 0; }

  const std::map<std::pair<std::string, std::string>, std::uint64_t>& cooc_counts() const { return cooc_; }
  const std::map<std::string, std::uint64_t>& word_counts() const { return words_; }
  const std::map<std::string, std::uint64_t>& token_counts() const { return tokens_; }

  /// Counts one pair in place: distinct non-punctuation question words times
  /// distinct content tokens of the lf.
  void add(const Tokens& question, const SQLQuery& lf, const Table& table);
  /// Every count multiplied by `k`.
  PhraseTable scaled(std::uint64_t k) const;

  std::string serialize() const;
  /// Throws ParseError.
  static PhraseTable deserialize(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static PhraseTable load(const std::filesystem::path& path);

  friend bool operator==(const PhraseTable&, const PhraseTable&) = default;

 private:
  std::map<std::pair<std::string, std::string>, std::uint64_t> cooc_;
  std::map<std::string, std::uint64_t> words_;
  std::map<std::string, std::uint64_t> tokens_;
  std::uint64_t pair_total_ = 0;
};

/// New table with every example that carries an lf counted.
PhraseTable update_phrase_table(const PhraseTable& pt, std::span<const Example> pairs, const TableMap& tables);

inline constexpr double kDefaultSmoothing = 0.1;

/// Geometric mean over content tokens t of max_w p(t | w), with
/// p(t | w) = (cooc(w,t) + lambda) / (word_marginal(w) + lambda * |tokens|).
/// Tokens no question word has been seen with get lambda / (pairs + lambda * |tokens|).
/// Throws EmptyPhraseTable.
double pair_score(const PhraseTable& pt, const Tokens& question, const SQLQuery& lf, const Table& table,
                  double lambda = kDefaultSmoothing);

/// Scoring strategy for filter(): any map from a pair to [0, 1].
using PairScorer = std::function<double(const Tokens&, const SQLQuery&, const Table&)>;

PairScorer phrase_table_scorer(const PhraseTable& pt, double lambda = kDefaultSmoothing);

struct FilterResult {
  std::vector<Example> kept;
  std::vector<Example> dropped;
};

/// Keeps pairs scoring at least `tau`. Rule-provenance pairs are always kept.
FilterResult filter_pairs(const PairScorer& scorer, std::span<const Example> pairs, const TableMap& tables,
                          double tau);
FilterResult filter_pairs(const PhraseTable& pt, std::span<const Example> pairs, const TableMap& tables,
                          double tau, double lambda = kDefaultSmoothing);

}  // namespace rulesp
