#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "rulesp/text.hpp"

namespace rulesp {

/// Word <-> id map with a fixed block of reserved symbols at the front.
class Vocab {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;

  /// Reserved symbols only.
  Vocab();

  /// Words seen at least `min_count` times, most frequent first (ties
  /// alphabetical), truncated so the total size stays within `cap`.
  static Vocab build(const std::vector<Tokens>& corpus, std::size_t min_count, std::size_t cap);
  static Vocab from_words(const std::vector<std::string>& words);

  int id(const std::string& word) const;
  bool contains(const std::string& word) const { return index_.count(word) != 0; }
  const std::string& word(int id) const { return words_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  std::uint64_t fingerprint() const;

  static std::vector<std::string> reserved();

 private:
  void push(const std::string& w);

  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& data, std::uint64_t seed = 14695981039346656037ULL);

}  // namespace rulesp
