#include "rulesp/text.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>

#include "rulesp/errors.hpp"

namespace rulesp {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
// Bytes >= 0x80 belong to multi-byte UTF-8 sequences; treat them as letters.
bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || static_cast<unsigned char>(c) >= 0x80;
}
char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

constexpr std::array<std::string_view, 7> kClitics = {"s", "t", "re", "ve", "ll", "d", "m"};

// Length of a clitic suffix starting right after an apostrophe at `pos`, or 0.
std::size_t clitic_length(std::string_view chunk, std::size_t pos) {
  std::size_t end = pos + 1;
  while (end < chunk.size() && is_alpha(chunk[end])) ++end;
  std::size_t len = end - (pos + 1);
  if (len == 0) return 0;
  if (end < chunk.size() && is_word_char(chunk[end])) return 0;
  std::string suffix;
  for (std::size_t i = pos + 1; i < end; ++i) suffix.push_back(lower(chunk[i]));
  for (auto c : kClitics)
    if (suffix == c) return len;
  return 0;
}

void split_chunk(std::string_view chunk, Tokens& out) {
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < chunk.size(); ++i) {
    char c = chunk[i];
    if (is_word_char(c)) {
      cur.push_back(lower(c));
      continue;
    }
    bool next_digit = i + 1 < chunk.size() && is_digit(chunk[i + 1]);
    if (c == '.' && next_digit && !cur.empty() && is_digit(cur.back())) {
      cur.push_back(c);
      continue;
    }
    if (c == '-' && next_digit && cur.empty()) {
      cur.push_back(c);
      continue;
    }
    if (c == '\'') {
      if (std::size_t len = clitic_length(chunk, i); len > 0) {
        flush();
        cur.push_back('\'');
        for (std::size_t k = 1; k <= len; ++k) cur.push_back(lower(chunk[i + k]));
        i += len;
        flush();
        continue;
      }
    }
    flush();
    out.emplace_back(1, c);
  }
  flush();
}

}  // namespace

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) split_chunk(text.substr(start, i - start), out);
  }
  return out;
}

Tokens tokenize_question(std::string_view text) {
  Tokens toks = tokenize(text);
  if (toks.empty()) throw EmptyInput("question text is empty");
  return toks;
}

bool is_punctuation(std::string_view token) {
  if (token.empty()) return false;
  for (char c : token)
    if (!std::ispunct(static_cast<unsigned char>(c))) return false;
  return true;
}

std::string join(std::span<const std::string> tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.append(sep);
    out.append(tokens[i]);
  }
  return out;
}

std::string normalize_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (is_punctuation(t)) continue;
    if (!out.empty()) out.push_back(' ');
    out.append(t);
  }
  return out;
}

std::string normalize(std::string_view text) {
  Tokens toks = tokenize(text);
  return normalize_tokens(toks);
}

std::optional<double> parse_decimal(std::string_view text) {
  while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
  while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace rulesp
