#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rulesp {

using Tokens = std::vector<std::string>;

/// Lowercases, splits punctuation into separate tokens and collapses
/// whitespace. Decimal points between digits, a leading minus sign on a
/// number and English clitics ('s, 't, 're, ...) stay attached.
Tokens tokenize(std::string_view text);

/// tokenize() for questions: throws EmptyInput on empty or blank text.
Tokens tokenize_question(std::string_view text);

/// True for tokens made only of ASCII punctuation.
bool is_punctuation(std::string_view token);

/// Canonical comparison form shared by rule matching, execution and the
/// models: tokenize, drop punctuation tokens, join with single spaces.
std::string normalize(std::string_view text);

/// normalize() over an already tokenized span.
std::string normalize_tokens(std::span<const std::string> tokens);

std::string join(std::span<const std::string> tokens, std::string_view sep = " ");

/// Strict decimal parse of a whole string; nullopt unless finite.
std::optional<double> parse_decimal(std::string_view text);

}  // namespace rulesp
