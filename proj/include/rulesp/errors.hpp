#pragma once

#include <stdexcept>
#include <string>

namespace rulesp {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define RULESP_DEFINE_ERROR(Name)                          \
  class Name : public Error {                              \
   public:                                                 \
    explicit Name(const std::string& what) : Error(what) {} \
  }

RULESP_DEFINE_ERROR(EmptyInput);
RULESP_DEFINE_ERROR(InvalidTable);
RULESP_DEFINE_ERROR(InvalidQuery);
RULESP_DEFINE_ERROR(MalformedLF);
RULESP_DEFINE_ERROR(DanglingReference);
RULESP_DEFINE_ERROR(EmptyAggregate);
RULESP_DEFINE_ERROR(AlignmentError);
RULESP_DEFINE_ERROR(EmptyBatch);
RULESP_DEFINE_ERROR(NonFiniteGradient);
RULESP_DEFINE_ERROR(EmptyPhraseTable);
RULESP_DEFINE_ERROR(NoRuleCoverage);
RULESP_DEFINE_ERROR(ConfigError);
RULESP_DEFINE_ERROR(IncompatibleCheckpoint);

#undef RULESP_DEFINE_ERROR

/// Malformed input record; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace rulesp
