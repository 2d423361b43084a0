#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "rulesp/table.hpp"
#include "rulesp/text.hpp"

namespace rulesp {

// Integer values follow the public WikiSQL encoding.
enum class Agg { None = 0, Max = 1, Min = 2, Count = 3, Sum = 4, Avg = 5 };
enum class Op { Eq = 0, Gt = 1, Lt = 2 };

inline constexpr std::array<Agg, 6> kAllAggs = {Agg::None, Agg::Max, Agg::Min, Agg::Count, Agg::Sum, Agg::Avg};
inline constexpr std::array<Op, 3> kAllOps = {Op::Eq, Op::Gt, Op::Lt};

/// "none", "max", ... as used in linearized logical forms.
const char* agg_name(Agg a);
/// "=", ">", "<".
const char* op_symbol(Op o);
std::optional<Agg> agg_from_name(const std::string& s);
std::optional<Op> op_from_symbol(const std::string& s);
Agg agg_from_int(int v);
Op op_from_int(int v);

/// MAX/MIN/SUM/AVG need a NUMBER column.
constexpr bool is_numeric_agg(Agg a) { return a == Agg::Max || a == Agg::Min || a == Agg::Sum || a == Agg::Avg; }

struct Condition {
  std::size_t col = 0;
  Op op = Op::Eq;
  std::string value;

  friend bool operator==(const Condition&, const Condition&) = default;
};

/// SELECT agg sel_col WHERE col op value (AND ...)*
struct SQLQuery {
  Agg agg = Agg::None;
  std::size_t sel_col = 0;
  std::vector<Condition> conds;

  friend bool operator==(const SQLQuery&, const SQLQuery&) = default;
};

/// Throws InvalidQuery if `q` breaks an invariant against `table`.
void validate(const SQLQuery& q, const Table& table);
bool is_valid(const SQLQuery& q, const Table& table);

/// Human-readable rendering for logs and traces.
std::string to_string(const SQLQuery& q, const Table& table);

inline constexpr const char* kAggMarker = "AGG";
inline constexpr const char* kSelMarker = "SEL";
inline constexpr const char* kWhereMarker = "WHERE";
inline constexpr const char* kAndMarker = "AND";

bool is_structural_marker(const std::string& token);

/// "AGG <agg> SEL <col> [WHERE <col> <op> <value> [AND ...]]"; column names
/// and values each occupy a single token.
Tokens linearize_lf(const SQLQuery& q, const Table& table);

/// Inverse of linearize_lf; throws MalformedLF.
SQLQuery delinearize_lf(const Tokens& tokens, const Table& table);

/// Distinct non-structural tokens of linearize_lf in first-seen order.
Tokens content_tokens(const SQLQuery& q, const Table& table);

}  // namespace rulesp
