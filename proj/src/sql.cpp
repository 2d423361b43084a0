#include "rulesp/sql.hpp"

#include <algorithm>

#include "rulesp/errors.hpp"

namespace rulesp {

const char* agg_name(Agg a) {
  switch (a) {
    case Agg::None: return "none";
    case Agg::Max: return "max";
    case Agg::Min: return "min";
    case Agg::Count: return "count";
    case Agg::Sum: return "sum";
    case Agg::Avg: return "avg";
  }
  return "none";
}

const char* op_symbol(Op o) {
  switch (o) {
    case Op::Eq: return "=";
    case Op::Gt: return ">";
    case Op::Lt: return "<";
  }
  return "=";
}

std::optional<Agg> agg_from_name(const std::string& s) {
  for (Agg a : kAllAggs)
    if (s == agg_name(a)) return a;
  return std::nullopt;
}

std::optional<Op> op_from_symbol(const std::string& s) {
  for (Op o : kAllOps)
    if (s == op_symbol(o)) return o;
  return std::nullopt;
}

Agg agg_from_int(int v) {
  if (v < 0 || v > 5) throw InvalidQuery("aggregator code out of range: " + std::to_string(v));
  return static_cast<Agg>(v);
}

Op op_from_int(int v) {
  if (v < 0 || v > 2) throw InvalidQuery("operator code out of range: " + std::to_string(v));
  return static_cast<Op>(v);
}

void validate(const SQLQuery& q, const Table& table) {
  const std::size_t n = table.num_columns();
  if (q.sel_col >= n) throw InvalidQuery("select column " + std::to_string(q.sel_col) + " out of range");
  if (is_numeric_agg(q.agg) && !table.is_numeric(q.sel_col))
    throw InvalidQuery(std::string("aggregator ") + agg_name(q.agg) + " on TEXT column '" +
                       table.column_name(q.sel_col) + "'");
  for (std::size_t i = 0; i < q.conds.size(); ++i) {
    const auto& c = q.conds[i];
    if (c.col >= n) throw InvalidQuery("condition column " + std::to_string(c.col) + " out of range");
    for (std::size_t j = 0; j < i; ++j)
      if (q.conds[j] == c) throw InvalidQuery("duplicate condition on '" + table.column_name(c.col) + "'");
  }
}

bool is_valid(const SQLQuery& q, const Table& table) {
  try {
    validate(q, table);
    return true;
  } catch (const InvalidQuery&) {
    return false;
  }
}

std::string to_string(const SQLQuery& q, const Table& table) {
  std::string s = "SELECT ";
  if (q.agg != Agg::None) s += std::string(agg_name(q.agg)) + "(";
  s += q.sel_col < table.num_columns() ? table.column_name(q.sel_col) : "?";
  if (q.agg != Agg::None) s += ")";
  for (std::size_t i = 0; i < q.conds.size(); ++i) {
    const auto& c = q.conds[i];
    s += i == 0 ? " WHERE " : " AND ";
    s += (c.col < table.num_columns() ? table.column_name(c.col) : "?");
    s += std::string(" ") + op_symbol(c.op) + " " + c.value;
  }
  return s;
}

bool is_structural_marker(const std::string& token) {
  return token == kAggMarker || token == kSelMarker || token == kWhereMarker || token == kAndMarker;
}

Tokens linearize_lf(const SQLQuery& q, const Table& table) {
  validate(q, table);
  Tokens out = {kAggMarker, agg_name(q.agg), kSelMarker, table.column_name(q.sel_col)};
  for (std::size_t i = 0; i < q.conds.size(); ++i) {
    const auto& c = q.conds[i];
    out.emplace_back(i == 0 ? kWhereMarker : kAndMarker);
    out.push_back(table.column_name(c.col));
    out.emplace_back(op_symbol(c.op));
    out.push_back(c.value);
  }
  return out;
}

SQLQuery delinearize_lf(const Tokens& tokens, const Table& table) {
  auto column = [&](std::size_t i) {
    auto c = table.find_column(tokens[i]);
    if (!c) throw MalformedLF("unknown column '" + tokens[i] + "'");
    return *c;
  };
  if (tokens.size() < 4 || tokens[0] != kAggMarker || tokens[2] != kSelMarker)
    throw MalformedLF("expected 'AGG <agg> SEL <column>' prefix");
  SQLQuery q;
  auto agg = agg_from_name(tokens[1]);
  if (!agg) throw MalformedLF("unknown aggregator '" + tokens[1] + "'");
  q.agg = *agg;
  q.sel_col = column(3);

  std::size_t i = 4;
  while (i < tokens.size()) {
    const std::string& marker = tokens[i];
    if (marker != (q.conds.empty() ? kWhereMarker : kAndMarker))
      throw MalformedLF("unexpected token '" + marker + "' at position " + std::to_string(i));
    if (i + 3 >= tokens.size()) throw MalformedLF("truncated condition at position " + std::to_string(i));
    Condition c;
    c.col = column(i + 1);
    auto op = op_from_symbol(tokens[i + 2]);
    if (!op) throw MalformedLF("unknown operator '" + tokens[i + 2] + "'");
    c.op = *op;
    c.value = tokens[i + 3];
    if (c.value.empty()) throw MalformedLF("empty condition value");
    q.conds.push_back(std::move(c));
    i += 4;
  }
  try {
    validate(q, table);
  } catch (const InvalidQuery& e) {
    throw MalformedLF(e.what());
  }
  return q;
}

Tokens content_tokens(const SQLQuery& q, const Table& table) {
  Tokens out;
  for (auto& t : linearize_lf(q, table)) {
    if (is_structural_marker(t)) continue;
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(std::move(t));
  }
  return out;
}

}  // namespace rulesp
