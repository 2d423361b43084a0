#include "rulesp/rule_engine.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <unordered_map>

#include "rulesp/errors.hpp"
#include "rulesp/executor.hpp"

namespace rulesp {

namespace {

Tokens phrase_tokens(const std::string& phrase) {
  Tokens t;
  for (auto& tok : tokenize(phrase))
    if (!is_punctuation(tok)) t.push_back(std::move(tok));
  if (t.empty()) throw ConfigError("empty keyword phrase");
  return t;
}

bool is_excluded(const std::vector<bool>& excluded, std::size_t pos) {
  return pos < excluded.size() && excluded[pos];
}

}  // namespace

KeywordDictionary::KeywordDictionary(std::map<Agg, std::vector<std::string>> agg,
                                     std::map<Op, std::vector<std::string>> op) {
  std::map<Tokens, Agg> agg_owner;
  for (auto& [a, phrases] : agg) {
    if (a == Agg::None) throw ConfigError("keywords cannot map to the NONE aggregator");
    for (const auto& p : phrases) {
      Tokens t = phrase_tokens(p);
      auto [it, fresh] = agg_owner.emplace(t, a);
      if (!fresh && it->second != a) throw ConfigError("phrase '" + p + "' maps to two aggregators");
      if (fresh) agg_[a].push_back(std::move(t));
    }
  }
  std::map<Tokens, Op> op_owner;
  for (auto& [o, phrases] : op) {
    if (o == Op::Eq) throw ConfigError("keywords cannot map to the = operator");
    for (const auto& p : phrases) {
      Tokens t = phrase_tokens(p);
      auto [it, fresh] = op_owner.emplace(t, o);
      if (!fresh && it->second != o) throw ConfigError("phrase '" + p + "' maps to two operators");
      if (fresh) op_[o].push_back(std::move(t));
    }
  }
}

KeywordDictionary KeywordDictionary::defaults() {
  return KeywordDictionary(
      {
          {Agg::Sum, {"sum"}},
          {Agg::Count, {"how many", "total number"}},
          {Agg::Max, {"maximum"}},
          {Agg::Min, {"minimum"}},
          {Agg::Avg, {"average"}},
      },
      {
          {Op::Gt, {"more", "greater", "higher", "taller", "longer", "older", "larger", "after"}},
          {Op::Lt, {"less", "smaller", "lower", "fewer", "nearer", "shorter", "before"}},
      });
}

KeywordDictionary KeywordDictionary::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("keyword dictionary: ") + e.what());
  }
  std::map<Agg, std::vector<std::string>> agg;
  std::map<Op, std::vector<std::string>> op;
  if (j.contains("agg")) {
    for (auto& [name, phrases] : j["agg"].items()) {
      auto a = agg_from_name(name);
      if (!a) throw ConfigError("unknown aggregator '" + name + "'");
      agg[*a] = phrases.get<std::vector<std::string>>();
    }
  }
  if (j.contains("op")) {
    for (auto& [sym, phrases] : j["op"].items()) {
      auto o = op_from_symbol(sym);
      if (!o) throw ConfigError("unknown operator '" + sym + "'");
      op[*o] = phrases.get<std::vector<std::string>>();
    }
  }
  return KeywordDictionary(std::move(agg), std::move(op));
}

KeywordDictionary KeywordDictionary::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open keyword dictionary '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string overlap_form(const std::string& word) {
  auto ends_with = [&](std::string_view suf) {
    return word.size() > suf.size() + 2 && word.compare(word.size() - suf.size(), suf.size(), suf) == 0;
  };
  if (ends_with("ss")) return word;
  if (ends_with("ies")) return word.substr(0, word.size() - 3) + "y";
  if (ends_with("es") && (ends_with("ches") || ends_with("shes") || ends_with("xes") || ends_with("sses")))
    return word.substr(0, word.size() - 2);
  if (ends_with("s")) return word.substr(0, word.size() - 1);
  return word;
}

std::optional<std::size_t> find_phrase(const Tokens& question, const Tokens& phrase, std::size_t begin,
                                       std::size_t end) {
  end = std::min(end, question.size());
  if (phrase.empty() || end < begin + phrase.size()) return std::nullopt;
  for (std::size_t i = begin; i + phrase.size() <= end; ++i)
    if (std::equal(phrase.begin(), phrase.end(), question.begin() + static_cast<std::ptrdiff_t>(i))) return i;
  return std::nullopt;
}

RuleEngine::RuleEngine(RuleConfig config) : config_(std::move(config)) {}

std::vector<ValueMatch> RuleEngine::detect_where_values(const Tokens& question, const Table& table) const {
  std::unordered_map<std::string, std::vector<CellCandidate>> index;
  std::size_t max_len = 0;
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    for (std::size_t c = 0; c < table.num_columns(); ++c) {
      const std::string& cell = table.normalized_cell(r, c);
      if (cell.empty() || config_.ignored_words.count(cell)) continue;
      auto& cands = index[cell];
      if (std::none_of(cands.begin(), cands.end(), [&](const CellCandidate& k) { return k.col == c; }))
        cands.push_back({c, cell});
      max_len = std::max<std::size_t>(max_len, 1 + std::count(cell.begin(), cell.end(), ' '));
    }
  }

  std::vector<ValueMatch> found;
  for (std::size_t i = 0; i < question.size(); ++i) {
    if (is_punctuation(question[i])) continue;
    std::size_t longest = std::min(question.size() - i, max_len + 4);
    for (std::size_t len = 1; len <= longest; ++len) {
      if (is_punctuation(question[i + len - 1])) continue;
      std::string text = normalize_tokens(std::span(question).subspan(i, len));
      auto it = index.find(text);
      if (it != index.end()) found.push_back({{i, i + len}, it->second});
    }
  }
  std::stable_sort(found.begin(), found.end(), [](const ValueMatch& a, const ValueMatch& b) {
    if (a.span.size() != b.span.size()) return a.span.size() > b.span.size();
    return a.span.begin < b.span.begin;
  });
  std::vector<ValueMatch> chosen;
  std::vector<bool> used(question.size(), false);
  for (auto& m : found) {
    bool free = true;
    for (std::size_t p = m.span.begin; p < m.span.end && free; ++p) free = !used[p];
    if (!free) continue;
    for (std::size_t p = m.span.begin; p < m.span.end; ++p) used[p] = true;
    std::sort(m.candidates.begin(), m.candidates.end(),
              [](const CellCandidate& a, const CellCandidate& b) { return a.col < b.col; });
    chosen.push_back(std::move(m));
  }
  std::sort(chosen.begin(), chosen.end(),
            [](const ValueMatch& a, const ValueMatch& b) { return a.span.begin < b.span.begin; });
  return chosen;
}

std::size_t RuleEngine::column_overlap(const Tokens& question, const Table& table, std::size_t col,
                                       const std::vector<bool>& excluded) const {
  std::set<std::string> name;
  for (const auto& w : table.column_tokens(col))
    if (!config_.ignored_words.count(w)) name.insert(overlap_form(w));
  std::size_t n = 0;
  for (std::size_t p = 0; p < question.size(); ++p) {
    if (is_excluded(excluded, p) || config_.ignored_words.count(question[p])) continue;
    if (name.count(overlap_form(question[p]))) ++n;
  }
  return n;
}

std::optional<CellCandidate> RuleEngine::resolve_where_column(const ValueMatch& match, const Tokens& question,
                                                              const Table& table,
                                                              const std::vector<bool>& excluded) const {
  if (match.candidates.empty()) return std::nullopt;
  if (match.candidates.size() == 1) return match.candidates.front();
  const CellCandidate* best = nullptr;
  std::size_t best_overlap = 0;
  for (const auto& c : match.candidates) {
    std::size_t ov = column_overlap(question, table, c.col, excluded);
    if (ov > best_overlap) {
      best_overlap = ov;
      best = &c;
    }
  }
  if (!best || best_overlap < config_.resolve_min_overlap) return std::nullopt;
  return *best;
}

Op RuleEngine::detect_where_operator(const Tokens& question, const TokenSpan& span) const {
  std::size_t begin = span.begin > config_.op_window ? span.begin - config_.op_window : 0;
  std::optional<std::size_t> best_pos;
  Op best = Op::Eq;
  for (const auto& [op, phrases] : config_.dictionary.op_keywords()) {
    for (const auto& phrase : phrases) {
      std::size_t from = begin;
      while (auto pos = find_phrase(question, phrase, from, span.begin)) {
        if (!best_pos || *pos > *best_pos) {
          best_pos = pos;
          best = op;
        }
        from = *pos + 1;
      }
    }
  }
  return best;
}

std::optional<std::pair<Agg, std::size_t>> RuleEngine::select_clause(const Tokens& question, const Table& table,
                                                                     const std::set<std::size_t>& where_cols,
                                                                     const std::vector<bool>& excluded) const {
  std::optional<std::size_t> sel;
  std::size_t best = 0;
  for (std::size_t c = 0; c < table.num_columns(); ++c) {
    if (where_cols.count(c)) continue;
    std::size_t ov = column_overlap(question, table, c, excluded);
    if (ov > best) {
      best = ov;
      sel = c;
    }
  }
  if (!sel) return std::nullopt;

  Agg agg = Agg::None;
  std::optional<std::size_t> agg_pos;
  for (const auto& [a, phrases] : config_.dictionary.agg_keywords()) {
    for (const auto& phrase : phrases) {
      std::size_t from = 0;
      while (auto pos = find_phrase(question, phrase, from, question.size())) {
        bool clear = true;
        for (std::size_t p = *pos; p < *pos + phrase.size(); ++p) clear = clear && !is_excluded(excluded, p);
        if (clear) {
          if (!agg_pos || *pos < *agg_pos) {
            agg_pos = pos;
            agg = a;
          }
          break;
        }
        from = *pos + 1;
      }
    }
  }
  if (is_numeric_agg(agg) && !table.is_numeric(*sel)) return std::nullopt;
  return std::make_pair(agg, *sel);
}

RuleOutput RuleEngine::apply(const Tokens& question, const Table& table) const {
  RuleOutput out;
  auto values = detect_where_values(question, table);
  if (values.empty()) {
    out.trace.push_back("no question span matches a table cell");
    return out;
  }
  std::vector<bool> excluded(question.size(), false);
  for (const auto& v : values)
    for (std::size_t p = v.span.begin; p < v.span.end; ++p) excluded[p] = true;

  SQLQuery q;
  std::set<std::size_t> where_cols;
  for (const auto& v : values) {
    std::string text = normalize_tokens(std::span(question).subspan(v.span.begin, v.span.size()));
    auto resolved = resolve_where_column(v, question, table, excluded);
    if (!resolved) {
      out.trace.push_back("value '" + text + "' is ambiguous across " + std::to_string(v.candidates.size()) +
                          " columns and no column overlaps the question enough to pick one");
      return out;
    }
    Op op = detect_where_operator(question, v.span);
    if (op != Op::Eq && (!table.is_numeric(resolved->col) || !parse_decimal(resolved->cell))) {
      out.trace.push_back(std::string("operator keyword for ") + op_symbol(op) + " ignored on non-numeric value '" +
                          text + "'");
      op = Op::Eq;
    }
    Condition c{resolved->col, op, resolved->cell};
    if (std::find(q.conds.begin(), q.conds.end(), c) == q.conds.end()) q.conds.push_back(c);
    where_cols.insert(resolved->col);
    out.trace.push_back("WHERE " + table.column_name(resolved->col) + " " + op_symbol(op) + " " + resolved->cell);
  }

  auto sel = select_clause(question, table, where_cols, excluded);
  if (!sel) {
    out.trace.push_back("no select column: no remaining column shares a word with the question, or the "
                        "aggregator does not fit its type");
    return out;
  }
  q.agg = sel->first;
  q.sel_col = sel->second;
  out.trace.push_back(std::string("SELECT ") + agg_name(q.agg) + " " + table.column_name(q.sel_col));

  try {
    execute(q, table);
  } catch (const Error& e) {
    out.trace.push_back(std::string("query does not execute: ") + e.what());
    return out;
  }
  out.status = RuleOutput::Status::Covered;
  out.lf = std::move(q);
  return out;
}

bool RuleEngine::is_covered(const Tokens& question, const Table& table) const {
  return apply(question, table).covered();
}

}  // namespace rulesp
