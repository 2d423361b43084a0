#include "rulesp/phrase_table.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "rulesp/errors.hpp"

namespace rulesp {
namespace {

template <class Map, class Key>
std::uint64_t lookup(const Map& m, const Key& k) {
  auto it = m.find(k);
  return it == m.end() ? 0 : it->second;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '\\') out += "\\\\";
    else if (c == '\t') out += "\\t";
    else if (c == '\n') out += "\\n";
    else if (c == '\r') out += "\\r";
    else out += c;
  }
  return out;
}

std::string unescape(const std::string& s, std::size_t line) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (++i == s.size()) throw ParseError(line, "dangling escape");
    switch (s[i]) {
      case '\\': out += '\\'; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default: throw ParseError(line, std::string("unknown escape \\") + s[i]);
    }
  }
  return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    auto pos = line.find('\t', start);
    parts.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::uint64_t parse_count(const std::string& s, std::size_t line) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw ParseError(line, "bad count '" + s + "'");
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw ParseError(line, "count out of range '" + s + "'");
  }
}

std::set<std::string> question_words(const Tokens& question) {
  std::set<std::string> out;
  for (const auto& w : question)
    if (!is_punctuation(w)) out.insert(w);
  return out;
}

constexpr const char* kHeader = "#phrase-table v1";

}  // namespace

std::uint64_t PhraseTable::cooc(const std::string& word, const std::string& token) const {
  return lookup(cooc_, std::make_pair(word, token));
}
std::uint64_t PhraseTable::word_marginal(const std::string& word) const { return lookup(words_, word); }
std::uint64_t PhraseTable::token_marginal(const std::string& token) const { return lookup(tokens_, token); }

void PhraseTable::add(const Tokens& question, const SQLQuery& lf, const Table& table) {
  Tokens toks = content_tokens(lf, table);
  auto words = question_words(question);
  for (const auto& w : words) {
    ++words_[w];
    for (const auto& t : toks) ++cooc_[{w, t}];
  }
  for (const auto& t : toks) ++tokens_[t];
  ++pair_total_;
}

PhraseTable PhraseTable::scaled(std::uint64_t k) const {
  PhraseTable out = *this;
  for (auto& [key, c] : out.cooc_) c *= k;
  for (auto& [key, c] : out.words_) c *= k;
  for (auto& [key, c] : out.tokens_) c *= k;
  out.pair_total_ *= k;
  return out;
}

std::string PhraseTable::serialize() const {
  std::ostringstream os;
  os << kHeader << "\n#pairs\t" << pair_total_ << "\n#cooc\n";
  for (const auto& [key, c] : cooc_) os << escape(key.first) << '\t' << escape(key.second) << '\t' << c << '\n';
  os << "#word\n";
  for (const auto& [w, c] : words_) os << escape(w) << '\t' << c << '\n';
  os << "#token\n";
  for (const auto& [t, c] : tokens_) os << escape(t) << '\t' << c << '\n';
  return os.str();
}

PhraseTable PhraseTable::deserialize(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::size_t n = 0;
  PhraseTable pt;
  if (!std::getline(is, line) || line != kHeader) throw ParseError(1, "missing phrase-table header");
  ++n;
  if (!std::getline(is, line)) throw ParseError(2, "missing pair count");
  ++n;
  auto head = split_tabs(line);
  if (head.size() != 2 || head[0] != "#pairs") throw ParseError(n, "expected '#pairs<TAB>count'");
  pt.pair_total_ = parse_count(head[1], n);
  enum { kNone, kCooc, kWord, kToken } section = kNone;
  while (std::getline(is, line)) {
    ++n;
    if (line == "#cooc") section = kCooc;
    else if (line == "#word") section = kWord;
    else if (line == "#token") section = kToken;
    else {
      auto f = split_tabs(line);
      if (section == kCooc && f.size() == 3) pt.cooc_[{unescape(f[0], n), unescape(f[1], n)}] = parse_count(f[2], n);
      else if (section == kWord && f.size() == 2) pt.words_[unescape(f[0], n)] = parse_count(f[1], n);
      else if (section == kToken && f.size() == 2) pt.tokens_[unescape(f[0], n)] = parse_count(f[1], n);
      else throw ParseError(n, "unexpected record");
    }
  }
  return pt;
}

void PhraseTable::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << serialize();
}

PhraseTable PhraseTable::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return deserialize(ss.str());
}

PhraseTable update_phrase_table(const PhraseTable& pt, std::span<const Example> pairs, const TableMap& tables) {
  PhraseTable out = pt;
  for (const auto& ex : pairs) {
    if (!ex.lf) continue;
    auto it = tables.find(ex.table_id);
    if (it == tables.end()) throw DanglingReference("unknown table '" + ex.table_id + "'");
    out.add(ex.question, *ex.lf, it->second);
  }
  return out;
}

double pair_score(const PhraseTable& pt, const Tokens& question, const SQLQuery& lf, const Table& table,
                  double lambda) {
  if (pt.empty()) throw EmptyPhraseTable("phrase table has no pairs");
  const double vt = static_cast<double>(std::max<std::size_t>(1, pt.token_counts().size()));
  const auto words = question_words(question);
  const Tokens toks = content_tokens(lf, table);
  double log_sum = 0;
  for (const auto& t : toks) {
    double support = lambda / (static_cast<double>(pt.pair_total()) + lambda * vt);
    for (const auto& w : words) {
      std::uint64_t m = pt.word_marginal(w);
      if (m == 0) continue;
      double p = (static_cast<double>(pt.cooc(w, t)) + lambda) / (static_cast<double>(m) + lambda * vt);
      support = std::max(support, p);
    }
    log_sum += std::log(support);
  }
  return toks.empty() ? 1.0 : std::exp(log_sum / static_cast<double>(toks.size()));
}

PairScorer phrase_table_scorer(const PhraseTable& pt, double lambda) {
  return [&pt, lambda](const Tokens& q, const SQLQuery& lf, const Table& t) { return pair_score(pt, q, lf, t, lambda); };
}

FilterResult filter_pairs(const PairScorer& scorer, std::span<const Example> pairs, const TableMap& tables,
                          double tau) {
  FilterResult r;
  for (const auto& ex : pairs) {
    bool keep = ex.provenance == Provenance::Rule;
    if (!keep && ex.lf) {
      auto it = tables.find(ex.table_id);
      if (it == tables.end()) throw DanglingReference("unknown table '" + ex.table_id + "'");
      keep = scorer(ex.question, *ex.lf, it->second) >= tau;
    }
    (keep ? r.kept : r.dropped).push_back(ex);
  }
  return r;
}

FilterResult filter_pairs(const PhraseTable& pt, std::span<const Example> pairs, const TableMap& tables, double tau,
                          double lambda) {
  return filter_pairs(phrase_table_scorer(pt, lambda), pairs, tables, tau);
}

}  // namespace rulesp
