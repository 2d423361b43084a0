#include "rulesp/parser.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "birnn.hpp"
#include "rulesp/autodiff.hpp"
#include "rulesp/errors.hpp"
#include "rulesp/executor.hpp"

namespace rulesp {
namespace {

enum Block : std::size_t {
  kEmb,
  kFeat,
  kRnn,  // six blocks
  kColW = kRnn + 6,
  kColB,
  kTagW,
  kTagB,
  kSelAtt,
  kSelQ,
  kSelC,
  kSelB,
  kSelV,
  kSelBil,
  kAggAtt,
  kAggW1,
  kAggB1,
  kAggW2,
  kAggB2,
  kWcF,
  kWcBw,
  kWcBias,
  kWcA,
  kMention,
  kSelFocus,
  kOpW,
  kOpB,
  kNumBlocks
};

constexpr Eigen::Index kColFeatures = 3;
constexpr std::size_t kMentionWindow = 4;

Tokens value_tokens(const std::string& value) {
  Tokens out;
  for (auto& t : tokenize(value))
    if (!is_punctuation(t)) out.push_back(std::move(t));
  return out;
}

const RuleEngine& linker() {
  static const RuleEngine engine;
  return engine;
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& s) {
  double m = s.maxCoeff();
  double lse = m + std::log((s.array() - m).exp().sum());
  return s.array() - lse;
}

}  // namespace

ParserTargets parser_targets(const Tokens& question, const SQLQuery& lf) {
  ParserTargets t;
  t.tags.assign(question.size(), Tag::O);
  std::vector<bool> used(question.size(), false);
  for (const auto& c : lf.conds) {
    Tokens vt = value_tokens(c.value);
    std::optional<TokenSpan> found;
    if (!vt.empty() && vt.size() <= question.size()) {
      for (std::size_t s = 0; s + vt.size() <= question.size() && !found; ++s) {
        bool ok = true;
        for (std::size_t k = 0; k < vt.size() && ok; ++k) ok = !used[s + k] && question[s + k] == vt[k];
        if (ok) found = TokenSpan{s, s + vt.size()};
      }
    }
    if (found) {
      for (std::size_t i = found->begin; i < found->end; ++i) {
        used[i] = true;
        t.tags[i] = i == found->begin ? Tag::B : Tag::I;
      }
    }
    t.spans.push_back(found);
  }
  return t;
}

std::vector<TokenSpan> decode_iob(const std::vector<Tag>& tags) {
  std::vector<TokenSpan> spans;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i] == Tag::B || (tags[i] == Tag::I && (spans.empty() || spans.back().end != i))) {
      spans.push_back({i, i + 1});
    } else if (tags[i] == Tag::I) {
      spans.back().end = i + 1;
    }
  }
  return spans;
}


namespace {

struct Heads {
  const ParameterSet& p;
  ad::Graph& g;

  ad::Expr tag_scores(ad::Expr h) const { return g.affine(kTagB, {{kTagW, h}}); }

  // Soft maximum over `positions` of how strongly each word names column c,
  // optionally biased towards some positions.
  ad::Expr mention(const std::vector<ad::Expr>& words, const std::vector<std::size_t>& positions, ad::Expr c,
                   const std::vector<ad::Expr>* bias = nullptr) const {
    ad::Expr mc = g.matvec(kMention, c);
    std::vector<ad::Expr> m, logits;
    m.reserve(positions.size());
    for (std::size_t k = 0; k < positions.size(); ++k) {
      m.push_back(g.dot(words[positions[k]], mc));
      logits.push_back(bias ? g.add(m.back(), (*bias)[k]) : m.back());
    }
    return g.weighted_sum(g.softmax(g.stack(logits)), m);
  }

  ad::Expr sel_scores(const std::vector<ad::Expr>& states, const std::vector<ad::Expr>& cols,
                      const std::vector<ad::Expr>& words, const std::vector<bool>& in_cell) const {
    std::vector<std::size_t> free;
    std::vector<ad::Expr> focus;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (in_cell[i]) continue;
      free.push_back(i);
      focus.push_back(g.matvec(kSelFocus, states[i]));
    }
    std::vector<ad::Expr> scores;
    std::vector<ad::Expr> att(states.size());
    for (auto c : cols) {
      ad::Expr a = g.matvec(kSelAtt, c);
      for (std::size_t i = 0; i < states.size(); ++i) att[i] = g.dot(states[i], a);
      ad::Expr k = g.weighted_sum(g.softmax(g.stack(att)), states);
      ad::Expr additive = g.matvec(kSelV, g.tanh(g.affine(kSelB, {{kSelQ, k}, {kSelC, c}})));
      ad::Expr score = g.add(additive, g.dot(k, g.matvec(kSelBil, c)));
      if (!free.empty()) score = g.add(score, mention(words, free, c, &focus));
      scores.push_back(score);
    }
    return g.stack(scores);
  }

  ad::Expr agg_scores(const std::vector<ad::Expr>& states) const {
    std::vector<ad::Expr> att(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) att[i] = g.matvec(kAggAtt, states[i]);
    ad::Expr summary = g.weighted_sum(g.softmax(g.stack(att)), states);
    return g.affine(kAggB2, {{kAggW2, g.tanh(g.affine(kAggB1, {{kAggW1, summary}}))}});
  }

  ad::Expr span_context(const std::vector<ad::Expr>& fw, const std::vector<ad::Expr>& bw, ad::Expr zero_h,
                        TokenSpan span) const {
    ad::Expr before = span.begin == 0 ? zero_h : fw[span.begin - 1];
    ad::Expr after = span.end >= bw.size() ? zero_h : bw[span.end];
    return g.tanh(g.affine(kWcBias, {{kWcF, before}, {kWcBw, after}}));
  }

  ad::Expr where_col_scores(ad::Expr u, const std::vector<ad::Expr>& cols, const std::vector<ad::Expr>& words,
                            const std::vector<bool>& in_cell, TokenSpan span) const {
    std::vector<std::size_t> window;
    for (std::size_t i = span.begin > kMentionWindow ? span.begin - kMentionWindow : 0; i < span.begin; ++i)
      if (!in_cell[i]) window.push_back(i);
    std::vector<ad::Expr> scores;
    for (auto c : cols) {
      ad::Expr score = g.dot(u, g.matvec(kWcA, c));
      if (!window.empty()) score = g.add(score, mention(words, window, c));
      scores.push_back(score);
    }
    return g.stack(scores);
  }

  ad::Expr op_scores(ad::Expr u) const { return g.affine(kOpB, {{kOpW, u}}); }
};

std::vector<double> membership(const Table& table, const std::string& text) {
  std::vector<double> m(table.num_columns(), 0.0);
  for (std::size_t j = 0; j < table.num_columns(); ++j) m[j] = table.column_contains(j, text) ? 1.0 : 0.0;
  return m;
}

}  // namespace

Parser::Parser(ModelConfig config, Vocab vocab) : config_(config), vocab_(std::move(vocab)) {
  config_.validate();
  const auto e = static_cast<Eigen::Index>(config_.embedding_dim);
  const auto h = static_cast<Eigen::Index>(config_.hidden_dim);
  const auto hh = 2 * h;
  const auto v = static_cast<Eigen::Index>(vocab_.size());
  auto& p = layout_;
  p.add("emb", e, v);
  p.add("feat", e, 4);
  BiRnnBlocks::add(p, "enc", e, h);
  p.add("col_w", hh, e + kColFeatures);
  p.add("col_b", hh, 1);
  p.add("tag_w", 3, hh);
  p.add("tag_b", 3, 1);
  p.add("sel_att", hh, hh);
  p.add("sel_q", hh, hh);
  p.add("sel_c", hh, hh);
  p.add("sel_b", hh, 1);
  p.add("sel_v", 1, hh);
  p.add("sel_bil", hh, hh);
  p.add("agg_att", 1, hh);
  p.add("agg_w1", hh, hh);
  p.add("agg_b1", hh, 1);
  p.add("agg_w2", static_cast<Eigen::Index>(kAllAggs.size()), hh);
  p.add("agg_b2", static_cast<Eigen::Index>(kAllAggs.size()), 1);
  p.add("wc_f", hh, h);
  p.add("wc_bw", hh, h);
  p.add("wc_bias", hh, 1);
  p.add("wc_a", hh, hh);
  p.add("mention", e, hh);
  p.add("sel_focus", 1, hh);
  p.add("op_w", static_cast<Eigen::Index>(kAllOps.size()), hh);
  p.add("op_b", static_cast<Eigen::Index>(kAllOps.size()), 1);
  if (p.num_blocks() != kNumBlocks) throw std::logic_error("parser block layout mismatch");
}

std::uint64_t Parser::fingerprint() const {
  std::uint64_t h = fnv1a("parser", config_.hash() ^ vocab_.fingerprint());
  for (std::size_t i = 0; i < layout_.num_blocks(); ++i)
    h = fnv1a(layout_.name(i) + ":" + std::to_string(layout_[i].rows()) + "x" + std::to_string(layout_[i].cols()), h);
  return h;
}

ParameterSet Parser::init(std::uint64_t seed) const {
  ParameterSet p = layout_.zeros_like();
  std::mt19937_64 rng(seed);
  p.randomize(rng, config_.init_scale);
  return p;
}

namespace {

struct EncodeResult {
  std::vector<ad::Expr> states, fw, bw, cols;
  std::vector<ad::Expr> words;
  std::vector<bool> in_cell;
  ad::Expr zero_h;
};

EncodeResult encode(ad::Graph& g, const Vocab& vocab, const ModelConfig& cfg, const Tokens& q, const Table& table) {
  const RuleEngine& rules = linker();
  std::vector<bool> in_cell(q.size(), false);
  for (const auto& m : rules.detect_where_values(q, table))
    for (std::size_t i = m.span.begin; i < m.span.end; ++i) in_cell[i] = true;
  std::set<std::string> header_words;
  for (std::size_t j = 0; j < table.num_columns(); ++j)
    for (const auto& w : table.column_tokens(j))
      if (!rules.config().ignored_words.count(w)) header_words.insert(overlap_form(w));

  EncodeResult r;
  std::vector<ad::Expr> xs;
  xs.reserve(q.size());
  std::set<std::string> question_words;
  for (std::size_t i = 0; i < q.size(); ++i) {
    bool header = header_words.count(overlap_form(q[i])) != 0;
    if (!in_cell[i]) question_words.insert(overlap_form(q[i]));
    int feat = (in_cell[i] ? 2 : 0) + (header ? 1 : 0);
    ad::Expr w = g.lookup(kEmb, vocab.id(q[i]));
    r.words.push_back(w);
    xs.push_back(g.add(w, g.lookup(kFeat, feat)));
  }
  r.in_cell = std::move(in_cell);
  BiRnnBlocks rnn{kRnn, kRnn + 1, kRnn + 2, kRnn + 3, kRnn + 4, kRnn + 5, static_cast<Eigen::Index>(cfg.hidden_dim)};
  BiRnnStates s = run_birnn(g, rnn, xs);

  r.states = std::move(s.both);
  r.fw = std::move(s.fw);
  r.bw = std::move(s.bw);
  r.zero_h = g.input(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cfg.hidden_dim)));
  for (std::size_t j = 0; j < table.num_columns(); ++j) {
    const Tokens& name = table.column_tokens(j);
    std::vector<ad::Expr> words;
    std::size_t overlap = 0;
    for (const auto& w : name) {
      words.push_back(g.lookup(kEmb, vocab.id(w)));
      if (question_words.count(overlap_form(w))) ++overlap;
    }
    if (words.empty()) words.push_back(g.lookup(kEmb, Vocab::kUnk));
    Eigen::VectorXd f(kColFeatures);
    f << (table.is_numeric(j) ? 0.0 : 1.0), (table.is_numeric(j) ? 1.0 : 0.0),
        name.empty() ? 0.0 : static_cast<double>(overlap) / static_cast<double>(name.size());
    ad::Expr parts[2] = {g.mean(words), g.input(f)};
    r.cols.push_back(g.tanh(g.affine(kColB, {{kColW, g.concat(parts)}})));
  }
  return r;
}

}  // namespace

double Parser::example_loss(const ParameterSet& params, ParameterSet* grads, const Example& ex,
                            const Table& table) const {
  if (!ex.lf) throw InvalidQuery("parser loss needs an lf on every example");
  if (ex.question.empty()) throw EmptyInput("empty question in batch");
  const SQLQuery& lf = *ex.lf;
  validate(lf, table);
  ad::Graph g(params, grads);
  Heads heads{params, g};
  EncodeResult enc = encode(g, vocab_, config_, ex.question, table);
  ParserTargets targets = parser_targets(ex.question, lf);

  std::vector<ad::Expr> terms;
  for (std::size_t i = 0; i < ex.question.size(); ++i)
    terms.push_back(g.pick_nll(heads.tag_scores(enc.states[i]), static_cast<int>(targets.tags[i])));
  terms.push_back(g.pick_nll(heads.sel_scores(enc.states, enc.cols, enc.words, enc.in_cell), static_cast<int>(lf.sel_col)));
  terms.push_back(g.pick_nll(heads.agg_scores(enc.states), static_cast<int>(lf.agg)));
  for (std::size_t c = 0; c < lf.conds.size(); ++c) {
    if (!targets.spans[c]) continue;
    TokenSpan span = *targets.spans[c];
    ad::Expr u = heads.span_context(enc.fw, enc.bw, enc.zero_h, span);
    terms.push_back(
        g.pick_nll(heads.where_col_scores(u, enc.cols, enc.words, enc.in_cell, span), static_cast<int>(lf.conds[c].col)));
    terms.push_back(g.pick_nll(heads.op_scores(u), static_cast<int>(lf.conds[c].op)));
  }
  ad::Expr total = g.sum(terms);
  if (grads) g.backward(total);
  return g.scalar(total);
}

LossGrad Parser::loss(const ParameterSet& params, std::span<const Example> batch, const TableMap& tables) const {
  if (batch.empty()) throw EmptyBatch("parser loss on an empty batch");
  LossGrad out{0.0, params.zeros_like()};
  for (const auto& ex : batch) {
    auto it = tables.find(ex.table_id);
    if (it == tables.end()) throw DanglingReference("unknown table '" + ex.table_id + "'");
    out.loss += example_loss(params, &out.grad, ex, it->second);
  }
  return out;
}

double Parser::loss_value(const ParameterSet& params, std::span<const Example> batch, const TableMap& tables) const {
  if (batch.empty()) throw EmptyBatch("parser loss on an empty batch");
  double total = 0;
  for (const auto& ex : batch) {
    auto it = tables.find(ex.table_id);
    if (it == tables.end()) throw DanglingReference("unknown table '" + ex.table_id + "'");
    total += example_loss(params, nullptr, ex, it->second);
  }
  return total;
}

SQLQuery Parser::parse(const Tokens& question, const Table& table, const ParameterSet& params) const {
  if (question.empty()) throw EmptyInput("cannot parse an empty question");
  if (table.num_columns() == 0) throw InvalidTable("table has no columns");
  ad::Graph g(params);
  Heads heads{params, g};
  EncodeResult enc = encode(g, vocab_, config_, question, table);

  std::vector<Tag> tags(question.size());
  for (std::size_t i = 0; i < question.size(); ++i) {
    Eigen::Index best = 0;
    g.value(heads.tag_scores(enc.states[i])).maxCoeff(&best);
    tags[i] = static_cast<Tag>(best);
  }
  auto detected = linker().detect_where_values(question, table);

  SQLQuery q;
  for (TokenSpan span : decode_iob(tags)) {
    std::string text = normalize_tokens(std::span(question).subspan(span.begin, span.size()));
    auto member = membership(table, text);
    bool linked = std::find(member.begin(), member.end(), 1.0) != member.end();
    if (!linked) {
      for (const auto& m : detected) {
        if (m.span.begin < span.end && span.begin < m.span.end) {
          span = m.span;
          text = normalize_tokens(std::span(question).subspan(span.begin, span.size()));
          member = membership(table, text);
          linked = true;
          break;
        }
      }
    }
    const bool numeric_value = parse_decimal(text).has_value();
    std::vector<bool> allowed(table.num_columns(), false);
    bool any = false;
    for (std::size_t j = 0; j < table.num_columns(); ++j) {
      allowed[j] = linked ? member[j] == 1.0 : (numeric_value && table.is_numeric(j));
      any = any || allowed[j];
    }
    if (!any || text.empty()) continue;

    ad::Expr u = heads.span_context(enc.fw, enc.bw, enc.zero_h, span);
    const auto& col_scores = g.value(heads.where_col_scores(u, enc.cols, enc.words, enc.in_cell, span));
    std::size_t col = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < table.num_columns(); ++j) {
      if (allowed[j] && col_scores(static_cast<Eigen::Index>(j)) > best) {
        best = col_scores(static_cast<Eigen::Index>(j));
        col = j;
      }
    }
    Op op = Op::Eq;
    if (numeric_value && table.is_numeric(col)) {
      Eigen::Index k = 0;
      g.value(heads.op_scores(u)).maxCoeff(&k);
      op = op_from_int(static_cast<int>(k));
    }
    Condition c{col, op, text};
    if (std::find(q.conds.begin(), q.conds.end(), c) == q.conds.end()) q.conds.push_back(std::move(c));
  }

  Eigen::VectorXd sel_lp = log_softmax(g.value(heads.sel_scores(enc.states, enc.cols, enc.words, enc.in_cell)));
  Eigen::VectorXd agg_lp = log_softmax(g.value(heads.agg_scores(enc.states)));
  struct Choice {
    double score;
    std::size_t sel;
    Agg agg;
  };
  std::vector<Choice> choices;
  for (std::size_t j = 0; j < table.num_columns(); ++j)
    for (auto a : kAllAggs)
      if (!is_numeric_agg(a) || table.is_numeric(j))
        choices.push_back({sel_lp(static_cast<Eigen::Index>(j)) + agg_lp(static_cast<int>(a)), j, a});
  auto in_where = [&](std::size_t j) {
    return std::any_of(q.conds.begin(), q.conds.end(), [&](const Condition& c) { return c.col == j; });
  };
  std::stable_sort(choices.begin(), choices.end(), [&](const Choice& a, const Choice& b) {
    bool wa = in_where(a.sel), wb = in_where(b.sel);
    if (wa != wb) return wb;
    return a.score > b.score;
  });
  for (const auto& ch : choices) {
    q.sel_col = ch.sel;
    q.agg = ch.agg;
    try {
      execute(q, table);
      return q;
    } catch (const Error&) {
    }
  }
  // Only MAX/MIN/AVG can fail on a valid query; NONE never does.
  q.agg = Agg::None;
  q.sel_col = choices.front().sel;
  return q;
}

}  // namespace rulesp
