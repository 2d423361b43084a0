#include "rulesp/generator.hpp"

#include <algorithm>
#include <map>

#include "birnn.hpp"
#include "rulesp/autodiff.hpp"
#include "rulesp/errors.hpp"

namespace rulesp {
namespace {

enum Block : std::size_t {
  kSrcEmb,
  kSlotEmb,
  kRnn,
  kInitW = kRnn + 6,
  kInitB,
  kOutEmb,
  kDecX,
  kDecH,
  kDecC,
  kDecB,
  kAtt,
  kOD,
  kOC,
  kOB,
  kVocW,
  kVocB,
  kCopyW,
  kNumBlocks
};

struct Encoded {
  std::vector<ad::Expr> states;
  ad::Expr d0;
  ad::Expr ctx0;
};

struct Step {
  ad::Expr state;
  ad::Expr ctx;
  ad::Expr scores;  // vocabulary scores followed by one copy score per source word
};

}  // namespace

GeneratorSource generator_source(const SQLQuery& lf, const Table& table) {
  validate(lf, table);
  GeneratorSource s;
  auto push = [&](const std::string& w, int slot) {
    s.words.push_back(w);
    s.slots.push_back(slot);
  };
  auto push_words = [&](const Tokens& ws, int slot) {
    for (const auto& w : ws)
      if (!is_punctuation(w)) push(w, slot);
  };
  push(kAggMarker, 0);
  push(std::string("agg:") + agg_name(lf.agg), 0);
  push(kSelMarker, 0);
  push_words(table.column_tokens(lf.sel_col), 1);
  for (std::size_t i = 0; i < lf.conds.size(); ++i) {
    const auto& c = lf.conds[i];
    push(i == 0 ? kWhereMarker : kAndMarker, 0);
    push_words(table.column_tokens(c.col), 2);
    push(std::string("op:") + op_symbol(c.op), 0);
    push_words(tokenize(c.value), 3);
  }
  return s;
}

Generator::Generator(ModelConfig config, Vocab vocab) : config_(config), vocab_(std::move(vocab)) {
  config_.validate();
  const auto e = static_cast<Eigen::Index>(config_.embedding_dim);
  const auto h = static_cast<Eigen::Index>(config_.hidden_dim);
  const auto hh = 2 * h;
  const auto v = static_cast<Eigen::Index>(vocab_.size());
  auto& p = layout_;
  p.add("src_emb", e, v);
  p.add("slot_emb", e, 4);
  BiRnnBlocks::add(p, "enc", e, h);
  p.add("init_w", h, hh);
  p.add("init_b", h, 1);
  p.add("out_emb", e, v);
  p.add("dec_x", h, e);
  p.add("dec_h", h, h);
  p.add("dec_c", h, hh);
  p.add("dec_b", h, 1);
  p.add("att", hh, h);
  p.add("o_d", h, h);
  p.add("o_c", h, hh);
  p.add("o_b", h, 1);
  p.add("voc_w", v, h);
  p.add("voc_b", v, 1);
  p.add("copy_w", hh, h);
  if (p.num_blocks() != kNumBlocks) throw std::logic_error("generator block layout mismatch");
}

std::uint64_t Generator::fingerprint() const {
  std::uint64_t h = fnv1a("generator", config_.hash() ^ vocab_.fingerprint());
  for (std::size_t i = 0; i < layout_.num_blocks(); ++i)
    h = fnv1a(layout_.name(i) + ":" + std::to_string(layout_[i].rows()) + "x" + std::to_string(layout_[i].cols()), h);
  return h;
}

ParameterSet Generator::init(std::uint64_t seed) const {
  ParameterSet p = layout_.zeros_like();
  std::mt19937_64 rng(seed);
  p.randomize(rng, config_.init_scale);
  return p;
}

namespace {

Encoded encode(ad::Graph& g, const Vocab& vocab, const ModelConfig& cfg, const GeneratorSource& src) {
  std::vector<ad::Expr> xs;
  for (std::size_t k = 0; k < src.words.size(); ++k)
    xs.push_back(g.add(g.lookup(kSrcEmb, vocab.id(src.words[k])), g.lookup(kSlotEmb, src.slots[k])));
  BiRnnBlocks rnn{kRnn, kRnn + 1, kRnn + 2, kRnn + 3, kRnn + 4, kRnn + 5, static_cast<Eigen::Index>(cfg.hidden_dim)};
  BiRnnStates s = run_birnn(g, rnn, xs);
  Encoded enc;
  enc.states = std::move(s.both);
  ad::Expr ends[2] = {s.fw.back(), s.bw.front()};
  enc.d0 = g.tanh(g.affine(kInitB, {{kInitW, g.concat(ends)}}));
  enc.ctx0 = g.input(Eigen::VectorXd::Zero(2 * static_cast<Eigen::Index>(cfg.hidden_dim)));
  return enc;
}

Step step(ad::Graph& g, const Encoded& enc, ad::Expr prev_state, ad::Expr prev_ctx, int prev_word) {
  Step s;
  s.state = g.tanh(g.affine(kDecB, {{kDecX, g.lookup(kOutEmb, prev_word)}, {kDecH, prev_state}, {kDecC, prev_ctx}}));
  ad::Expr query = g.matvec(kAtt, s.state);
  std::vector<ad::Expr> att(enc.states.size());
  for (std::size_t k = 0; k < enc.states.size(); ++k) att[k] = g.dot(enc.states[k], query);
  s.ctx = g.weighted_sum(g.softmax(g.stack(att)), enc.states);
  ad::Expr o = g.tanh(g.affine(kOB, {{kOD, s.state}, {kOC, s.ctx}}));
  ad::Expr copy_query = g.matvec(kCopyW, o);
  std::vector<ad::Expr> copy(enc.states.size());
  for (std::size_t k = 0; k < enc.states.size(); ++k) copy[k] = g.dot(enc.states[k], copy_query);
  ad::Expr parts[2] = {g.affine(kVocB, {{kVocW, o}}), g.stack(copy)};
  s.scores = g.concat(parts);
  return s;
}

}  // namespace

double Generator::example_loss(const ParameterSet& params, ParameterSet* grads, const Example& ex,
                               const Table& table) const {
  if (!ex.lf) throw InvalidQuery("generator loss needs an lf on every example");
  GeneratorSource src = generator_source(*ex.lf, table);
  ad::Graph g(params, grads);
  Encoded enc = encode(g, vocab_, config_, src);
  const int v = static_cast<int>(vocab_.size());
  const auto n_reserved = static_cast<int>(Vocab::reserved().size());

  std::vector<ad::Expr> terms;
  ad::Expr state = enc.d0, ctx = enc.ctx0;
  int prev = Vocab::kBos;
  const std::size_t len = std::min(ex.question.size(), kMaxQuestionLength);
  for (std::size_t t = 0; t <= len; ++t) {
    Step s = step(g, enc, state, ctx, prev);
    std::vector<int> targets;
    int next = Vocab::kEos;
    if (t < len) {
      const std::string& w = ex.question[t];
      next = vocab_.id(w);
      if (next >= n_reserved) targets.push_back(next);
      for (std::size_t k = 0; k < src.words.size(); ++k)
        if (src.slots[k] != 0 && src.words[k] == w) targets.push_back(v + static_cast<int>(k));
      if (targets.empty()) targets.push_back(Vocab::kUnk);
    } else {
      targets.push_back(Vocab::kEos);
    }
    terms.push_back(g.set_nll(s.scores, targets));
    state = s.state;
    ctx = s.ctx;
    prev = next;
  }
  ad::Expr total = g.sum(terms);
  if (grads) g.backward(total);
  return g.scalar(total);
}

LossGrad Generator::loss(const ParameterSet& params, std::span<const Example> batch, const TableMap& tables) const {
  if (batch.empty()) throw EmptyBatch("generator loss on an empty batch");
  LossGrad out{0.0, params.zeros_like()};
  for (const auto& ex : batch) {
    auto it = tables.find(ex.table_id);
    if (it == tables.end()) throw DanglingReference("unknown table '" + ex.table_id + "'");
    out.loss += example_loss(params, &out.grad, ex, it->second);
  }
  return out;
}

double Generator::loss_value(const ParameterSet& params, std::span<const Example> batch,
                             const TableMap& tables) const {
  if (batch.empty()) throw EmptyBatch("generator loss on an empty batch");
  double total = 0;
  for (const auto& ex : batch) {
    auto it = tables.find(ex.table_id);
    if (it == tables.end()) throw DanglingReference("unknown table '" + ex.table_id + "'");
    total += example_loss(params, nullptr, ex, it->second);
  }
  return total;
}

GeneratedQuestion Generator::generate(const SQLQuery& lf, const Table& table, const ParameterSet& params,
                                      DecodeMode mode, std::mt19937_64* rng) const {
  if (mode == DecodeMode::Sample && !rng) throw std::invalid_argument("sampling needs a random engine");
  GeneratorSource src = generator_source(lf, table);
  ad::Graph g(params);
  Encoded enc = encode(g, vocab_, config_, src);
  const auto v = static_cast<Eigen::Index>(vocab_.size());
  const auto n_reserved = static_cast<Eigen::Index>(Vocab::reserved().size());

  // Copyable source words outside the vocabulary get extra slots after it.
  std::vector<std::string> extra;
  std::vector<Eigen::Index> copy_slot(src.words.size(), -1);
  for (std::size_t k = 0; k < src.words.size(); ++k) {
    if (src.slots[k] == 0) continue;
    int id = vocab_.id(src.words[k]);
    if (id >= n_reserved) {
      copy_slot[k] = id;
      continue;
    }
    auto it = std::find(extra.begin(), extra.end(), src.words[k]);
    copy_slot[k] = v + (it - extra.begin());
    if (it == extra.end()) extra.push_back(src.words[k]);
  }

  GeneratedQuestion out;
  ad::Expr state = enc.d0, ctx = enc.ctx0;
  int prev = Vocab::kBos;
  for (;;) {
    if (out.tokens.size() >= kMaxQuestionLength) {
      out.truncated = true;
      break;
    }
    Step s = step(g, enc, state, ctx, prev);
    const Eigen::VectorXd& sc = g.value(s.scores);
    Eigen::VectorXd p = (sc.array() - sc.maxCoeff()).exp();
    Eigen::VectorXd word_p = Eigen::VectorXd::Zero(v + static_cast<Eigen::Index>(extra.size()));
    word_p.head(v) = p.head(v);
    for (std::size_t k = 0; k < src.words.size(); ++k)
      if (copy_slot[k] >= 0) word_p(copy_slot[k]) += p(v + static_cast<Eigen::Index>(k));
    for (Eigen::Index r = 0; r < n_reserved; ++r)
      if (r != Vocab::kEos) word_p(r) = 0;
    Eigen::Index choice = 0;
    if (mode == DecodeMode::Greedy) {
      word_p.maxCoeff(&choice);
    } else {
      std::uniform_real_distribution<double> unif(0.0, word_p.sum());
      double r = unif(*rng), acc = 0;
      choice = word_p.size() - 1;
      for (Eigen::Index i = 0; i < word_p.size(); ++i) {
        acc += word_p(i);
        if (r < acc) {
          choice = i;
          break;
        }
      }
    }
    if (choice == Vocab::kEos) break;
    const std::string& w = choice < v ? vocab_.word(static_cast<int>(choice)) : extra[static_cast<std::size_t>(choice - v)];
    out.tokens.push_back(w);
    state = s.state;
    ctx = s.ctx;
    prev = vocab_.id(w);
  }
  return out;
}

}  // namespace rulesp
