#include "rulesp/meta_trainer.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "rulesp/errors.hpp"

namespace rulesp {
namespace {

enum Purpose : std::uint64_t {
  kParserInit = 1,
  kGeneratorInit,
  kInitParserShuffle,
  kInitGeneratorShuffle,
  kSampleLFs,
  kDecode,
  kGeneratorShuffle,
  kParserShuffle,
  kTaskSampling,
  kFinalizeCovered,
  kFinalizeUncovered,
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

bool uses_self(Regime r) {
  return r == Regime::SelfTraining || r == Regime::BT || r == Regime::BT_QC || r == Regime::BT_QC_MAML;
}
bool uses_qgen(Regime r) {
  return r == Regime::QGenOnly || r == Regime::BT || r == Regime::BT_QC || r == Regime::BT_QC_MAML;
}
bool uses_qc(Regime r) { return r == Regime::BT_QC || r == Regime::BT_QC_MAML; }
bool retrains_generator(Regime r) { return r == Regime::BT || r == Regime::BT_QC || r == Regime::BT_QC_MAML; }

std::vector<Example> sample_batch(const std::vector<Example>& data, std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  n = std::min(n, data.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = std::uniform_int_distribution<std::size_t>(i, idx.size() - 1)(rng);
    std::swap(idx[i], idx[j]);
  }
  std::vector<Example> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(data[idx[i]]);
  return out;
}

void sgd_epochs(ParameterSet& params, const std::vector<Example>& data, const LossFn& loss, double lr,
                double clip_norm, std::size_t epochs, std::size_t batch_size, std::uint64_t seed) {
  if (data.empty()) return;
  std::vector<Example> shuffled = data;
  for (std::size_t e = 0; e < epochs; ++e) {
    std::mt19937_64 rng(splitmix64(seed + e));
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    for (std::size_t b = 0; b < shuffled.size(); b += batch_size) {
      std::span<const Example> batch(shuffled.data() + b, std::min(batch_size, shuffled.size() - b));
      params = sgd_step(params, batch, lr, loss, clip_norm);
    }
  }
}

std::vector<Example> concat(std::initializer_list<const std::vector<Example>*> parts) {
  std::vector<Example> out;
  for (const auto* p : parts) out.insert(out.end(), p->begin(), p->end());
  return out;
}

}  // namespace

const char* to_string(Regime r) {
  switch (r) {
    case Regime::RuleOnly: return "RULE_ONLY";
    case Regime::Base: return "BASE";
    case Regime::SelfTraining: return "SELF_TRAINING";
    case Regime::QGenOnly: return "QGEN_ONLY";
    case Regime::BT: return "BT";
    case Regime::BT_QC: return "BT_QC";
    case Regime::BT_QC_MAML: return "BT_QC_MAML";
  }
  return "?";
}

Regime regime_from_string(const std::string& s) {
  for (auto r : kAllRegimes)
    if (s == to_string(r)) return r;
  throw ConfigError("unknown regime '" + s + "'");
}

void TrainConfig::validate() const {
  if (!(alpha > 0)) throw ConfigError("alpha must be > 0");
  if (!(beta >= 0)) throw ConfigError("beta must be >= 0");
  if (inner_steps < 1) throw ConfigError("inner_steps must be >= 1");
  if (!(tau >= 0 && tau <= 1)) throw ConfigError("tau must lie in [0, 1]");
  if (batch_size == 0 || meta_batch_size == 0) throw ConfigError("batch sizes must be positive");
  if (!(lr >= 0)) throw ConfigError("lr must be >= 0");
  if (!(qc_smoothing > 0)) throw ConfigError("qc_smoothing must be > 0");
  if (episodes_per_iteration == 0) throw ConfigError("episodes_per_iteration must be positive");
}

bool operator==(const TrainerState& a, const TrainerState& b) {
  return bit_identical(a.theta, b.theta) && bit_identical(a.theta_covered, b.theta_covered) &&
         bit_identical(a.theta_uncovered, b.theta_uncovered) && bit_identical(a.gen, b.gen) && a.pt == b.pt &&
         a.d0 == b.d0 && a.pool_self == b.pool_self && a.pool_qgen == b.pool_qgen && a.epoch == b.epoch;
}

ParameterSet inner_update(const ParameterSet& theta, std::span<const Example> batch, const LossFn& loss, double alpha,
                          std::size_t steps, double clip_norm) {
  ParameterSet theta_i = theta;
  for (std::size_t s = 0; s < steps; ++s) theta_i = sgd_step(theta_i, batch, alpha, loss, clip_norm);
  return theta_i;
}

ParameterSet meta_update(const ParameterSet& theta, const ParameterSet& theta_i, std::span<const Example> meta_batch,
                         const LossFn& loss, double beta, double clip_norm) {
  LossGrad lg = loss(theta_i, meta_batch);
  return apply_gradient(theta, lg.grad, beta, clip_norm);
}

void mark_coverage(Dataset& dataset, const RuleEngine& rules) {
  for (auto& ex : dataset.examples) ex.covered = rules.is_covered(ex.question, dataset.table_of(ex));
}

Vocab build_vocab(const Dataset& train, const ModelConfig& config) {
  std::vector<Tokens> corpus;
  corpus.reserve(train.examples.size() + train.tables.size());
  for (const auto& ex : train.examples) corpus.push_back(ex.question);
  for (const auto& [id, t] : train.tables) {
    Tokens words;
    for (std::size_t j = 0; j < t.num_columns(); ++j)
      for (const auto& w : t.column_tokens(j)) words.push_back(w);
    // Column names always enter the vocabulary.
    for (std::size_t k = 0; k < config.min_count; ++k) corpus.push_back(words);
  }
  return Vocab::build(corpus, config.min_count, config.vocab_cap);
}

Trainer::Trainer(const Dataset& train, RuleEngine rules, ModelConfig model_config, TrainConfig config)
    : train_(train),
      rules_(std::move(rules)),
      config_(config),
      parser_(model_config, build_vocab(train, model_config)),
      generator_(model_config, parser_.vocab()) {
  config_.validate();
  mark_coverage(train_, rules_);
  for (std::size_t i = 0; i < train_.examples.size(); ++i)
    if (!train_.examples[i].covered) uncovered_.push_back(i);
}

void Trainer::set_config(const TrainConfig& c) {
  c.validate();
  config_ = c;
}

void Trainer::reset() {
  parser_opt_.reset();
  generator_opt_.reset();
  meta_opt_.reset();
  meta_updates_ = 0;
  warnings_.clear();
}

LossFn Trainer::parser_loss() const {
  return [this](const ParameterSet& p, std::span<const Example> batch) { return parser_.loss(p, batch, train_.tables); };
}

LossFn Trainer::generator_loss() const {
  return [this](const ParameterSet& p, std::span<const Example> batch) {
    return generator_.loss(p, batch, train_.tables);
  };
}

std::uint64_t Trainer::stream_seed(std::uint64_t epoch, std::uint64_t purpose) const {
  return splitmix64(splitmix64(splitmix64(config_.seed) ^ epoch) ^ purpose);
}

void Trainer::train_epochs(ParameterSet& params, std::span<const Example> data, const LossFn& loss, Adam& opt,
                           std::size_t epochs, std::uint64_t stream) const {
  if (data.empty()) return;
  std::vector<Example> shuffled(data.begin(), data.end());
  for (std::size_t e = 0; e < epochs; ++e) {
    std::mt19937_64 rng(splitmix64(stream + e));
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    for (std::size_t b = 0; b < shuffled.size(); b += config_.batch_size) {
      std::span<const Example> batch(shuffled.data() + b, std::min(config_.batch_size, shuffled.size() - b));
      params = opt.step(params, loss(params, batch).grad);
    }
  }
}

TrainerState Trainer::initialize() const {
  TrainerState s;
  for (const auto& ex : train_.examples) {
    RuleOutput out = rules_.apply(ex.question, train_.table_of(ex));
    if (out.covered()) s.d0.push_back(Example{ex.question, ex.table_id, out.lf, Provenance::Rule, true});
  }
  if (s.d0.empty()) throw NoRuleCoverage("the rule covers none of the training questions");
  s.theta = parser_.init(stream_seed(0, kParserInit));
  s.gen = generator_.init(stream_seed(0, kGeneratorInit));
  Adam popt(config_.lr, config_.clip_norm);
  train_epochs(s.theta, s.d0, parser_loss(), popt, config_.init_epochs, stream_seed(0, kInitParserShuffle));
  Adam gopt(config_.lr, config_.clip_norm);
  train_epochs(s.gen, s.d0, generator_loss(), gopt, config_.init_epochs, stream_seed(0, kInitGeneratorShuffle));
  s.pt = update_phrase_table(PhraseTable{}, s.d0, train_.tables);
  s.theta_covered = s.theta;
  s.theta_uncovered = s.theta;
  return s;
}

Trainer::Pools Trainer::generate_pseudo_data(const TrainerState& state) const {
  Pools pools;
  const Regime r = config_.regime;
  if (uses_self(r)) {
    for (auto i : uncovered_) {
      const Example& ex = train_.examples[i];
      SQLQuery lf = parser_.parse(ex.question, train_.table_of(ex), state.theta);
      pools.self.push_back(Example{ex.question, ex.table_id, std::move(lf), Provenance::Self, false});
    }
  }
  if (uses_qgen(r)) {
    std::size_t n = config_.n_sampled_lfs ? config_.n_sampled_lfs : train_.examples.size();
    std::vector<std::string> warnings;
    auto lfs = sample_logical_forms(train_.tables, n, stream_seed(state.epoch, kSampleLFs), config_.sampler, &warnings);
    std::mt19937_64 rng(stream_seed(state.epoch, kDecode));
    for (auto& s : lfs) {
      const Table& t = train_.tables.at(s.table_id);
      GeneratedQuestion gq = generator_.generate(s.lf, t, state.gen, config_.qgen_decode, &rng);
      if (gq.truncated || gq.tokens.empty()) continue;
      auto targets = parser_targets(gq.tokens, s.lf);
      if (std::any_of(targets.spans.begin(), targets.spans.end(), [](const auto& sp) { return !sp.has_value(); }))
        continue;
      bool covered = rules_.is_covered(gq.tokens, t);
      pools.qgen.push_back(Example{std::move(gq.tokens), s.table_id, std::move(s.lf), Provenance::QGen, covered});
    }
  }
  return pools;
}

std::vector<Example> Trainer::filtered(const TrainerState& state, const std::vector<Example>& pool) const {
  if (!uses_qc(config_.regime) || pool.empty()) return pool;
  return filter_pairs(state.pt, pool, train_.tables, config_.tau, config_.qc_smoothing).kept;
}

std::vector<Example> Trainer::task_data_from(const TrainerState& state, TaskKind kind,
                                             const std::vector<Example>& self_kept,
                                             const std::vector<Example>& qgen_kept) const {
  const bool want_covered = kind == TaskKind::RuleCovered;
  std::vector<Example> out;
  if (want_covered) out = state.d0;
  for (const auto* pool : {&self_kept, &qgen_kept})
    for (const auto& ex : *pool)
      if (ex.covered == want_covered) out.push_back(ex);
  return out;
}

std::vector<Example> Trainer::task_data(const TrainerState& state, TaskKind kind) const {
  return task_data_from(state, kind, filtered(state, state.pool_self), filtered(state, state.pool_qgen));
}

TrainerState Trainer::train_iteration(TrainerState state, PoolCounts* counts) {
  const Regime r = config_.regime;
  if (r == Regime::RuleOnly || r == Regime::Base) return state;
  Pools pools = generate_pseudo_data(state);
  state.pool_self = std::move(pools.self);
  state.pool_qgen = std::move(pools.qgen);
  state.pt = update_phrase_table(state.pt, state.pool_self, train_.tables);
  state.pt = update_phrase_table(state.pt, state.pool_qgen, train_.tables);
  std::vector<Example> self_kept = filtered(state, state.pool_self);
  std::vector<Example> qgen_kept = filtered(state, state.pool_qgen);
  if (counts) *counts = {state.pool_self.size(), state.pool_qgen.size(), self_kept.size(), qgen_kept.size()};

  if (!parser_opt_) parser_opt_ = std::make_unique<Adam>(config_.lr, config_.clip_norm);
  if (!generator_opt_) generator_opt_ = std::make_unique<Adam>(config_.lr, config_.clip_norm);

  if (retrains_generator(r) && !self_kept.empty()) {
    auto data = concat({&state.d0, &self_kept});
    train_epochs(state.gen, data, generator_loss(), *generator_opt_, 1, stream_seed(state.epoch, kGeneratorShuffle));
  }

  if (r == Regime::BT_QC_MAML) {
    const auto loss = parser_loss();
    std::mt19937_64 rng(stream_seed(state.epoch, kTaskSampling));
    std::vector<Example> tasks[2] = {task_data_from(state, TaskKind::RuleCovered, self_kept, qgen_kept),
                                     task_data_from(state, TaskKind::RuleUncovered, self_kept, qgen_kept)};
    for (std::size_t ep = 0; ep < config_.episodes_per_iteration; ++ep) {
      for (int k = 0; k < 2; ++k) {
        if (tasks[k].empty()) {
          if (ep == 0)
            warnings_.push_back("epoch " + std::to_string(state.epoch) + ": no data for the " +
                                (k == 0 ? "rule-covered" : "rule-uncovered") + " task, skipped");
          continue;
        }
        auto d_i = sample_batch(tasks[k], config_.batch_size, rng);
        ParameterSet theta_i =
            inner_update(state.theta, d_i, loss, config_.alpha, config_.inner_steps, config_.meta_clip_norm);
        auto d_meta = sample_batch(tasks[k], config_.meta_batch_size, rng);
        if (config_.meta_optimizer == MetaOptimizer::Adam) {
          if (!meta_opt_) meta_opt_ = std::make_unique<Adam>(config_.beta, config_.meta_clip_norm);
          state.theta = meta_opt_->step(state.theta, loss(theta_i, d_meta).grad);
        } else {
          state.theta = meta_update(state.theta, theta_i, d_meta, loss, config_.beta, config_.meta_clip_norm);
        }
        ++meta_updates_;
      }
    }
  } else if (!self_kept.empty() || !qgen_kept.empty()) {
    auto data = concat({&state.d0, &self_kept, &qgen_kept});
    train_epochs(state.theta, data, parser_loss(), *parser_opt_, 1, stream_seed(state.epoch, kParserShuffle));
  }
  ++state.epoch;
  return state;
}

TrainerState Trainer::finalize_task_models(TrainerState state) const {
  if (config_.regime != Regime::BT_QC_MAML) {
    state.theta_covered = state.theta;
    state.theta_uncovered = state.theta;
    return state;
  }
  const auto loss = parser_loss();
  state.theta_covered = state.theta;
  sgd_epochs(state.theta_covered, task_data(state, TaskKind::RuleCovered), loss, config_.alpha,
             config_.meta_clip_norm, config_.finalize_epochs, config_.batch_size,
             stream_seed(state.epoch, kFinalizeCovered));
  state.theta_uncovered = state.theta;
  sgd_epochs(state.theta_uncovered, task_data(state, TaskKind::RuleUncovered), loss, config_.alpha,
             config_.meta_clip_norm, config_.finalize_epochs, config_.batch_size,
             stream_seed(state.epoch, kFinalizeUncovered));
  return state;
}

SQLQuery predict(const Tokens& question, const Table& table, const TrainerState& state, const DevStats& dev_stats,
                 const Parser& parser, const RuleEngine& rules) {
  RuleOutput out = rules.apply(question, table);
  if (out.covered()) {
    if (dev_stats.rule_covered_acc > dev_stats.model_covered_acc) return *out.lf;
    return parser.parse(question, table, state.theta_covered);
  }
  return parser.parse(question, table, state.theta_uncovered);
}

std::vector<std::optional<SQLQuery>> parse_all(const Parser& parser, const ParameterSet& params,
                                               const Dataset& dataset) {
  std::vector<std::optional<SQLQuery>> out;
  out.reserve(dataset.size());
  for (const auto& ex : dataset.examples) out.emplace_back(parser.parse(ex.question, dataset.table_of(ex), params));
  return out;
}

std::vector<std::optional<SQLQuery>> rule_all(const RuleEngine& rules, const Dataset& dataset) {
  std::vector<std::optional<SQLQuery>> out;
  out.reserve(dataset.size());
  for (const auto& ex : dataset.examples) out.push_back(rules.apply(ex.question, dataset.table_of(ex)).lf);
  return out;
}

std::vector<SQLQuery> gold_of(const Dataset& dataset) {
  if (dataset.evaluation_gold.size() != dataset.size()) throw ConfigError("evaluation split has no gold queries");
  std::vector<SQLQuery> out;
  out.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!dataset.evaluation_gold[i]) throw ConfigError("evaluation example " + std::to_string(i) + " has no gold query");
    out.push_back(*dataset.evaluation_gold[i]);
  }
  return out;
}

DevStats compute_dev_stats(const TrainerState& state, const Parser& parser, const RuleEngine& rules,
                           const Dataset& dev) {
  DevStats s;
  std::size_t n = 0, rule_ok = 0, model_ok = 0;
  for (std::size_t i = 0; i < dev.size(); ++i) {
    const Example& ex = dev.examples[i];
    if (!ex.covered || !dev.evaluation_gold.at(i)) continue;
    const Table& t = dev.table_of(ex);
    ++n;
    if (denotation_correct(rules.apply(ex.question, t).lf, *dev.evaluation_gold[i], t)) ++rule_ok;
    if (denotation_correct(parser.parse(ex.question, t, state.theta_covered), *dev.evaluation_gold[i], t)) ++model_ok;
  }
  if (n) {
    s.rule_covered_acc = static_cast<double>(rule_ok) / static_cast<double>(n);
    s.model_covered_acc = static_cast<double>(model_ok) / static_cast<double>(n);
  }
  return s;
}

AccuracyReport evaluate_state(Regime regime, const TrainerState& state, const DevStats& dev_stats,
                              const Parser& parser, const RuleEngine& rules, const Dataset& split) {
  if (regime == Regime::RuleOnly) return execution_accuracy(rule_all(rules, split), gold_of(split), split);
  if (regime != Regime::BT_QC_MAML) return execution_accuracy(parse_all(parser, state.theta, split), gold_of(split), split);
  std::vector<std::optional<SQLQuery>> preds;
  preds.reserve(split.size());
  for (const auto& ex : split.examples)
    preds.emplace_back(predict(ex.question, split.table_of(ex), state, dev_stats, parser, rules));
  return execution_accuracy(preds, gold_of(split), split);
}

namespace {

AccuracyReport evaluate_final(const Trainer& trainer, const RegimeResult& r, const Dataset& split) {
  return evaluate_state(r.regime, r.state, r.dev_stats, trainer.parser(), trainer.rules(), split);
}

}  // namespace

RegimeResult run_regime(Trainer& trainer, const Dataset& dev, const Dataset& test, const TrainerState* initial,
                        const EpochCallback& on_epoch) {
  trainer.reset();
  RegimeResult res;
  const TrainConfig& cfg = trainer.config();
  res.regime = cfg.regime;
  auto record = [&](const TrainerState& state, const AccuracyReport& dev_acc, const PoolCounts& pools) {
    EpochRecord rec{state.epoch, cfg.regime, dev_acc, pools, trainer.meta_updates()};
    res.history.push_back(rec);
    if (on_epoch) on_epoch(rec, state);
  };

  if (cfg.regime == Regime::RuleOnly) {
    res.dev = evaluate_final(trainer, res, dev);
    record(res.state, res.dev, {});
    res.test = evaluate_final(trainer, res, test);
    return res;
  }

  TrainerState state = initial ? *initial : trainer.initialize();
  AccuracyReport acc = execution_accuracy(parse_all(trainer.parser(), state.theta, dev), gold_of(dev), dev);
  record(state, acc, {});
  if (cfg.regime != Regime::Base) {
    std::optional<TrainerState> best;
    double best_acc = -1;
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
      PoolCounts counts;
      state = trainer.train_iteration(std::move(state), &counts);
      acc = execution_accuracy(parse_all(trainer.parser(), state.theta, dev), gold_of(dev), dev);
      record(state, acc, counts);
      if (cfg.select_best_dev && acc.overall > best_acc) {
        best_acc = acc.overall;
        best = state;
      }
    }
    if (best) state = std::move(*best);
  }
  res.state = trainer.finalize_task_models(std::move(state));
  res.dev_stats = compute_dev_stats(res.state, trainer.parser(), trainer.rules(), dev);
  res.dev = evaluate_final(trainer, res, dev);
  res.test = evaluate_final(trainer, res, test);
  return res;
}

}  // namespace rulesp
