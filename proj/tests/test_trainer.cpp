#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "rulesp/errors.hpp"
#include "rulesp/meta_trainer.hpp"
#include "support.hpp"

using namespace rulesp;
using namespace rulesp::testing;

namespace {

struct Small {
  SyntheticCorpus corpus;
  RuleEngine rules;
  ModelConfig model;
  TrainConfig train;

  explicit Small(std::uint64_t seed = 1) {
    SyntheticSpec spec;
    spec.train = {8, 240};
    spec.dev = {4, 100};
    spec.test = {4, 100};
    spec.seed = 5;
    corpus = generate_synthetic_corpus(spec);
    mark_coverage(corpus.train, rules);
    mark_coverage(corpus.dev, rules);
    mark_coverage(corpus.test, rules);
    model.embedding_dim = 8;
    model.hidden_dim = 12;
    model.seed = seed;
    train.seed = seed;
    train.init_epochs = 12;
    train.epochs = 2;
    train.finalize_epochs = 1;
    train.n_sampled_lfs = 120;
    train.alpha = 0.01;
    train.beta = 0.01;
    train.sampler.cond_count_weights = {0, 0.7, 0.3};
  }

  Trainer trainer(Regime r) const {
    TrainConfig c = train;
    c.regime = r;
    return Trainer(corpus.train, rules, model, c);
  }
};

std::size_t count_covered(const Dataset& ds) {
  return static_cast<std::size_t>(std::count_if(ds.examples.begin(), ds.examples.end(), [](auto& e) { return e.covered; }));
}

// One shared initialization keeps the suite fast.
const Small& small() {
  static const Small s;
  return s;
}

const TrainerState& initial_state() {
  static const TrainerState st = small().trainer(Regime::BT_QC_MAML).initialize();
  return st;
}

}  // namespace

TEST(TrainConfigTest, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.alpha = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.beta = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.inner_steps = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.tau = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(regime_from_string("BT_QC"), Regime::BT_QC);
  EXPECT_THROW(regime_from_string("bt"), ConfigError);
  for (Regime r : kAllRegimes) EXPECT_EQ(regime_from_string(to_string(r)), r);
}

TEST(Initialize, D0IsTheRuleCoveredQuestions) {
  const auto& s = small();
  const TrainerState& st = initial_state();
  EXPECT_EQ(st.d0.size(), count_covered(s.corpus.train));
  for (const auto& ex : st.d0) {
    EXPECT_EQ(ex.provenance, Provenance::Rule);
    EXPECT_TRUE(ex.covered);
    EXPECT_EQ(ex.lf, s.rules.apply(ex.question, s.corpus.train.tables.at(ex.table_id)).lf);
  }
  EXPECT_TRUE(st.pool_self.empty());
  EXPECT_TRUE(st.pool_qgen.empty());
  EXPECT_EQ(st.pt.pair_total(), st.d0.size());
  EXPECT_EQ(st.epoch, 0u);
  double share = static_cast<double>(st.d0.size()) / static_cast<double>(s.corpus.train.size());
  EXPECT_NEAR(share, 0.6, 0.12);
}

TEST(Initialize, BeatsUntrainedParserOnCoveredDev) {
  const auto& s = small();
  Trainer tr = s.trainer(Regime::Base);
  auto golds = gold_of(s.corpus.dev);
  auto trained = execution_accuracy(parse_all(tr.parser(), initial_state().theta, s.corpus.dev), golds, s.corpus.dev);
  auto untrained = execution_accuracy(parse_all(tr.parser(), tr.parser().init(), s.corpus.dev), golds, s.corpus.dev);
  EXPECT_GT(trained.covered, untrained.covered + 0.2);
}

TEST(Initialize, NoCoverageThrows) {
  Dataset ds;
  ds.tables.emplace("t1", t1());
  ds.examples.push_back({tokenize_question("which country performed best"), "t1"});
  ds.examples.push_back({tokenize_question("who did well"), "t1"});
  TrainConfig c;
  c.init_epochs = 1;
  ModelConfig m;
  m.embedding_dim = 4;
  m.hidden_dim = 4;
  Trainer tr(ds, RuleEngine{}, m, c);
  EXPECT_THROW(tr.initialize(), NoRuleCoverage);
}

TEST(PseudoData, PoolsFollowTheRegime) {
  const auto& s = small();
  Trainer tr = s.trainer(Regime::BT);
  auto pools = tr.generate_pseudo_data(initial_state());

  std::multiset<std::pair<Tokens, std::string>> uncovered, seen;
  for (const auto& ex : s.corpus.train.examples)
    if (!ex.covered) uncovered.insert({ex.question, ex.table_id});
  for (const auto& ex : pools.self) {
    seen.insert({ex.question, ex.table_id});
    EXPECT_EQ(ex.provenance, Provenance::Self);
    EXPECT_FALSE(ex.covered);
    EXPECT_TRUE(is_valid(*ex.lf, s.corpus.train.tables.at(ex.table_id)));
  }
  EXPECT_EQ(seen, uncovered);

  EXPECT_LE(pools.qgen.size(), s.train.n_sampled_lfs);
  EXPECT_GT(pools.qgen.size(), 0u);
  for (const auto& ex : pools.qgen) {
    const Table& t = s.corpus.train.tables.at(ex.table_id);
    EXPECT_EQ(ex.provenance, Provenance::QGen);
    EXPECT_NO_THROW(execute(*ex.lf, t));
    EXPECT_LE(ex.question.size(), kMaxQuestionLength);
    EXPECT_EQ(ex.covered, s.rules.is_covered(ex.question, t));
  }

  auto again = tr.generate_pseudo_data(initial_state());
  EXPECT_EQ(again.self, pools.self);
  EXPECT_EQ(again.qgen, pools.qgen);

  EXPECT_TRUE(s.trainer(Regime::SelfTraining).generate_pseudo_data(initial_state()).qgen.empty());
  EXPECT_TRUE(s.trainer(Regime::QGenOnly).generate_pseudo_data(initial_state()).self.empty());
}

TEST(Iteration, UpdatesPhraseTableAndKeepsD0) {
  Trainer tr = small().trainer(Regime::BT_QC);
  PoolCounts counts;
  TrainerState st = tr.train_iteration(initial_state(), &counts);
  EXPECT_GT(st.pt.pair_total(), initial_state().pt.pair_total());
  EXPECT_EQ(st.pt.pair_total(), initial_state().d0.size() + st.pool_self.size() + st.pool_qgen.size());
  EXPECT_EQ(st.d0, initial_state().d0);
  EXPECT_EQ(st.epoch, 1u);
  EXPECT_EQ(counts.self, st.pool_self.size());
  EXPECT_LE(counts.self_kept, counts.self);
  EXPECT_LE(counts.qgen_kept, counts.qgen);
  EXPECT_FALSE(bit_identical(st.theta, initial_state().theta));
}

TEST(Iteration, TwoMetaUpdatesPerPass) {
  Trainer tr = small().trainer(Regime::BT_QC_MAML);
  TrainerState st = initial_state();
  for (int i = 1; i <= 2; ++i) {
    st = tr.train_iteration(std::move(st));
    EXPECT_EQ(tr.meta_updates(), 2u * i);
  }
  EXPECT_FALSE(bit_identical(st.theta, initial_state().theta));
}

TEST(Iteration, ZeroBetaFreezesTheta) {
  Small s;
  s.train.beta = 0;
  Trainer tr = s.trainer(Regime::BT_QC_MAML);
  TrainerState st = initial_state();
  for (int i = 0; i < 3; ++i) {
    st = tr.train_iteration(std::move(st));
    EXPECT_TRUE(bit_identical(st.theta, initial_state().theta)) << "iteration " << i;
  }
}

TEST(Iteration, TaskPartitionFollowsCoverage) {
  Trainer tr = small().trainer(Regime::BT_QC_MAML);
  TrainerState st = tr.train_iteration(initial_state());
  auto covered = tr.task_data(st, TaskKind::RuleCovered);
  auto uncovered = tr.task_data(st, TaskKind::RuleUncovered);
  for (const auto& ex : covered) EXPECT_TRUE(ex.covered);
  for (const auto& ex : uncovered) {
    EXPECT_FALSE(ex.covered);
    EXPECT_NE(ex.provenance, Provenance::Rule);
  }
  for (const auto& ex : st.d0) EXPECT_NE(std::find(covered.begin(), covered.end(), ex), covered.end());
  auto kept_self = filter_pairs(st.pt, st.pool_self, small().corpus.train.tables, small().train.tau).kept;
  auto kept_qgen = filter_pairs(st.pt, st.pool_qgen, small().corpus.train.tables, small().train.tau).kept;
  EXPECT_EQ(covered.size() + uncovered.size(), st.d0.size() + kept_self.size() + kept_qgen.size());
}

TEST(Iteration, ReproducibleForSeed) {
  Trainer a = small().trainer(Regime::BT_QC_MAML);
  Trainer b = small().trainer(Regime::BT_QC_MAML);
  EXPECT_TRUE(a.train_iteration(initial_state()) == b.train_iteration(initial_state()));
}

TEST(Finalize, ZeroEpochsCopiesTheta) {
  Small s;
  s.train.finalize_epochs = 0;
  Trainer tr = s.trainer(Regime::BT_QC_MAML);
  TrainerState st = tr.finalize_task_models(tr.train_iteration(initial_state()));
  EXPECT_TRUE(bit_identical(st.theta_covered, st.theta));
  EXPECT_TRUE(bit_identical(st.theta_uncovered, st.theta));
}

TEST(Finalize, LeavesThetaUntouched) {
  Trainer tr = small().trainer(Regime::BT_QC_MAML);
  TrainerState st = tr.train_iteration(initial_state());
  ParameterSet theta = st.theta;
  TrainerState fin = tr.finalize_task_models(st);
  EXPECT_TRUE(bit_identical(fin.theta, theta));
  EXPECT_FALSE(bit_identical(fin.theta_covered, theta));
  EXPECT_FALSE(bit_identical(fin.theta_uncovered, theta));
  EXPECT_FALSE(bit_identical(fin.theta_covered, fin.theta_uncovered));
}

TEST(Predict, RoutesByDevAccuracy) {
  const auto& s = small();
  Trainer tr = s.trainer(Regime::BT_QC_MAML);
  TrainerState st = tr.finalize_task_models(tr.train_iteration(initial_state()));
  st.theta_covered = tr.parser().init(123);
  std::size_t differ = 0;
  for (const auto& ex : s.corpus.dev.examples) {
    const Table& t = s.corpus.dev.table_of(ex);
    SQLQuery rule_first = predict(ex.question, t, st, {0.77, 0.75}, tr.parser(), s.rules);
    SQLQuery model_first = predict(ex.question, t, st, {0.75, 0.77}, tr.parser(), s.rules);
    if (ex.covered) {
      EXPECT_EQ(rule_first, *s.rules.apply(ex.question, t).lf);
      EXPECT_EQ(model_first, tr.parser().parse(ex.question, t, st.theta_covered));
      differ += !(rule_first == model_first);
    } else {
      EXPECT_EQ(rule_first, tr.parser().parse(ex.question, t, st.theta_uncovered));
      EXPECT_EQ(model_first, rule_first);
    }
  }
  EXPECT_GT(differ, 0u);
}

TEST(Regimes, RuleOnlyScoresZeroOnUncovered) {
  const auto& s = small();
  Trainer tr = s.trainer(Regime::RuleOnly);
  RegimeResult r = run_regime(tr, s.corpus.dev, s.corpus.test);
  EXPECT_EQ(r.dev.uncovered, 0.0);
  EXPECT_EQ(r.test.uncovered, 0.0);
  EXPECT_GT(r.dev.covered, 0.5);
  EXPECT_EQ(r.history.size(), 1u);
}

TEST(Regimes, BaseEqualsBtWithoutPseudoData) {
  const auto& s = small();
  Trainer base = s.trainer(Regime::Base);
  RegimeResult b = run_regime(base, s.corpus.dev, s.corpus.test, &initial_state());

  Small t;
  t.train.tau = 1.0;
  t.train.qc_smoothing = 1e-9;
  Trainer filtered_all = t.trainer(Regime::BT_QC);
  RegimeResult f = run_regime(filtered_all, s.corpus.dev, s.corpus.test, &initial_state());
  for (const auto& rec : f.history) EXPECT_EQ(rec.pools.self_kept + rec.pools.qgen_kept, 0u);
  EXPECT_TRUE(bit_identical(f.state.theta, b.state.theta));
  EXPECT_EQ(f.test.overall, b.test.overall);
}

TEST(Regimes, RoutedCoveredAccuracyNeverBelowRule) {
  const auto& s = small();
  Trainer tr = s.trainer(Regime::BT_QC_MAML);
  RegimeResult r = run_regime(tr, s.corpus.dev, s.corpus.test, &initial_state());
  Trainer rule = s.trainer(Regime::RuleOnly);
  RegimeResult ro = run_regime(rule, s.corpus.dev, s.corpus.test);
  EXPECT_GE(r.dev.covered, ro.dev.covered);
  EXPECT_EQ(r.dev_stats.rule_covered_acc, ro.dev.covered);
}

TEST(Regimes, ReportsAreConsistent) {
  const auto& s = small();
  Trainer tr = s.trainer(Regime::BT);
  std::size_t calls = 0;
  RegimeResult r = run_regime(tr, s.corpus.dev, s.corpus.test, &initial_state(),
                              [&](const EpochRecord& rec, const TrainerState& st) {
                                EXPECT_EQ(rec.epoch, st.epoch);
                                ++calls;
                              });
  EXPECT_EQ(calls, s.train.epochs + 1);
  EXPECT_EQ(r.history.size(), calls);
  for (const AccuracyReport& a : {r.dev, r.test}) {
    std::size_t n = a.n_covered + a.n_uncovered;
    EXPECT_EQ(a.overall, static_cast<double>(a.correct_covered + a.correct_uncovered) / static_cast<double>(n));
    EXPECT_NEAR(a.overall, (a.covered * a.n_covered + a.uncovered * a.n_uncovered) / n, 1e-12);
  }
}
