// Acceptance suite: one PASS/FAIL/SKIP line per criterion.
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "rulesp/harness.hpp"
#include "rulesp/phrase_table.hpp"
#include "support.hpp"

using namespace rulesp;
using namespace rulesp::testing;

namespace {

// Criterion 1 bands (fractions).
constexpr double kWikiCoverage = 0.784, kWikiCoveredAcc = 0.779, kWikiTestOverall = 0.618, kWikiBand = 0.04;
constexpr double kWikiMinutes = 10;
// Criterion 2 margins (fractions of accuracy).
constexpr double kOrderSlack = 0.005, kBtGain = 0.01, kUncoveredGain = 0.02;
constexpr double kSweepMinutes = 30;
constexpr std::size_t kOracleCases = 1000;
constexpr std::size_t kFdCoords = 5;
constexpr double kFdTolerance = 1e-4;
constexpr std::size_t kQcPool = 500;

enum class Verdict { Pass, Fail, Skip };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

Outcome check(bool ok, std::string detail) { return {ok ? Verdict::Pass : Verdict::Fail, std::move(detail)}; }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double minutes_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
}

AccuracyReport rule_accuracy(const Dataset& ds, const RuleEngine& rules) {
  return execution_accuracy(rule_all(rules, ds), gold_of(ds), ds);
}

Outcome wikisql_fidelity() {
  const char* dir = std::getenv("WIKISQL_DIR");
  if (!dir || !*dir) return {Verdict::Skip, "WIKISQL_DIR not set"};
  auto t0 = std::chrono::steady_clock::now();
  std::filesystem::path root(dir);
  LoadOptions lenient;
  lenient.strict = false;
  Dataset train = load_dataset(root / "train.jsonl", root / "train.tables.jsonl", lenient);
  Dataset test = load_dataset(root / "test.jsonl", root / "test.tables.jsonl", lenient);
  RuleEngine rules;
  mark_coverage(train, rules);
  mark_coverage(test, rules);
  AccuracyReport tr = rule_accuracy(train, rules);
  AccuracyReport te = rule_accuracy(test, rules);
  double cov = static_cast<double>(tr.n_covered) / static_cast<double>(tr.n_covered + tr.n_uncovered);
  double mins = minutes_since(t0);
  bool ok = std::abs(cov - kWikiCoverage) <= kWikiBand && std::abs(tr.covered - kWikiCoveredAcc) <= kWikiBand &&
            std::abs(te.overall - kWikiTestOverall) <= kWikiBand && mins < kWikiMinutes;
  return check(ok, fmt("train coverage %.1f%%, covered acc %.1f%%, test overall %.1f%%, %.1f min", 100 * cov,
                       100 * tr.covered, 100 * te.overall, mins));
}

struct SweepOutcomes {
  Outcome trend;
  Outcome stability;
};

SweepOutcomes sweep_criteria(const std::filesystem::path& config_path, const std::filesystem::path& out_dir) {
  ExperimentConfig config = load_config(config_path);
  config.sweep_regimes = {Regime::Base, Regime::BT, Regime::BT_QC, Regime::BT_QC_MAML};
  config.save_checkpoints = false;
  auto t0 = std::chrono::steady_clock::now();
  auto rows = run_sweep(config, out_dir);
  double mins = minutes_since(t0);

  std::map<Regime, SweepSummary> mean;
  for (const auto& s : summarize(rows)) mean[s.regime] = s;
  double base = mean[Regime::Base].overall, bt = mean[Regime::BT].overall;
  double qc = mean[Regime::BT_QC].overall, maml = mean[Regime::BT_QC_MAML].overall;
  double unc_gain = mean[Regime::BT_QC_MAML].uncovered - mean[Regime::Base].uncovered;
  bool ok = base < bt && bt <= qc + kOrderSlack && qc <= maml + kOrderSlack && bt - base >= kBtGain &&
            unc_gain >= kUncoveredGain && mins < kSweepMinutes;
  std::string trend = fmt(
      "mean test overall BASE %.1f, BT %.1f, BT_QC %.1f, BT_QC_MAML %.1f; uncovered gain %.1f pt; %.1f min",
      100 * base, 100 * bt, 100 * qc, 100 * maml, 100 * unc_gain, mins);
  std::vector<std::string> unmet;
  if (!(base < bt)) unmet.push_back("BASE < BT");
  if (!(bt <= qc + kOrderSlack)) unmet.push_back("BT <= BT_QC + 0.5");
  if (!(qc <= maml + kOrderSlack)) unmet.push_back("BT_QC <= BT_QC_MAML + 0.5");
  if (!(bt - base >= kBtGain)) unmet.push_back("BT - BASE >= 1");
  if (!(unc_gain >= kUncoveredGain)) unmet.push_back("uncovered gain >= 2");
  if (!(mins < kSweepMinutes)) unmet.push_back("runtime");
  for (std::size_t i = 0; i < unmet.size(); ++i) trend += (i == 0 ? "; unmet: " : ", ") + unmet[i];

  Splits splits = load_splits(config);
  double rule_cov = rule_accuracy(splits.dev, RuleEngine(config.rule)).covered;
  bool stable = true;
  std::string worst;
  for (const auto& r : rows) {
    if (r.regime != Regime::BT_QC_MAML) continue;
    stable = stable && r.dev.covered >= rule_cov;
    worst += fmt(" seed %llu %.4f", static_cast<unsigned long long>(r.seed), r.dev.covered);
  }
  return {check(ok, trend), check(stable, fmt("dev covered: rule %.4f, routed", rule_cov) + worst)};
}

Outcome executor_oracle() {
  std::mt19937_64 rng(2024);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < kOracleCases; ++i) {
    Table t = random_table(rng);
    SQLQuery q = random_query(rng, t);
    agree += executor_agrees(q, t);
  }
  return check(agree == kOracleCases, fmt("%zu/%zu cases agree", agree, kOracleCases));
}

Outcome gradient_check() {
  SyntheticCorpus corpus = small_corpus(4, 80);
  auto batch = rule_pairs(corpus.train, 6);
  ModelConfig cfg;
  cfg.embedding_dim = 3;
  cfg.hidden_dim = 4;
  cfg.init_scale = 0.5;
  cfg.seed = 5;
  Vocab vocab = build_vocab(corpus.train, cfg);
  Parser parser(cfg, vocab);
  Generator gen(cfg, vocab);
  const auto& tables = corpus.train.tables;

  ParameterSet pp = parser.init();
  LossGrad plg = parser.loss(pp, batch, tables);
  FdCheck pf = finite_difference_check([&](const ParameterSet& q) { return parser.loss_value(q, batch, tables); },
                                       pp, plg.grad, informative_coords(plg.grad, 4 * kFdCoords, 11));
  ParameterSet gp = gen.init();
  LossGrad glg = gen.loss(gp, batch, tables);
  FdCheck gf = finite_difference_check([&](const ParameterSet& q) { return gen.loss_value(q, batch, tables); }, gp,
                                       glg.grad, informative_coords(glg.grad, 4 * kFdCoords, 12));
  bool ok = pf.checked >= kFdCoords && gf.checked >= kFdCoords && pf.max_relative_error < kFdTolerance &&
            gf.max_relative_error < kFdTolerance;
  return check(ok, fmt("parser %zu coords max rel %.2e; generator %zu coords max rel %.2e", pf.checked,
                       pf.max_relative_error, gf.checked, gf.max_relative_error));
}

Outcome maml_degeneracies() {
  SyntheticSpec spec;
  spec.train = {6, 150};
  spec.dev = {2, 30};
  spec.test = {2, 30};
  SyntheticCorpus corpus = generate_synthetic_corpus(spec);
  RuleEngine rules;
  mark_coverage(corpus.train, rules);
  ModelConfig model;
  model.embedding_dim = 8;
  model.hidden_dim = 10;
  TrainConfig tc;
  tc.regime = Regime::BT_QC_MAML;
  tc.beta = 0;
  tc.init_epochs = 3;
  tc.n_sampled_lfs = 40;
  Trainer trainer(corpus.train, rules, model, tc);
  TrainerState init = trainer.initialize();
  TrainerState st = init;
  bool frozen = true;
  for (int i = 0; i < 3; ++i) {
    st = trainer.train_iteration(std::move(st));
    frozen = frozen && bit_identical(st.theta, init.theta);
  }

  const std::vector<Example> batch(1);
  ParameterSet theta = scalar_params(1.0);
  double one = inner_update(theta, batch, square_loss(), 0.1, 1)[0](0, 0);
  double two = inner_update(theta, batch, square_loss(), 0.1, 2)[0](0, 0);
  bool toy = std::abs(one - 0.8) < 1e-12 && std::abs(two - 0.64) < 1e-12;
  return check(frozen && toy && trainer.meta_updates() == 6,
               fmt("beta=0 theta %s over 3 iterations (%zu meta updates); inner_update %.15g / %.15g",
                   frozen ? "bit-identical" : "changed", trainer.meta_updates(), one, two));
}

Outcome quality_controller() {
  SyntheticCorpus corpus = small_corpus(25, 1500);
  const auto& tables = corpus.train.tables;
  auto rule = rule_pairs(corpus.train, kQcPool / 2);
  auto noise = noisy_pairs(corpus.train, kQcPool - rule.size(), 9, Provenance::QGen);
  std::vector<Example> pool = rule;
  for (std::size_t i = 0; i < rule.size() / 2; ++i) pool[i].provenance = Provenance::Self;
  pool.insert(pool.end(), noise.begin(), noise.end());
  PhraseTable pt = update_phrase_table({}, pool, tables);

  bool monotone = true, rule_kept = true;
  std::size_t n_rule = std::count_if(pool.begin(), pool.end(), [](auto& e) { return e.provenance == Provenance::Rule; });
  std::multiset<std::size_t> prev;
  for (std::size_t i = 0; i < pool.size(); ++i) prev.insert(i);
  for (int step = 0; step <= 20; ++step) {
    double tau = step / 20.0;
    auto r = filter_pairs(pt, pool, tables, tau);
    std::multiset<std::size_t> kept;
    for (const auto& ex : r.kept) kept.insert(std::find(pool.begin(), pool.end(), ex) - pool.begin());
    monotone = monotone && std::includes(prev.begin(), prev.end(), kept.begin(), kept.end());
    rule_kept = rule_kept && std::count_if(r.kept.begin(), r.kept.end(), [](auto& e) {
                               return e.provenance == Provenance::Rule;
                             }) == static_cast<long>(n_rule);
    prev = kept;
  }

  std::vector<Example> a(pool.begin(), pool.begin() + 200), b(pool.begin() + 200, pool.end());
  std::vector<Example> shuffled = pool;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(3));
  bool commutative = update_phrase_table(update_phrase_table({}, a, tables), b, tables) ==
                         update_phrase_table(update_phrase_table({}, b, tables), a, tables) &&
                     update_phrase_table({}, shuffled, tables) == pt;
  return check(monotone && rule_kept && commutative && pool.size() == kQcPool,
               fmt("%zu pairs (%zu RULE): monotone %s, RULE kept %s, commutative %s", pool.size(), n_rule,
                   monotone ? "yes" : "no", rule_kept ? "yes" : "no", commutative ? "yes" : "no"));
}

Outcome reproducibility(const std::filesystem::path& config_path) {
  ExperimentConfig c = load_config(config_path);
  c.synthetic->train = {10, 300};
  c.synthetic->dev = {4, 80};
  c.synthetic->test = {4, 80};
  c.train.epochs = 3;
  c.train.init_epochs = 4;
  c.train.regime = Regime::BT_QC_MAML;
  c.save_checkpoints = false;
  TempDir a, b;
  run_experiment(c, a.path());
  run_experiment(c, b.path());
  bool same = true;
  for (const char* f : {"metrics.jsonl", "report.json"})
    same = same && !read_file(a / f).empty() && read_file(a / f) == read_file(b / f);
  return check(same, same ? "metrics.jsonl and report.json byte-identical" : "reports differ");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("acceptance criteria");
  std::string config = RULESP_SOURCE_DIR "/configs/acceptance.json";
  std::string out;
  std::vector<int> only;
  app.add_option("--config", config, "sweep config for criteria 2, 3 and 8")->check(CLI::ExistingFile);
  app.add_option("--out", out, "keep sweep outputs here");
  app.add_option("--only", only, "criteria to run")->delimiter(',')->check(CLI::Range(1, 8));
  CLI11_PARSE(app, argc, argv);

  auto wanted = [&](int k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };
  std::optional<TempDir> scratch;
  std::filesystem::path sweep_dir = out;
  if (out.empty()) {
    scratch.emplace();
    sweep_dir = scratch->path();
  }

  std::map<int, Outcome> results;
  auto run = [&](int k, auto&& fn) {
    if (!wanted(k) || results.contains(k)) return;
    try {
      results.emplace(k, fn());
    } catch (const std::exception& e) {
      results.emplace(k, Outcome{Verdict::Fail, std::string("error: ") + e.what()});
    }
    std::cout << "." << std::flush;
  };
  run(1, wikisql_fidelity);
  run(4, executor_oracle);
  run(5, gradient_check);
  run(6, maml_degeneracies);
  run(7, quality_controller);
  run(8, [&] { return reproducibility(config); });
  if (wanted(2) || wanted(3)) {
    try {
      SweepOutcomes s = sweep_criteria(config, sweep_dir);
      if (wanted(2)) results.emplace(2, s.trend);
      if (wanted(3)) results.emplace(3, s.stability);
    } catch (const std::exception& e) {
      for (int k : {2, 3})
        if (wanted(k)) results.emplace(k, Outcome{Verdict::Fail, std::string("error: ") + e.what()});
    }
  }
  std::cout << "\n";

  bool failed = false;
  for (const auto& [k, o] : results) {
    const char* tag = o.verdict == Verdict::Pass ? "PASS" : o.verdict == Verdict::Fail ? "FAIL" : "SKIP";
    failed = failed || o.verdict == Verdict::Fail;
    std::cout << "criterion " << k << ": " << tag << "  " << o.detail << "\n";
  }
  return failed ? 1 : 0;
}
