#include "rulesp/harness.hpp"

#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>

#include "rulesp/checkpoint.hpp"
#include "rulesp/errors.hpp"

namespace rulesp {
namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class T>
void read_positive(const json& obj, const char* key, T& out, const std::string& where) {
  if (obj.contains(key) && obj.at(key).is_number() && obj.at(key).get<double>() < 0)
    throw ConfigError(where + "." + key + " must not be negative");
  read(obj, key, out, where);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

void parse_split(const json& j, SplitSize& s, const std::string& where) {
  check_keys(j, {"tables", "questions"}, where);
  read_positive(j, "tables", s.tables, where);
  read_positive(j, "questions", s.questions, where);
}

SyntheticSpec parse_synthetic(const json& j) {
  const std::string w = "data.synthetic";
  check_keys(j, {"train", "dev", "test", "min_rows", "max_rows", "min_cols", "max_cols", "coverage_knob",
                 "trap_rate", "where_paraphrase_rate", "bare_value_rate", "literal_agg_rate", "seed"},
             w);
  SyntheticSpec s;
  if (j.contains("train")) parse_split(j["train"], s.train, w + ".train");
  if (j.contains("dev")) parse_split(j["dev"], s.dev, w + ".dev");
  if (j.contains("test")) parse_split(j["test"], s.test, w + ".test");
  read_positive(j, "min_rows", s.min_rows, w);
  read_positive(j, "max_rows", s.max_rows, w);
  read_positive(j, "min_cols", s.min_cols, w);
  read_positive(j, "max_cols", s.max_cols, w);
  read(j, "coverage_knob", s.coverage_knob, w);
  read(j, "trap_rate", s.trap_rate, w);
  read(j, "where_paraphrase_rate", s.where_paraphrase_rate, w);
  read(j, "bare_value_rate", s.bare_value_rate, w);
  read(j, "literal_agg_rate", s.literal_agg_rate, w);
  read_positive(j, "seed", s.seed, w);
  s.validate();
  return s;
}

json split_json(const SplitSize& s) { return {{"tables", s.tables}, {"questions", s.questions}}; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << text;
}

json accuracy_json(const AccuracyReport& r) {
  return {{"covered_acc", r.covered},     {"uncovered_acc", r.uncovered},         {"overall_acc", r.overall},
          {"n_covered", r.n_covered},     {"n_uncovered", r.n_uncovered},         {"correct_covered", r.correct_covered},
          {"correct_uncovered", r.correct_uncovered}};
}

Dataset load_split(const std::filesystem::path& questions, const std::filesystem::path& tables) {
  if (!std::filesystem::exists(questions)) throw ConfigError("missing file " + questions.string());
  if (!std::filesystem::exists(tables)) throw ConfigError("missing file " + tables.string());
  LoadOptions opts;
  opts.strict = false;
  return load_dataset(questions, tables, opts);
}

}  // namespace

void ExperimentConfig::set_seed(std::uint64_t seed) {
  model.seed = seed;
  train.seed = seed;
}

ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, {"seed", "regime", "data", "model", "train", "rule", "sweep", "output"}, "config");
  ExperimentConfig c;

  if (!j.contains("data")) throw ConfigError("config needs a 'data' section");
  const json& data = j["data"];
  check_keys(data, {"synthetic", "train_questions", "train_tables", "dev_questions", "dev_tables", "test_questions",
                    "test_tables"},
             "data");
  if (data.contains("synthetic")) {
    c.synthetic = parse_synthetic(data["synthetic"]);
  } else {
    DataFiles f;
    auto path = [&](const char* key) {
      if (!data.contains(key) || !data[key].is_string()) throw ConfigError(std::string("data.") + key + " is required");
      return resolve(base_dir, data[key].get<std::string>());
    };
    f.train_questions = path("train_questions");
    f.train_tables = path("train_tables");
    f.dev_questions = path("dev_questions");
    f.dev_tables = path("dev_tables");
    f.test_questions = path("test_questions");
    f.test_tables = path("test_tables");
    c.files = f;
  }

  if (j.contains("model")) {
    const json& m = j["model"];
    check_keys(m, {"embedding_dim", "hidden_dim", "vocab_cap", "min_count", "init_scale"}, "model");
    read_positive(m, "embedding_dim", c.model.embedding_dim, "model");
    read_positive(m, "hidden_dim", c.model.hidden_dim, "model");
    read_positive(m, "vocab_cap", c.model.vocab_cap, "model");
    read_positive(m, "min_count", c.model.min_count, "model");
    read(m, "init_scale", c.model.init_scale, "model");
  }
  c.model.validate();

  if (j.contains("train")) {
    const json& t = j["train"];
    const std::string w = "train";
    check_keys(t, {"alpha", "beta", "inner_steps", "epochs", "tau", "n_sampled_lfs", "batch_size", "meta_batch_size",
                   "init_epochs", "finalize_epochs", "lr", "clip_norm", "meta_clip_norm", "episodes_per_iteration",
                   "meta_optimizer", "qgen_decode", "qc_smoothing", "select_best_dev", "sampler"},
               w);
    read(t, "alpha", c.train.alpha, w);
    read(t, "beta", c.train.beta, w);
    read_positive(t, "inner_steps", c.train.inner_steps, w);
    read_positive(t, "epochs", c.train.epochs, w);
    read(t, "tau", c.train.tau, w);
    read_positive(t, "n_sampled_lfs", c.train.n_sampled_lfs, w);
    read_positive(t, "batch_size", c.train.batch_size, w);
    read_positive(t, "meta_batch_size", c.train.meta_batch_size, w);
    read_positive(t, "init_epochs", c.train.init_epochs, w);
    read_positive(t, "finalize_epochs", c.train.finalize_epochs, w);
    read(t, "lr", c.train.lr, w);
    read(t, "clip_norm", c.train.clip_norm, w);
    read(t, "meta_clip_norm", c.train.meta_clip_norm, w);
    read_positive(t, "episodes_per_iteration", c.train.episodes_per_iteration, w);
    read(t, "qc_smoothing", c.train.qc_smoothing, w);
    read(t, "select_best_dev", c.train.select_best_dev, w);
    if (t.contains("qgen_decode")) {
      std::string mode;
      read(t, "qgen_decode", mode, w);
      if (mode == "greedy") c.train.qgen_decode = DecodeMode::Greedy;
      else if (mode == "sample") c.train.qgen_decode = DecodeMode::Sample;
      else throw ConfigError("train.qgen_decode must be 'greedy' or 'sample'");
    }
    if (t.contains("meta_optimizer")) {
      std::string name;
      read(t, "meta_optimizer", name, w);
      if (name == "sgd") c.train.meta_optimizer = MetaOptimizer::Sgd;
      else if (name == "adam") c.train.meta_optimizer = MetaOptimizer::Adam;
      else throw ConfigError("train.meta_optimizer must be 'sgd' or 'adam'");
    }
    if (t.contains("sampler")) {
      const json& s = t["sampler"];
      check_keys(s, {"cond_count_weights", "none_weight", "comparison_weight"}, "train.sampler");
      read(s, "cond_count_weights", c.train.sampler.cond_count_weights, "train.sampler");
      read(s, "none_weight", c.train.sampler.none_weight, "train.sampler");
      read(s, "comparison_weight", c.train.sampler.comparison_weight, "train.sampler");
    }
  }
  if (j.contains("regime")) {
    std::string r;
    read(j, "regime", r, "config");
    c.train.regime = regime_from_string(r);
  }
  if (j.contains("seed")) {
    std::uint64_t seed = 0;
    read_positive(j, "seed", seed, "config");
    c.set_seed(seed);
  }
  c.train.validate();

  if (j.contains("rule")) {
    const json& r = j["rule"];
    check_keys(r, {"op_window", "resolve_min_overlap", "keywords"}, "rule");
    read_positive(r, "op_window", c.rule.op_window, "rule");
    read_positive(r, "resolve_min_overlap", c.rule.resolve_min_overlap, "rule");
    if (r.contains("keywords")) {
      std::string p;
      read(r, "keywords", p, "rule");
      c.keywords_file = resolve(base_dir, p);
      c.rule.dictionary = KeywordDictionary::from_file(*c.keywords_file);
    }
  }
  if (j.contains("sweep")) {
    const json& s = j["sweep"];
    check_keys(s, {"regimes", "seeds"}, "sweep");
    if (s.contains("regimes")) {
      std::vector<std::string> names;
      read(s, "regimes", names, "sweep");
      c.sweep_regimes.clear();
      for (const auto& n : names) c.sweep_regimes.push_back(regime_from_string(n));
    }
    read(s, "seeds", c.sweep_seeds, "sweep");
  }
  if (j.contains("output")) {
    check_keys(j["output"], {"checkpoints"}, "output");
    read(j["output"], "checkpoints", c.save_checkpoints, "output");
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path().empty() ? "." : path.parent_path());
}

std::string config_to_json(const ExperimentConfig& c) {
  json data;
  if (c.synthetic) {
    const auto& s = *c.synthetic;
    data["synthetic"] = {{"train", split_json(s.train)},
                         {"dev", split_json(s.dev)},
                         {"test", split_json(s.test)},
                         {"min_rows", s.min_rows},
                         {"max_rows", s.max_rows},
                         {"min_cols", s.min_cols},
                         {"max_cols", s.max_cols},
                         {"coverage_knob", s.coverage_knob},
                         {"trap_rate", s.trap_rate},
                         {"where_paraphrase_rate", s.where_paraphrase_rate},
                         {"bare_value_rate", s.bare_value_rate},
                         {"literal_agg_rate", s.literal_agg_rate},
                         {"seed", s.seed}};
  } else if (c.files) {
    const auto& f = *c.files;
    data = {{"train_questions", f.train_questions.string()}, {"train_tables", f.train_tables.string()},
            {"dev_questions", f.dev_questions.string()},     {"dev_tables", f.dev_tables.string()},
            {"test_questions", f.test_questions.string()},   {"test_tables", f.test_tables.string()}};
  }
  const auto& t = c.train;
  json regimes = json::array();
  for (auto r : c.sweep_regimes) regimes.push_back(to_string(r));
  json rule = {{"op_window", c.rule.op_window}, {"resolve_min_overlap", c.rule.resolve_min_overlap}};
  if (c.keywords_file) rule["keywords"] = c.keywords_file->string();
  json j = {
      {"seed", t.seed},
      {"regime", to_string(t.regime)},
      {"data", data},
      {"model",
       {{"embedding_dim", c.model.embedding_dim},
        {"hidden_dim", c.model.hidden_dim},
        {"vocab_cap", c.model.vocab_cap},
        {"min_count", c.model.min_count},
        {"init_scale", c.model.init_scale}}},
      {"train",
       {{"alpha", t.alpha},
        {"beta", t.beta},
        {"inner_steps", t.inner_steps},
        {"epochs", t.epochs},
        {"tau", t.tau},
        {"n_sampled_lfs", t.n_sampled_lfs},
        {"batch_size", t.batch_size},
        {"meta_batch_size", t.meta_batch_size},
        {"init_epochs", t.init_epochs},
        {"finalize_epochs", t.finalize_epochs},
        {"lr", t.lr},
        {"clip_norm", t.clip_norm},
        {"meta_clip_norm", t.meta_clip_norm},
        {"episodes_per_iteration", t.episodes_per_iteration},
        {"meta_optimizer", t.meta_optimizer == MetaOptimizer::Adam ? "adam" : "sgd"},
        {"qgen_decode", t.qgen_decode == DecodeMode::Greedy ? "greedy" : "sample"},
        {"qc_smoothing", t.qc_smoothing},
        {"select_best_dev", t.select_best_dev},
        {"sampler",
         {{"cond_count_weights", t.sampler.cond_count_weights},
          {"none_weight", t.sampler.none_weight},
          {"comparison_weight", t.sampler.comparison_weight}}}}},
      {"rule", rule},
      {"sweep", {{"regimes", regimes}, {"seeds", c.sweep_seeds}}},
      {"output", {{"checkpoints", c.save_checkpoints}}},
  };
  return j.dump(2) + "\n";
}

Splits load_splits(const ExperimentConfig& config) {
  Splits s;
  if (config.synthetic) {
    auto corpus = generate_synthetic_corpus(*config.synthetic);
    s.train = std::move(corpus.train);
    s.dev = std::move(corpus.dev);
    s.test = std::move(corpus.test);
  } else if (config.files) {
    const auto& f = *config.files;
    s.train = load_split(f.train_questions, f.train_tables);
    s.dev = load_split(f.dev_questions, f.dev_tables);
    s.test = load_split(f.test_questions, f.test_tables);
  } else {
    throw ConfigError("config names no data");
  }
  RuleEngine rules(config.rule);
  mark_coverage(s.train, rules);
  mark_coverage(s.dev, rules);
  mark_coverage(s.test, rules);
  return s;
}

std::string metrics_record(const EpochRecord& rec, std::uint64_t seed) {
  json j = {{"epoch", rec.epoch},
            {"regime", to_string(rec.regime)},
            {"seed", seed},
            {"covered_acc", rec.dev.covered},
            {"uncovered_acc", rec.dev.uncovered},
            {"overall_acc", rec.dev.overall},
            {"pool_sizes", {{"self", rec.pools.self}, {"qgen", rec.pools.qgen}}},
            {"kept_after_qc", {{"self", rec.pools.self_kept}, {"qgen", rec.pools.qgen_kept}}},
            {"meta_updates", rec.meta_updates}};
  return j.dump();
}

namespace {

json report_json(const RegimeResult& r, const ExperimentConfig& config, std::size_t n_train) {
  return {{"regime", to_string(r.regime)},
          {"seed", config.train.seed},
          {"n_train", n_train},
          {"d0_size", r.state.d0.size()},
          {"dev", accuracy_json(r.dev)},
          {"test", accuracy_json(r.test)},
          {"dev_stats",
           {{"rule_covered_acc", r.dev_stats.rule_covered_acc}, {"model_covered_acc", r.dev_stats.model_covered_acc}}}};
}

RegimeResult run_in_dir(Trainer& trainer, const Splits& splits, const ExperimentConfig& config,
                        const std::filesystem::path& out_dir, const TrainerState* initial) {
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "config.json", config_to_json(config));
  std::ofstream metrics(out_dir / "metrics.jsonl", std::ios::binary);
  if (!metrics) throw ConfigError("cannot write metrics under " + out_dir.string());
  const auto fp = model_fingerprint(trainer.parser(), trainer.generator());
  if (config.save_checkpoints) std::filesystem::create_directories(out_dir / "checkpoints");
  auto on_epoch = [&](const EpochRecord& rec, const TrainerState& state) {
    metrics << metrics_record(rec, config.train.seed) << '\n';
    metrics.flush();
    if (config.save_checkpoints && rec.regime != Regime::RuleOnly)
      save_checkpoint(out_dir / "checkpoints" / ("epoch-" + std::to_string(rec.epoch) + ".ckpt"), state, fp);
  };
  RegimeResult res = run_regime(trainer, splits.dev, splits.test, initial, on_epoch);
  if (config.save_checkpoints && res.regime != Regime::RuleOnly)
    save_checkpoint(out_dir / "checkpoints" / "final.ckpt", res.state, fp);
  json report = report_json(res, config, splits.train.size());
  report["warnings"] = trainer.warnings();
  write_text(out_dir / "report.json", report.dump(2) + "\n");
  return res;
}

}  // namespace

RegimeResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  Splits splits = load_splits(config);
  Trainer trainer(splits.train, RuleEngine(config.rule), config.model, config.train);
  return run_in_dir(trainer, splits, config, out_dir, nullptr);
}

RegimeResult run_experiment(const std::filesystem::path& config_path, const std::filesystem::path& out_dir) {
  return run_experiment(load_config(config_path), out_dir);
}

EvalResult evaluate_checkpoint(const ExperimentConfig& config, const std::filesystem::path& checkpoint) {
  Splits splits = load_splits(config);
  Trainer trainer(splits.train, RuleEngine(config.rule), config.model, config.train);
  TrainerState state = load_checkpoint(checkpoint, model_fingerprint(trainer.parser(), trainer.generator()));
  EvalResult r;
  r.dev_stats = compute_dev_stats(state, trainer.parser(), trainer.rules(), splits.dev);
  const Regime regime = config.train.regime;
  r.dev = evaluate_state(regime, state, r.dev_stats, trainer.parser(), trainer.rules(), splits.dev);
  r.test = evaluate_state(regime, state, r.dev_stats, trainer.parser(), trainer.rules(), splits.test);
  return r;
}

void write_corpus(const Splits& splits, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::pair<const char*, const Dataset*> parts[] = {
      {"train", &splits.train}, {"dev", &splits.dev}, {"test", &splits.test}};
  for (const auto& [name, data] : parts) {
    write_questions(out_dir / (std::string(name) + ".jsonl"), *data);
    write_tables(out_dir / (std::string(name) + ".tables.jsonl"), data->tables);
  }
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  Splits splits = load_splits(config);
  std::vector<SweepRow> rows;
  std::ofstream out(out_dir / "sweep.jsonl", std::ios::binary);
  for (auto seed : config.sweep_seeds) {
    ExperimentConfig c = config;
    c.set_seed(seed);
    Trainer trainer(splits.train, RuleEngine(c.rule), c.model, c.train);
    std::optional<TrainerState> init;
    for (auto regime : config.sweep_regimes) {
      c.train.regime = regime;
      trainer.set_config(c.train);
      if (regime != Regime::RuleOnly && !init) init = trainer.initialize();
      auto dir = out_dir / (std::string(to_string(regime)) + "-seed" + std::to_string(seed));
      RegimeResult r = run_in_dir(trainer, splits, c, dir, init ? &*init : nullptr);
      rows.push_back({regime, seed, r.dev, r.test});
      json rec = {{"regime", to_string(regime)}, {"seed", seed}, {"dev", accuracy_json(r.dev)},
                  {"test", accuracy_json(r.test)}};
      out << rec.dump() << '\n';
      out.flush();
    }
  }
  std::ostringstream table;
  table << std::left << std::setw(14) << "regime" << std::right << std::setw(10) << "covered" << std::setw(12)
        << "uncovered" << std::setw(10) << "overall" << '\n';
  table << std::fixed << std::setprecision(1);
  for (const auto& s : summarize(rows))
    table << std::left << std::setw(14) << to_string(s.regime) << std::right << std::setw(9) << 100 * s.covered << "%"
          << std::setw(11) << 100 * s.uncovered << "%" << std::setw(9) << 100 * s.overall << "%\n";
  write_text(out_dir / "summary.txt", table.str());
  return rows;
}

std::vector<SweepSummary> summarize(const std::vector<SweepRow>& rows) {
  std::vector<SweepSummary> out;
  std::map<Regime, std::size_t> counts;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const SweepSummary& s) { return s.regime == r.regime; });
    if (it == out.end()) {
      out.push_back({r.regime});
      it = out.end() - 1;
    }
    it->covered += r.test.covered;
    it->uncovered += r.test.uncovered;
    it->overall += r.test.overall;
    ++counts[r.regime];
  }
  for (auto& s : out) {
    double n = static_cast<double>(counts[s.regime]);
    s.covered /= n;
    s.uncovered /= n;
    s.overall /= n;
  }
  return out;
}

}  // namespace rulesp
