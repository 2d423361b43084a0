#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "rulesp/errors.hpp"
#include "rulesp/harness.hpp"

namespace fs = std::filesystem;
using namespace rulesp;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> regime;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool needs_out) {
  cmd->add_option("--config", c.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "overrides the config seed");
  cmd->add_option("--regime", c.regime, "RULE_ONLY, BASE, SELF_TRAINING, QGEN_ONLY, BT, BT_QC or BT_QC_MAML");
  auto* out = cmd->add_option("--out", c.out, "output directory");
  if (needs_out) out->required();
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig config = load_config(c.config);
  if (c.seed) config.set_seed(*c.seed);
  if (c.regime) config.train.regime = regime_from_string(*c.regime);
  config.train.validate();
  return config;
}

void print_accuracy(const char* split, const AccuracyReport& r) {
  std::printf("%-5s covered %.4f (%zu)  uncovered %.4f (%zu)  overall %.4f\n", split, r.covered, r.n_covered,
              r.uncovered, r.n_uncovered, r.overall);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rule-bootstrapped semantic parsing"};
  app.require_subcommand(1);

  Common gen, train, eval, sweep;
  std::string checkpoint;
  auto* gen_cmd = app.add_subcommand("gen-corpus", "write the synthetic corpus of a config");
  add_common(gen_cmd, gen, true);
  auto* train_cmd = app.add_subcommand("train", "train one regime into a run directory");
  add_common(train_cmd, train, true);
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a saved checkpoint");
  add_common(eval_cmd, eval, false);
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  auto* sweep_cmd = app.add_subcommand("sweep", "run every regime and seed of the config sweep");
  add_common(sweep_cmd, sweep, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen_cmd) {
      ExperimentConfig config = resolve(gen);
      if (!config.synthetic) throw ConfigError("gen-corpus needs a data.synthetic section");
      if (gen.seed) config.synthetic->seed = *gen.seed;
      Splits splits = load_splits(config);
      write_corpus(splits, gen.out);
      std::printf("wrote %zu/%zu/%zu questions to %s\n", splits.train.size(), splits.dev.size(), splits.test.size(),
                  gen.out.c_str());
    } else if (*train_cmd) {
      RegimeResult r = run_experiment(resolve(train), train.out);
      std::printf("regime %s\n", to_string(r.regime));
      print_accuracy("dev", r.dev);
      print_accuracy("test", r.test);
    } else if (*eval_cmd) {
      EvalResult r = evaluate_checkpoint(resolve(eval), checkpoint);
      print_accuracy("dev", r.dev);
      print_accuracy("test", r.test);
    } else if (*sweep_cmd) {
      ExperimentConfig config = resolve(sweep);
      if (sweep.seed) config.sweep_seeds = {*sweep.seed};
      if (sweep.regime) config.sweep_regimes = {config.train.regime};
      auto rows = run_sweep(config, sweep.out);
      for (const auto& s : summarize(rows))
        std::printf("%-12s covered %.4f  uncovered %.4f  overall %.4f\n", to_string(s.regime), s.covered, s.uncovered,
                    s.overall);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
