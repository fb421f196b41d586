#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "craftrl/evaluation.hpp"
#include "craftrl/orchestrator.hpp"

using namespace craftrl;

namespace {

RunConfig load_config(const std::string& path, bool desk_scale, uint64_t* seed_override,
                      std::string* out_override) {
  RunConfig cfg = path.empty() ? RunConfig{} : RunConfig::load_file(path);
  if (desk_scale) cfg.apply_desk_scale();
  if (seed_override) cfg.master_seed = *seed_override;
  if (out_override && !out_override->empty()) cfg.out_dir = *out_override;
  if (const char* env_out = std::getenv("CRAFTRL_OUT"); env_out && *env_out)
    cfg.out_dir = env_out;
  cfg.validate();
  return cfg;
}

int cmd_train(const std::string& config_path, bool desk_scale, bool flat,
              std::optional<uint64_t> seed, const std::string& out,
              const std::string& resume) {
  RunConfig cfg = load_config(config_path, desk_scale,
                              seed ? &*seed : nullptr, const_cast<std::string*>(&out));
  if (flat) {
    cfg.train.flat_baseline = true;
    cfg.skillspace.flat_baseline = true;
  }
  Trainer trainer(cfg);
  if (!resume.empty()) trainer.load_checkpoint(resume);
  trainer.run();
  std::cout << "train: done after " << trainer.env_steps() << " env steps, "
            << trainer.hl_steps() << " high-level steps, " << trainer.cycle_index()
            << " cycles\n";
  if (auto m = trainer.mastery_hl_steps())
    std::cout << "train: mastery of '" << cfg.train.stop_on_mastery_goal << "' at " << *m
              << " high-level steps\n";
  std::cout << "train: metrics at " << cfg.out_dir << "/metrics.jsonl\n";
  return 0;
}

int cmd_eval(const std::string& config_path, bool desk_scale, const std::string& checkpoint,
             std::optional<uint64_t> seed, const std::string& out) {
  RunConfig cfg = load_config(config_path, desk_scale, seed ? &*seed : nullptr,
                              const_cast<std::string*>(&out));
  Trainer trainer(cfg);
  if (!checkpoint.empty()) trainer.load_checkpoint(checkpoint);
  EvalReport rep = trainer.evaluate();
  std::cout << rep.to_json(trainer.catalog()).dump(2) << "\n";
  return 0;
}

int cmd_generalize(const std::string& config_path, bool desk_scale,
                   const std::string& checkpoint, const std::string& suite, int n, int runs,
                   std::optional<uint64_t> seed, const std::string& out) {
  RunConfig cfg = load_config(config_path, desk_scale, seed ? &*seed : nullptr,
                              const_cast<std::string*>(&out));
  Trainer trainer(cfg);
  if (!checkpoint.empty()) trainer.load_checkpoint(checkpoint);
  Trainer::SuiteResult res;
  if (suite == "synonym") {
    res = trainer.synonym_suite(runs);
  } else if (suite == "compositional") {
    res = trainer.compositional_suite(n, runs);
  } else {
    std::cerr << "generalize: unknown suite '" << suite << "'\n";
    return 2;
  }
  nlohmann::ordered_json j;
  j["suite"] = suite;
  if (suite == "compositional") j["n"] = n;
  j["score"] = res.score;
  nlohmann::ordered_json items = nlohmann::ordered_json::array();
  size_t li = 0;
  for (const auto& group : res.group_sr_percent)
    for (double sr : group) items.push_back({{"goal", res.labels[li++]}, {"sr_percent", sr}});
  j["results"] = items;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_export_plots(const std::string& metrics_path, const std::string& out_dir) {
  export_plot_tables(metrics_path, out_dir);
  std::cout << "export-plots: wrote tables to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"craftrl: hierarchical autotelic agent on a crafting gridworld"};
  app.require_subcommand(1);

  std::string config_path, out, resume, checkpoint, suite = "synonym", metrics_path;
  std::optional<uint64_t> seed;
  bool desk_scale = false, flat = false;
  int comp_n = 2, runs = 8;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run configuration JSON");
    sub->add_option("--seed", seed, "master seed override");
    sub->add_option("--out", out, "output directory override");
    sub->add_flag("--desk-scale", desk_scale, "apply the desk-scale preset");
  };

  CLI::App* train = app.add_subcommand("train", "train the agent");
  add_common(train);
  train->add_flag("--flat-baseline", flat, "restrict the skill space to elementary actions");
  train->add_option("--resume", resume, "checkpoint to resume from");

  CLI::App* eval = app.add_subcommand("eval", "evaluate on held-out worlds");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint, "checkpoint to evaluate");

  CLI::App* gen = app.add_subcommand("generalize", "generalization suites");
  add_common(gen);
  gen->add_option("--checkpoint", checkpoint, "checkpoint to evaluate");
  gen->add_option("--suite", suite, "synonym | compositional");
  gen->add_option("--n", comp_n, "repetition count for the compositional suite")
      ->check(CLI::Range(2, 4));
  gen->add_option("--runs", runs, "evaluation runs per goal variant");

  CLI::App* exp = app.add_subcommand("export-plots", "flatten metrics into plot tables");
  exp->add_option("--metrics", metrics_path, "metrics.jsonl path")->required();
  exp->add_option("--out", out, "output directory for tables");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(config_path, desk_scale, flat, seed, out, resume);
    if (eval->parsed()) return cmd_eval(config_path, desk_scale, checkpoint, seed, out);
    if (gen->parsed())
      return cmd_generalize(config_path, desk_scale, checkpoint, suite, comp_n, runs, seed, out);
    if (exp->parsed()) return cmd_export_plots(metrics_path, out.empty() ? "plots" : out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
