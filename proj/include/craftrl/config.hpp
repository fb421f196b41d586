#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "craftrl/competence.hpp"
#include "craftrl/highlevel.hpp"
#include "craftrl/lowlevel.hpp"
#include "craftrl/sampler.hpp"
#include "craftrl/skillspace.hpp"
#include "craftrl/world.hpp"

namespace craftrl {

struct EnvConfig {
  int side = 32;
  int view = 9;
  WorldGenParams gen;
};

struct BudgetConfig {
  int n_hl = 64;   // skills per goal attempt
  int n_ll = 128;  // env steps per skill execution
  int episode_cap = 155;
  int envs_parallel = 48;  // desk preset lowers this to 8
  int64_t cycle_size = 2496;
};

struct EvalConfig {
  int every_cycles = 1;
  int seeds = 40;
  bool greedy = true;
  int n_hl = 0;  // 0 = inherit the training budgets
  int n_ll = 0;
};

struct TrainConfig {
  int64_t max_env_steps = 200000;
  int64_t max_cycles = 0;  // 0 = unbounded
  bool flat_baseline = false;
  bool store_failed_compiled = true;
  int checkpoint_every_cycles = 0;  // 0 = only final
  bool checkpoint_full_state = true;
  std::string stop_on_mastery_goal;  // empty = run to budget
  double mastery_threshold = 0.8;
  int post_mastery_evals = 3;
  bool log_skillspace_draws = true;
};

struct RunConfig {
  uint64_t master_seed = 0;
  std::string out_dir = "runs/default";
  EnvConfig env;
  BudgetConfig budgets;
  std::vector<std::string> goal_subset;  // empty = all 11 achievements
  HLConfig hl;
  LLConfig ll;
  CompetenceConfig competence;
  SkillSpaceConfig skillspace;
  int tracker_window = 5;
  SamplerConfig sampler;
  EvalConfig eval;
  TrainConfig train;

  // strict parse: unknown keys and out-of-range values are errors
  static RunConfig from_json_text(const std::string& text);
  static RunConfig load_file(const std::string& path);
  std::string to_json_text() const;  // canonical form, round-trip stable
  uint64_t hash() const;
  void validate() const;  // throws std::invalid_argument with field diagnostics

  // desk-scale preset: small widths, few parallel envs, small world
  void apply_desk_scale();
};

}  // namespace craftrl
