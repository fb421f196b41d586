#pragma once
#include <memory>
#include <optional>

#include "craftrl/competence.hpp"
#include "craftrl/config.hpp"
#include "craftrl/evaluation.hpp"
#include "craftrl/features.hpp"
#include "craftrl/goals.hpp"
#include "craftrl/highlevel.hpp"
#include "craftrl/lowlevel.hpp"
#include "craftrl/metrics.hpp"
#include "craftrl/sampler.hpp"
#include "craftrl/skillspace.hpp"

namespace craftrl {

struct EnvSlot {
  int index = 0;
  WorldState state;
  std::unique_ptr<VerifierBank> verifiers;
  int64_t episode_hl_steps = 0;
  uint64_t reset_counter = 0;
  Rng rng;
  std::string last_action_text;
  bool needs_reset = true;
};

struct AttemptParams {
  int n_hl = 64;
  int n_ll = 128;
  bool greedy_hl = false;
  bool greedy_ll = false;
  bool learn = true;
};

// everything one goal attempt produced; consumed on the coordinator thread
struct AttemptResult {
  GoalId goal = -1;
  bool success = false;
  int hl_steps = 0;
  int64_t env_steps = 0;
  int max_segment_steps = 0;
  HLTrajectory hl_traj;
  std::vector<LLSegment> segments;
  std::vector<float> goal_rewards;
  std::vector<CompactObs> hl_states;         // per high-level step, for the sampler
  std::vector<std::string> skills_called;    // skill/action texts in call order
  std::vector<uint8_t> actions;              // full elementary-action sequence
  WorldState initial_state;                  // state at attempt start (replay checks)
  double sampler_eps = 0.0;                  // schedule value when the goal was drawn
  std::vector<double> sampler_lp;            // per candidate goal
  std::vector<nlohmann::ordered_json> draw_logs;
};

class Trainer {
 public:
  explicit Trainer(const RunConfig& cfg);

  void run();

  AttemptResult run_goal_attempt(EnvSlot& env, GoalId goal, const std::vector<int>& goal_tokens,
                                 const AttemptParams& params);

  EvalReport evaluate();
  // one held-out evaluation attempt; `text_override` substitutes the goal text
  // used to condition the high-level policy (synonym protocol)
  AttemptResult eval_attempt(int world_index, GoalId goal, const std::string& text_override);

  // generalization protocols
  struct SuiteResult {
    std::vector<std::string> labels;
    std::vector<std::vector<double>> group_sr_percent;  // per goal group
    double score = 0.0;
  };
  SuiteResult synonym_suite(int runs_per_reformulation);
  SuiteResult compositional_suite(int n, int runs_per_goal);

  GoalId register_eval_goal(const Goal& g);
  void reset_env(EnvSlot& env);

  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path, bool force = false);

  const RunConfig& config() const { return cfg_; }
  const GoalCatalog& catalog() const { return catalog_; }
  const Vocabulary& vocab() const { return vocab_; }
  const Featurizer& featurizer() const { return featurizer_; }
  CompetenceEstimator& competence() { return *competence_; }
  LowLevelBank& bank() { return *bank_; }
  HighLevelPolicy& hl() { return *hl_; }
  GoalSampler& sampler() { return *sampler_; }
  UpdateFrequencyTracker& tracker() { return tracker_; }
  const std::vector<GoalId>& training_goals() const { return train_goals_; }
  int64_t env_steps() const { return env_steps_; }
  int64_t hl_steps() const { return hl_steps_; }
  int64_t cycle_index() const { return cycle_; }
  std::optional<int64_t> mastery_hl_steps() const { return mastery_hl_steps_; }
  std::optional<int64_t> mastery_env_steps() const { return mastery_env_steps_; }
  EnvSlot& env_slot(int i) { return *envs_[static_cast<size_t>(i)]; }
  std::vector<int> goal_tokens(GoalId id) const;

 private:
  friend struct CheckpointCodec;
  void collect_round();
  void apply_attempt(AttemptResult& r);
  void run_due_updates();
  void end_cycle();
  void open_metrics(bool append);
  std::vector<GoalId> skill_candidates(GoalId goal) const;
  AttemptParams train_params() const;
  AttemptParams eval_params() const;

  RunConfig cfg_;
  GoalCatalog catalog_;
  Lexicon lexicon_;
  Vocabulary vocab_;
  Featurizer featurizer_;
  std::unique_ptr<CompetenceEstimator> competence_;
  std::unique_ptr<LowLevelBank> bank_;
  std::unique_ptr<HighLevelPolicy> hl_;
  std::unique_ptr<GoalSampler> sampler_;
  UpdateFrequencyTracker tracker_;
  std::vector<std::unique_ptr<EnvSlot>> envs_;
  std::vector<GoalId> train_goals_;  // sampler candidates and eval set
  std::vector<std::vector<int>> token_cache_;
  MetricsWriter metrics_;

  // counters
  int64_t env_steps_ = 0;
  int64_t hl_steps_ = 0;
  int64_t cycle_ = 0;
  int64_t eval_counter_ = 0;
  std::vector<HLTrajectory> cycle_batch_;
  int64_t cycle_hl_transitions_ = 0;
  // per-cycle budget maxima (for the budget-enforcement checks)
  int max_segment_steps_cycle_ = 0;
  int max_attempt_skills_cycle_ = 0;
  int64_t max_episode_hl_cycle_ = 0;
  std::optional<int64_t> mastery_hl_steps_;
  std::optional<int64_t> mastery_env_steps_;
  int post_mastery_evals_done_ = 0;
  bool resumed_ = false;
};

}  // namespace craftrl
