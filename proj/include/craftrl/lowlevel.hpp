#pragma once
#include <deque>
#include <map>
#include <memory>

#include "craftrl/features.hpp"
#include "craftrl/nn.hpp"

namespace craftrl {

struct LLConfig {
  std::vector<int> conv_channels{16, 32, 32};  // stem + two residual blocks
  std::vector<int> fc{256, 64};
  std::string activation = "tanh";
  double init_scale = 1.0;
  double lr = 1e-4;
  double gamma = 0.95;
  double beta_awr = 1.0;
  double weight_clip = 20.0;
  double value_coef = 0.5;
  int64_t buffer_capacity = 100000;
  int update_every = 2496;  // new transitions between updates, per skill
  int batches_per_update = 25;
  int batch_size = 256;
};

// shared conv encoder, categorical action head, sigmoid-bounded critic head
struct LLNet {
  nn::Conv3x3 stem;
  nn::ResBlock blk1, blk2;
  nn::Dense fc1, fc2;
  nn::Dense pi;    // action logits
  nn::Dense vout;  // value logit (sigmoid applied at read side)

  void init(int channels, int view, const LLConfig& cfg, Rng& rng);
  void heads(const nn::Matrix& X, nn::Matrix* logits, nn::Matrix* value_logit) const;
  Eigen::VectorXd action_probs(const FeatureVector& obs) const;
  double value(const FeatureVector& obs) const;
  std::vector<nn::ParamRef> params();
  int64_t param_count();
  void save(std::ostream& os) const;
  void load(std::istream& is);

  struct Cache {
    nn::Matrix x, s, f1, f2, logits, vlogit;
    nn::ResBlock::Cache c1, c2;
  };
  void forward(const nn::Matrix& X, Cache& c) const;
  // dLogits/dVlogit are gradients at the two heads; accumulates all grads
  void backward(const nn::Matrix& dLogits, const nn::Matrix& dVlogit, const Cache& c);
};

struct LLTransition {
  CompactObs obs;
  uint8_t action = 0;
  float reward = 0.f;
  bool done = false;
};

struct LLTrajectory {
  std::vector<LLTransition> steps;
  CompactObs final_obs;  // state after the last transition (timeout bootstrap)
  bool success = false;
  bool timeout = false;  // ended without the conditioning goal firing
};

// per-skill FIFO ring, counted in transitions, evicting whole trajectories
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int64_t capacity) : capacity_(capacity) {}

  void add(LLTrajectory t);
  int64_t size() const { return size_; }
  int64_t new_since_update() const { return new_count_; }
  void mark_updated() { new_count_ = 0; }
  const std::deque<LLTrajectory>& trajectories() const { return traj_; }

  void save(std::ostream& os) const;
  void load(std::istream& is);

 private:
  int64_t capacity_;
  int64_t size_ = 0;
  int64_t new_count_ = 0;
  std::deque<LLTrajectory> traj_;
};

struct AwrStats {
  int64_t transitions_seen = 0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double mean_weight = 0.0;
  double min_weight = 0.0;
  double max_weight = 0.0;
};

class LowLevelBank {
 public:
  LowLevelBank(const Featurizer* featurizer, const GoalCatalog* catalog, LLConfig cfg,
               uint64_t seed);

  // elementary skills pass straight through; throws std::out_of_range for a
  // non-elementary skill with no instantiated policy
  Action act(const FeatureVector& obs, GoalId skill, bool greedy, Rng& rng) const;
  bool has_policy(GoalId skill) const { return nets_.count(skill) > 0; }
  void ensure_policy(GoalId skill);  // lazily instantiate (deterministic per skill)
  const LLNet& net(GoalId skill) const { return *nets_.at(skill); }

  void store(GoalId skill, LLTrajectory t);
  ReplayBuffer& buffer(GoalId skill);
  const LLConfig& config() const { return cfg_; }
  std::vector<GoalId> due_skills() const;

  AwrStats awr_update(GoalId skill);  // no-op unless due
  AwrStats force_awr_update(GoalId skill);

  std::vector<GoalId> instantiated() const;
  void save(std::ostream& os, bool include_buffers) const;
  void load(std::istream& is);

 private:
  const Featurizer* featurizer_;
  const GoalCatalog* catalog_;
  LLConfig cfg_;
  uint64_t seed_;
  std::map<GoalId, std::unique_ptr<LLNet>> nets_;
  std::map<GoalId, nn::Adam> adams_;
  std::map<GoalId, ReplayBuffer> buffers_;
  std::map<GoalId, Rng> train_rngs_;
};

// One time-ordered low-level segment of a goal attempt, as recorded by the
// orchestrator. `skill_rewards` are the segment skill's own rewards.
struct LLSegment {
  GoalId skill = -1;
  bool elementary = false;
  std::vector<CompactObs> obs;       // per step
  std::vector<uint8_t> actions;      // per step
  std::vector<float> skill_rewards;  // per step, conditioned on `skill`
  CompactObs final_obs;
  bool skill_success = false;
};

// Dual-trajectory storage: each non-elementary segment goes to its skill's
// buffer; the concatenation of all segments goes to the goal's buffer with
// the goal-conditioned rewards (skill compilation).
void relabel_and_store(LowLevelBank& bank, const std::vector<LLSegment>& segments, GoalId hl_goal,
                       const std::vector<float>& hl_goal_rewards, bool goal_success,
                       bool store_failed_compiled);

}  // namespace craftrl
