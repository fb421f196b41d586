#pragma once
#include <memory>

#include "craftrl/features.hpp"
#include "craftrl/nn.hpp"

namespace craftrl {

struct HLConfig {
  int context_width = 256;
  int token_emb = 32;
  int head_hidden = 128;
  int value_width = 256;
  int max_skill_tokens = 6;
  double init_scale = 1.0;
  double lr = 1e-5;
  double gamma = 0.95;
  double lambda = 0.9;
  double clip = 0.2;
  double entropy_coef = 0.01;
  double beta_kl = 0.1;
  double value_coef = 0.5;
  int epochs = 4;
  int minibatches = 8;
  bool adv_norm = true;
  int min_batch = 2496;  // transitions required before an update runs
};

// prefix tree over the tokenized admissible skill names
class SkillTrie {
 public:
  SkillTrie() { nodes_.push_back({}); }
  void insert(GoalId skill, const std::vector<int>& tokens);  // tokens end with EOS

  int root() const { return 0; }
  // admissible next tokens at a node, ascending token id
  std::vector<int> next_tokens(int node) const;
  int child(int node, int token) const;  // -1 if absent
  bool is_terminal(int node) const { return nodes_[static_cast<size_t>(node)].skill >= 0; }
  GoalId skill_at(int node) const { return nodes_[static_cast<size_t>(node)].skill; }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::vector<std::pair<int, int>> children;  // (token, node), sorted by token
    GoalId skill = -1;                          // set on the EOS leaf
  };
  std::vector<Node> nodes_;
};

struct DecodeResult {
  GoalId skill = -1;
  std::vector<int> tokens;                 // includes EOS
  std::vector<double> logprobs;            // per token, under the masked policy
  std::vector<std::vector<int>> masks;     // admissible token ids per position
  double total_logprob = 0.0;
};

struct HLStep {
  FeatureVector features;
  std::vector<int> tokens;
  std::vector<double> behavior_logprobs;
  std::vector<std::vector<int>> masks;
  double reward = 0.0;
  double value_est = 0.0;
};

struct HLTrajectory {
  std::vector<HLStep> steps;
  double final_value = 0.0;  // bootstrap for truncated attempts
  bool terminal = false;     // the goal fired
};

struct PpoStats {
  int64_t transitions = 0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double kl_ref = 0.0;  // KL(current policy, reference) on the batch
  double mean_skill_len = 0.0;
  bool updated = false;
};

struct HLNet {
  nn::Dense enc1, enc2;   // caption features -> context
  nn::Matrix emb, gemb;   // token embeddings: emb_dim x vocab
  nn::Dense head1, head_out;
  nn::Dense v1, v2, vout;  // value head, sigmoid-bounded at read side
  int vocab = 0, max_len = 6;

  void init(int feat_dim, int vocab_size, const HLConfig& cfg, Rng& rng);
  FeatureVector context(const FeatureVector& features) const;
  // token logits given context and emitted prefix
  FeatureVector token_logits(const FeatureVector& ctx, const std::vector<int>& prefix) const;
  double value(const FeatureVector& features) const;
  std::vector<nn::ParamRef> params();
  void save(std::ostream& os) const;
  void load(std::istream& is);
};

// masked log-softmax over `mask` ids; returns log-probabilities aligned with mask
std::vector<double> masked_log_softmax(const FeatureVector& logits, const std::vector<int>& mask);

// generalized advantage estimation over the high-level steps of one attempt
std::vector<double> gae_advantages(const HLTrajectory& traj, double gamma, double lambda);

class HighLevelPolicy {
 public:
  HighLevelPolicy(int feat_dim, const Vocabulary* vocab, HLConfig cfg, uint64_t seed);

  // admissible = (skill, tokenized text with EOS); greedy -> argmax decoding
  DecodeResult decode(const FeatureVector& features,
                      const std::vector<std::pair<GoalId, std::vector<int>>>& admissible,
                      Rng& rng, bool greedy) const;
  double value(const FeatureVector& features) const { return net_.value(features); }

  PpoStats ppo_update(const std::vector<HLTrajectory>& trajs);

  struct MinibatchItem {
    const HLStep* step;
    double advantage;
    double ret;
  };
  // accumulates gradients of the clipped-surrogate + entropy + KL + value loss
  // into the live network; returns the summed loss (exposed for gradient checks)
  double minibatch_backward(const std::vector<MinibatchItem>& items, double inv_n,
                            double* policy_sum = nullptr, double* value_sum = nullptr,
                            double* entropy_sum = nullptr, double* kl_sum = nullptr,
                            int64_t* token_count = nullptr);
  // same loss, forward only (finite-difference checks)
  double minibatch_loss(const std::vector<MinibatchItem>& items, double inv_n);

  const HLNet& net() const { return net_; }
  HLNet& mutable_net() { return net_; }
  const HLNet& reference() const { return ref_; }
  const HLConfig& config() const { return cfg_; }

  void save(std::ostream& os) const;
  void load(std::istream& is);

 private:
  const Vocabulary* vocab_;
  HLConfig cfg_;
  HLNet net_, ref_;
  nn::Adam adam_;
  Rng train_rng_;
};

}  // namespace craftrl
