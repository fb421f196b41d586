#pragma once
#include <deque>
#include <memory>

#include "craftrl/features.hpp"
#include "craftrl/nn.hpp"

namespace craftrl {

struct CompetenceConfig {
  int hidden1 = 128;
  int hidden2 = 128;
  double lr = 1e-4;
  int update_every = 256;  // new samples between updates
  int epochs = 1;          // passes over the buffer per update
  int buffer_cycles = 3;   // sample retention, in collection cycles
  int samples_per_execution = 12;
  int batch_size = 256;
  double init_scale = 0.5;
};

// (state features, skill) -> success-probability logit; sigmoid applied at
// the read side so training can use the numerically stable BCE-on-logit form
struct CompetenceNet {
  nn::Dense l1, l2, out;

  void init(int in_dim, const CompetenceConfig& cfg, Rng& rng);
  double logit(const FeatureVector& x) const;
  nn::Matrix logits(const nn::Matrix& X) const;
  double prob(const FeatureVector& x) const;
  std::vector<nn::ParamRef> params();
  void save(std::ostream& os) const;
  void load(std::istream& is);
};

// immutable published snapshot
struct CompetenceView {
  std::shared_ptr<const CompetenceNet> net;
  const Featurizer* featurizer = nullptr;
  const GoalCatalog* catalog = nullptr;
  int64_t version = -1;

  // elementary skills bypass the network and return exactly 1
  double estimate(const WorldState& s, GoalId skill) const;
  double estimate_features(const FeatureVector& f) const;
};

struct EstimatorSample {
  CompactObs obs;
  GoalId skill = -1;
  int outcome = 0;  // {0,1}
  int64_t cycle = 0;
};

class CompetenceEstimator {
 public:
  CompetenceEstimator(const Featurizer* featurizer, const GoalCatalog* catalog,
                      CompetenceConfig cfg, uint64_t seed);

  double estimate(const WorldState& s, GoalId skill) const;
  CompetenceView view() const;  // latest published snapshot
  int64_t version() const { return version_; }

  // stores one sample per state for the first min(samples_per_execution, n)
  // states of the execution, all sharing the outcome bit
  void record_execution(const std::vector<CompactObs>& states, GoalId skill, bool outcome);

  bool train_if_due();     // BCE pass(es) when >= update_every new samples
  void force_train();      // unconditional update (tests)
  void on_cycle_end();     // advances retention clock, evicts stale samples

  int64_t buffer_size() const { return static_cast<int64_t>(buffer_.size()); }
  int64_t new_samples() const { return new_samples_; }
  const CompetenceConfig& config() const { return cfg_; }

  void save(std::ostream& os) const;
  void load(std::istream& is);

 private:
  void train_pass();
  void publish();

  const Featurizer* featurizer_;
  const GoalCatalog* catalog_;
  CompetenceConfig cfg_;
  CompetenceNet net_;
  nn::Adam adam_;
  Rng rng_;
  std::deque<EstimatorSample> buffer_;
  int64_t new_samples_ = 0;
  int64_t cycle_ = 0;
  int64_t version_ = 0;
  std::shared_ptr<const CompetenceNet> published_;
};

}  // namespace craftrl
