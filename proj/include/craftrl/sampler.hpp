#pragma once
#include <deque>

#include "craftrl/competence.hpp"

namespace craftrl {

struct SamplerConfig {
  int entries_per_trajectory = 6;  // first floor(N_HL * 0.1) high-level states
  int update_every = 128;          // entries between snapshot pulls / evictions
  int ring_size = 3;
  int buffer_cycles = 3;
  double eps0 = 1.0;
  double eps_decay_rate = 3.34;
  int64_t eps_horizon_entries = 100000;
};

struct GoalSampleEntry {
  CompactObs obs;
  GoalId goal = -1;
  int outcome = 0;
  int64_t cycle = 0;
};

// Contextual learning-progress goal sampler: LP is the absolute change in
// estimated competence between the oldest and newest snapshot of the ring;
// selection is epsilon-greedy with exponentially decaying epsilon.
class GoalSampler {
 public:
  GoalSampler(const GoalCatalog* catalog, const Featurizer* featurizer,
              std::vector<GoalId> candidate_goals, SamplerConfig cfg,
              const CompetenceEstimator* competence);

  double epsilon() const;
  // |C_newest - C_oldest|; 0 with a single snapshot; throws on an empty ring
  double learning_progress(const WorldState& s, GoalId g) const;
  std::vector<double> learning_progress_all(const WorldState& s) const;

  GoalId sample_goal(const WorldState& s, Rng& rng) const;

  // stores up to entries_per_trajectory entries; expects the attempt's
  // high-level states in time order
  void record_outcome(const std::vector<CompactObs>& hl_states, GoalId goal, bool outcome);
  void update_if_due();  // snapshot pull + stale-entry eviction
  void on_cycle_end() { ++cycle_; }

  int64_t entries_consumed() const { return entries_; }
  size_t ring_size() const { return ring_.size(); }
  size_t store_size() const { return store_.size(); }
  const std::vector<GoalId>& candidates() const { return candidates_; }

  void save(std::ostream& os) const;
  void load(std::istream& is);

 private:
  void pull_snapshot();

  const GoalCatalog* catalog_;
  const Featurizer* featurizer_;
  std::vector<GoalId> candidates_;
  SamplerConfig cfg_;
  const CompetenceEstimator* competence_;
  std::deque<CompetenceView> ring_;
  std::deque<GoalSampleEntry> store_;
  int64_t entries_ = 0;      // total recorded, drives the epsilon schedule
  int64_t since_update_ = 0;
  int64_t cycle_ = 0;
};

}  // namespace craftrl
