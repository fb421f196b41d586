#pragma once
#include <deque>
#include <map>

#include "craftrl/competence.hpp"

namespace craftrl {

struct InclusionDraw {
  GoalId goal;
  double p;       // inclusion probability used
  bool included;
};

struct AdmissibleSet {
  std::vector<GoalId> skills;        // always contains all elementary skills
  std::vector<InclusionDraw> draws;  // per-candidate record, for the metrics stream
  bool contains(GoalId id) const;
};

// per-skill count of low-level updates over the last `window` collection cycles
class UpdateFrequencyTracker {
 public:
  explicit UpdateFrequencyTracker(int window = 5) : window_(window) { buckets_.emplace_back(); }

  void record_update(GoalId skill);
  void on_cycle_end();
  int count_in_window(GoalId skill) const;
  int window() const { return window_; }

  void save(std::ostream& os) const;
  void load(std::istream& is);

 private:
  int window_;
  std::deque<std::map<GoalId, int>> buckets_;  // front = current cycle
};

struct SkillSpaceConfig {
  double eps_cap = 0.1;
  bool flat_baseline = false;  // restrict the skill space to elementary actions
};

// p_g = max(estimate, min(update_count, eps_cap))
double inclusion_probability(double estimate, int updates_in_window, double eps_cap);

// p_g = max(estimate(state, g), min(update_count_g, eps_cap)) for each
// candidate goal; elementary skills are always included. An empty candidate
// list means every non-elementary catalog goal.
AdmissibleSet build_admissible(const WorldState& s, const GoalCatalog& catalog,
                               const std::vector<GoalId>& candidates,
                               const CompetenceView& estimator,
                               const UpdateFrequencyTracker& tracker,
                               const SkillSpaceConfig& cfg, Rng& rng);

}  // namespace craftrl
