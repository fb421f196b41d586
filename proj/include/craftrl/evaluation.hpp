#pragma once
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "craftrl/goals.hpp"
#include "craftrl/metrics.hpp"

namespace craftrl {

// geometric-mean aggregation over success rates given in percent [0,100]
double crafter_score(const std::vector<double>& sr_percent);

// groups[g] = success rates (percent) of the reformulations of goal g
double synonym_score(const std::vector<std::vector<double>>& groups);

// first step at which sr > threshold, over (step, sr) eval points
std::optional<int64_t> steps_to_mastery(const std::vector<std::pair<int64_t, double>>& series,
                                        double threshold = 0.8);

// per-trajectory skill/action call lists -> mean calls per trajectory.
// "move *" entries merge into "move"; names outside `tracked` aggregate into
// "untracked_ea" (elementary) or "untracked_sg" (skills).
struct SkillCallHistogram {
  std::map<std::string, double> mean_calls;
  int64_t trajectories = 0;
  double total_calls = 0.0;
};
SkillCallHistogram skill_call_histogram(const std::vector<std::vector<std::string>>& per_traj,
                                        const GoalCatalog& catalog,
                                        const std::vector<std::string>& tracked);

struct EvalReport {
  int64_t step = 0;       // training high-level steps at evaluation time
  int64_t env_steps = 0;  // training environment steps at evaluation time
  int64_t cycle = 0;
  std::vector<GoalId> goals;
  std::vector<double> success_rate;           // per goal, in [0,1]
  std::vector<double> mean_hl_calls_success;  // per goal, successful trajectories only
  double crafter = 0.0;

  nlohmann::ordered_json to_json(const GoalCatalog& catalog) const;
};

// flattens a metrics stream into TSV tables (learning curves, crafter score,
// difficulty vs steps-to-mastery, skill-call means); empty streams produce
// header-only tables
void export_plot_tables(const std::string& metrics_path, const std::string& out_dir);

}  // namespace craftrl
