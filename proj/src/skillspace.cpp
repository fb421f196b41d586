#include "craftrl/skillspace.hpp"

#include <algorithm>

#include "craftrl/serialize.hpp"

namespace craftrl {

bool AdmissibleSet::contains(GoalId id) const {
  return std::find(skills.begin(), skills.end(), id) != skills.end();
}

void UpdateFrequencyTracker::record_update(GoalId skill) { ++buckets_.front()[skill]; }

void UpdateFrequencyTracker::on_cycle_end() {
  buckets_.emplace_front();
  while (static_cast<int>(buckets_.size()) > window_) buckets_.pop_back();
}

int UpdateFrequencyTracker::count_in_window(GoalId skill) const {
  int total = 0;
  for (const auto& b : buckets_) {
    auto it = b.find(skill);
    if (it != b.end()) total += it->second;
  }
  return total;
}

void UpdateFrequencyTracker::save(std::ostream& os) const {
  io::put_i64(os, window_);
  io::put_u64(os, buckets_.size());
  for (const auto& b : buckets_) {
    io::put_u64(os, b.size());
    for (const auto& [k, v] : b) {
      io::put_i64(os, k);
      io::put_i64(os, v);
    }
  }
}

void UpdateFrequencyTracker::load(std::istream& is) {
  window_ = static_cast<int>(io::get_i64(is));
  uint64_t nb = io::get_u64(is);
  buckets_.clear();
  for (uint64_t i = 0; i < nb; ++i) {
    std::map<GoalId, int> b;
    uint64_t n = io::get_u64(is);
    for (uint64_t j = 0; j < n; ++j) {
      GoalId k = static_cast<GoalId>(io::get_i64(is));
      b[k] = static_cast<int>(io::get_i64(is));
    }
    buckets_.push_back(std::move(b));
  }
  if (buckets_.empty()) buckets_.emplace_back();
}

double inclusion_probability(double estimate, int updates_in_window, double eps_cap) {
  double eps = std::min(static_cast<double>(updates_in_window), eps_cap);
  return std::max(estimate, eps);
}

AdmissibleSet build_admissible(const WorldState& s, const GoalCatalog& catalog,
                               const std::vector<GoalId>& candidates,
                               const CompetenceView& estimator,
                               const UpdateFrequencyTracker& tracker,
                               const SkillSpaceConfig& cfg, Rng& rng) {
  AdmissibleSet out;
  for (const auto& g : catalog.goals())
    if (g.kind == GoalKind::elementary) out.skills.push_back(g.id);
  if (cfg.flat_baseline) return out;

  std::vector<GoalId> cand = candidates;
  if (cand.empty())
    for (const auto& g : catalog.goals())
      if (g.kind != GoalKind::elementary) cand.push_back(g.id);

  for (GoalId id : cand) {
    double p =
        inclusion_probability(estimator.estimate(s, id), tracker.count_in_window(id), cfg.eps_cap);
    bool included = rng.uniform() < p;
    out.draws.push_back({id, p, included});
    if (included) out.skills.push_back(id);
  }
  return out;
}

}  // namespace craftrl
