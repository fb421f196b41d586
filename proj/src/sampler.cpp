#include "craftrl/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "craftrl/serialize.hpp"

namespace craftrl {

GoalSampler::GoalSampler(const GoalCatalog* catalog, const Featurizer* featurizer,
                         std::vector<GoalId> candidate_goals, SamplerConfig cfg,
                         const CompetenceEstimator* competence)
    : catalog_(catalog),
      featurizer_(featurizer),
      candidates_(std::move(candidate_goals)),
      cfg_(cfg),
      competence_(competence) {
  if (candidates_.empty()) throw std::invalid_argument("sampler: empty goal set");
  pull_snapshot();
}

void GoalSampler::pull_snapshot() {
  CompetenceView v = competence_->view();
  if (!ring_.empty() && ring_.back().version >= v.version) return;
  ring_.push_back(std::move(v));
  while (static_cast<int>(ring_.size()) > cfg_.ring_size) ring_.pop_front();
}

double GoalSampler::epsilon() const {
  double frac = static_cast<double>(entries_) / static_cast<double>(cfg_.eps_horizon_entries);
  return cfg_.eps0 * std::exp(-cfg_.eps_decay_rate * frac);
}

double GoalSampler::learning_progress(const WorldState& s, GoalId g) const {
  if (ring_.empty()) throw std::logic_error("learning_progress: empty snapshot ring");
  if (ring_.size() == 1) return 0.0;
  return std::abs(ring_.back().estimate(s, g) - ring_.front().estimate(s, g));
}

std::vector<double> GoalSampler::learning_progress_all(const WorldState& s) const {
  std::vector<double> lp;
  lp.reserve(candidates_.size());
  for (GoalId g : candidates_) lp.push_back(learning_progress(s, g));
  return lp;
}

GoalId GoalSampler::sample_goal(const WorldState& s, Rng& rng) const {
  if (rng.uniform() < epsilon()) return candidates_[rng.uniform_int(candidates_.size())];
  std::vector<double> lp = learning_progress_all(s);
  double best = *std::max_element(lp.begin(), lp.end());
  std::vector<GoalId> ties;
  for (size_t i = 0; i < lp.size(); ++i)
    if (lp[i] >= best - 1e-12) ties.push_back(candidates_[i]);
  return ties[rng.uniform_int(ties.size())];
}

void GoalSampler::record_outcome(const std::vector<CompactObs>& hl_states, GoalId goal,
                                 bool outcome) {
  size_t n = std::min<size_t>(hl_states.size(), static_cast<size_t>(cfg_.entries_per_trajectory));
  for (size_t i = 0; i < n; ++i) {
    store_.push_back({hl_states[i], goal, outcome ? 1 : 0, cycle_});
    ++entries_;
    ++since_update_;
  }
}

void GoalSampler::update_if_due() {
  if (since_update_ < cfg_.update_every) return;
  since_update_ = 0;
  pull_snapshot();
  while (!store_.empty() && store_.front().cycle <= cycle_ - cfg_.buffer_cycles)
    store_.pop_front();
}

void GoalSampler::save(std::ostream& os) const {
  io::put_i64(os, entries_);
  io::put_i64(os, since_update_);
  io::put_i64(os, cycle_);
  io::put_u64(os, ring_.size());
  for (const auto& v : ring_) {
    io::put_i64(os, v.version);
    v.net->save(os);
  }
  io::put_u64(os, store_.size());
  for (const auto& e : store_) {
    save_compact_obs(os, e.obs);
    io::put_i64(os, e.goal);
    io::put_i64(os, e.outcome);
    io::put_i64(os, e.cycle);
  }
}

void GoalSampler::load(std::istream& is) {
  entries_ = io::get_i64(is);
  since_update_ = io::get_i64(is);
  cycle_ = io::get_i64(is);
  ring_.clear();
  uint64_t nr = io::get_u64(is);
  for (uint64_t i = 0; i < nr; ++i) {
    CompetenceView v;
    v.version = io::get_i64(is);
    auto net = std::make_shared<CompetenceNet>();
    net->load(is);
    v.net = net;
    v.featurizer = featurizer_;
    v.catalog = catalog_;
    ring_.push_back(std::move(v));
  }
  store_.clear();
  uint64_t ns = io::get_u64(is);
  for (uint64_t i = 0; i < ns; ++i) {
    GoalSampleEntry e;
    e.obs = load_compact_obs(is);
    e.goal = static_cast<GoalId>(io::get_i64(is));
    e.outcome = static_cast<int>(io::get_i64(is));
    e.cycle = io::get_i64(is);
    store_.push_back(std::move(e));
  }
}

}  // namespace craftrl
