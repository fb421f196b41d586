#pragma once
#include <Eigen/Core>

#include "craftrl/goals.hpp"
#include "craftrl/world.hpp"

namespace craftrl {

using FeatureVector = Eigen::VectorXd;

// Compact per-step snapshot of everything the dense encodings need: the tile
// window (255 = out of bounds), the faced cell's window index (255 = none)
// and the clamped inventory. Replay buffers store these instead of dense
// feature vectors.
struct CompactObs {
  std::vector<uint8_t> tiles;
  uint8_t faced = 255;
  std::array<uint8_t, kItemCount> inv{};
  int8_t ax_norm = 0;  // agent position scaled to [0,100] for context features
  int8_t ay_norm = 0;

  bool operator==(const CompactObs&) const = default;
};

// Deterministic feature encodings shared by the low-level policy, the
// competence estimator and the high-level context encoder. The encodings are
// versioned through the (catalog, vocabulary, view) triple in the run config.
class Featurizer {
 public:
  Featurizer(const GoalCatalog* catalog, const Vocabulary* vocab, int view)
      : catalog_(catalog), vocab_(vocab), view_(view), skill_slots_(static_cast<int>(catalog->size())) {}

  int view() const { return view_; }

  CompactObs encode(const WorldState& s) const;

  // symbolic visual tensor: tile one-hot planes + out-of-bounds plane +
  // faced-cell marker plane + inventory planes (count/9, capped)
  int ll_channels() const { return kTileCount + 2 + kItemCount; }
  int ll_dim() const { return ll_channels() * view_ * view_; }
  FeatureVector ll_obs(const CompactObs& o) const;
  FeatureVector ll_obs(const WorldState& s) const { return ll_obs(encode(s)); }
  void ll_obs_into(const CompactObs& o, double* dst) const;

  // flattened tile window + inventory + skill one-hot; compositional skills
  // share their base achievement's slot
  int comp_dim() const { return (kTileCount + 1) * view_ * view_ + kItemCount + skill_slots_; }
  FeatureVector comp_features(const CompactObs& o, GoalId skill) const;
  FeatureVector comp_features(const WorldState& s, GoalId skill) const {
    return comp_features(encode(s), skill);
  }

  // structured caption features: per-kind visibility + distance, faced block,
  // inventory, goal token bag, remaining high-level budget, coordinates
  int hl_dim() const { return 2 * kTileCount + (kTileCount + 1) + kItemCount + vocab_->size() + 1 + 2; }
  FeatureVector hl_features(const WorldState& s, const std::vector<int>& goal_tokens,
                            int hl_steps_done, int hl_budget) const;

 private:
  const GoalCatalog* catalog_;
  const Vocabulary* vocab_;
  int view_;
  int skill_slots_;
};

void save_compact_obs(std::ostream& os, const CompactObs& o);
CompactObs load_compact_obs(std::istream& is);

}  // namespace craftrl
