#include "craftrl/features.hpp"

#include <algorithm>
#include <cmath>

#include "craftrl/serialize.hpp"

namespace craftrl {

static double inv_level(int count) { return std::min(count, 9) / 9.0; }

CompactObs Featurizer::encode(const WorldState& s) const {
  const int half = view_ / 2;
  CompactObs o;
  o.tiles.assign(static_cast<size_t>(view_) * view_, 255);
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      int x = s.ax + dx, y = s.ay + dy;
      if (!s.in_bounds(x, y)) continue;
      o.tiles[static_cast<size_t>((dy + half) * view_ + (dx + half))] =
          static_cast<uint8_t>(s.at(x, y));
    }
  }
  if (auto f = s.faced_cell()) {
    int dx = f->first - s.ax, dy = f->second - s.ay;
    if (std::abs(dx) <= half && std::abs(dy) <= half)
      o.faced = static_cast<uint8_t>((dy + half) * view_ + (dx + half));
  }
  for (int i = 0; i < kItemCount; ++i)
    o.inv[static_cast<size_t>(i)] =
        static_cast<uint8_t>(std::min(s.inventory[static_cast<size_t>(i)], 255));
  o.ax_norm = static_cast<int8_t>(100.0 * s.ax / std::max(1, s.side - 1));
  o.ay_norm = static_cast<int8_t>(100.0 * s.ay / std::max(1, s.side - 1));
  return o;
}

void Featurizer::ll_obs_into(const CompactObs& o, double* dst) const {
  const int hw = view_ * view_;
  std::fill(dst, dst + ll_dim(), 0.0);
  for (int c = 0; c < hw; ++c) {
    uint8_t t = o.tiles[static_cast<size_t>(c)];
    if (t == 255)
      dst[kTileCount * hw + c] = 1.0;
    else
      dst[t * hw + c] = 1.0;
  }
  if (o.faced != 255) dst[(kTileCount + 1) * hw + o.faced] = 1.0;
  for (int i = 0; i < kItemCount; ++i) {
    double lvl = inv_level(o.inv[static_cast<size_t>(i)]);
    double* p = dst + (kTileCount + 2 + i) * hw;
    std::fill(p, p + hw, lvl);
  }
}

FeatureVector Featurizer::ll_obs(const CompactObs& o) const {
  FeatureVector v(ll_dim());
  ll_obs_into(o, v.data());
  return v;
}

FeatureVector Featurizer::comp_features(const CompactObs& o, GoalId skill) const {
  const int hw = view_ * view_;
  FeatureVector v = FeatureVector::Zero(comp_dim());
  for (int c = 0; c < hw; ++c) {
    uint8_t t = o.tiles[static_cast<size_t>(c)];
    if (t == 255)
      v[kTileCount * hw + c] = 1.0;
    else
      v[t * hw + c] = 1.0;
  }
  int base = (kTileCount + 1) * hw;
  for (int i = 0; i < kItemCount; ++i) v[base + i] = inv_level(o.inv[static_cast<size_t>(i)]);
  base += kItemCount;
  const Goal& g = catalog_->goal(skill);
  int slot = (g.kind == GoalKind::compositional) ? g.binding : skill;
  if (slot >= 0 && slot < skill_slots_) v[base + slot] = 1.0;
  return v;
}

FeatureVector Featurizer::hl_features(const WorldState& s, const std::vector<int>& goal_tokens,
                                      int hl_steps_done, int hl_budget) const {
  FeatureVector v = FeatureVector::Zero(hl_dim());
  const int half = view_ / 2;
  // nearest-instance visibility per kind: [present, closeness]
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      if (dx == 0 && dy == 0) continue;
      int x = s.ax + dx, y = s.ay + dy;
      if (!s.in_bounds(x, y)) continue;
      int k = static_cast<int>(s.at(x, y));
      double d = std::max(std::abs(dx), std::abs(dy));
      double closeness = 1.0 - (d - 1.0) / static_cast<double>(half);
      v[2 * k] = 1.0;
      v[2 * k + 1] = std::max(v[2 * k + 1], closeness);
    }
  }
  int base = 2 * kTileCount;
  auto faced = s.faced_tile();
  if (faced)
    v[base + static_cast<int>(*faced)] = 1.0;
  else
    v[base + kTileCount] = 1.0;
  base += kTileCount + 1;
  for (int i = 0; i < kItemCount; ++i)
    v[base + i] = inv_level(s.inventory[static_cast<size_t>(i)]);
  base += kItemCount;
  for (int t : goal_tokens)
    if (t != kEosToken && t >= 0 && t < vocab_->size()) v[base + t] += 1.0;
  base += vocab_->size();
  v[base] = hl_budget > 0 ? 1.0 - static_cast<double>(hl_steps_done) / hl_budget : 0.0;
  v[base + 1] = static_cast<double>(s.ax) / std::max(1, s.side - 1);
  v[base + 2] = static_cast<double>(s.ay) / std::max(1, s.side - 1);
  return v;
}

void save_compact_obs(std::ostream& os, const CompactObs& o) {
  io::put_u64(os, o.tiles.size());
  os.write(reinterpret_cast<const char*>(o.tiles.data()),
           static_cast<std::streamsize>(o.tiles.size()));
  os.put(static_cast<char>(o.faced));
  os.write(reinterpret_cast<const char*>(o.inv.data()), kItemCount);
  os.put(static_cast<char>(o.ax_norm));
  os.put(static_cast<char>(o.ay_norm));
}

CompactObs load_compact_obs(std::istream& is) {
  CompactObs o;
  uint64_t n = io::get_u64(is);
  o.tiles.resize(n);
  is.read(reinterpret_cast<char*>(o.tiles.data()), static_cast<std::streamsize>(n));
  o.faced = static_cast<uint8_t>(is.get());
  is.read(reinterpret_cast<char*>(o.inv.data()), kItemCount);
  o.ax_norm = static_cast<int8_t>(is.get());
  o.ay_norm = static_cast<int8_t>(is.get());
  if (!is) throw std::runtime_error("compact obs truncated");
  return o;
}

}  // namespace craftrl
