#include "craftrl/lowlevel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "craftrl/serialize.hpp"

namespace craftrl {

using nn::Matrix;

void LLNet::init(int channels, int view, const LLConfig& cfg, Rng& rng) {
  if (cfg.conv_channels.size() != 3 || cfg.fc.size() != 2)
    throw std::invalid_argument("LLConfig: expected 3 conv widths and 2 fc widths");
  nn::Act act = nn::act_from_string(cfg.activation);
  stem.init(cfg.conv_channels[0], channels, view, view, act, rng, cfg.init_scale);
  blk1.init(cfg.conv_channels[1], cfg.conv_channels[0], view, view, act, rng, cfg.init_scale);
  blk2.init(cfg.conv_channels[2], cfg.conv_channels[1], view, view, act, rng, cfg.init_scale);
  int flat = cfg.conv_channels[2] * view * view;
  fc1.init(cfg.fc[0], flat, act, rng, cfg.init_scale);
  fc2.init(cfg.fc[1], cfg.fc[0], act, rng, cfg.init_scale);
  pi.init(kActionCount, cfg.fc[1], nn::Act::identity, rng, 0.01);
  vout.init(1, cfg.fc[1], nn::Act::identity, rng, 0.01);
}

void LLNet::forward(const Matrix& X, Cache& c) const {
  c.x = X;
  c.s = stem.apply(X);
  blk1.forward(c.s, c.c1);
  blk2.forward(c.c1.y, c.c2);
  c.f1 = fc1.apply(c.c2.y);
  c.f2 = fc2.apply(c.f1);
  c.logits = pi.apply(c.f2);
  c.vlogit = vout.apply(c.f2);
}

void LLNet::backward(const Matrix& dLogits, const Matrix& dVlogit, const Cache& c) {
  Matrix dF2 = pi.backward(dLogits, c.f2, c.logits);
  dF2 += vout.backward(dVlogit, c.f2, c.vlogit);
  Matrix dF1 = fc2.backward(dF2, c.f1, c.f2);
  Matrix dFlat = fc1.backward(dF1, c.c2.y, c.f1);
  Matrix dB1 = blk2.backward(dFlat, c.c2);
  Matrix dS = blk1.backward(dB1, c.c1);
  stem.backward(dS, c.x, c.s);
}

void LLNet::heads(const Matrix& X, Matrix* logits, Matrix* value_logit) const {
  Matrix h = fc2.apply(fc1.apply(blk2.apply(blk1.apply(stem.apply(X)))));
  if (logits) *logits = pi.apply(h);
  if (value_logit) *value_logit = vout.apply(h);
}

Eigen::VectorXd LLNet::action_probs(const FeatureVector& obs) const {
  Matrix logits;
  heads(obs, &logits, nullptr);
  Eigen::VectorXd z = logits.col(0);
  double m = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - m).exp();
  return e / e.sum();
}

double LLNet::value(const FeatureVector& obs) const {
  Matrix v;
  heads(obs, nullptr, &v);
  return 1.0 / (1.0 + std::exp(-v(0, 0)));
}

std::vector<nn::ParamRef> LLNet::params() {
  std::vector<nn::ParamRef> ps;
  stem.collect(ps);
  blk1.collect(ps);
  blk2.collect(ps);
  fc1.collect(ps);
  fc2.collect(ps);
  pi.collect(ps);
  vout.collect(ps);
  return ps;
}

int64_t LLNet::param_count() {
  int64_t n = 0;
  for (auto& p : params()) n += p.w->size();
  return n;
}

void LLNet::save(std::ostream& os) const {
  stem.save(os);
  blk1.save(os);
  blk2.save(os);
  fc1.save(os);
  fc2.save(os);
  pi.save(os);
  vout.save(os);
}

void LLNet::load(std::istream& is) {
  stem.load(is);
  blk1.load(is);
  blk2.load(is);
  fc1.load(is);
  fc2.load(is);
  pi.load(is);
  vout.load(is);
}

// ------------------------------------------------------------ replay buffer

void ReplayBuffer::add(LLTrajectory t) {
  int64_t n = static_cast<int64_t>(t.steps.size());
  if (n == 0) return;
  traj_.push_back(std::move(t));
  size_ += n;
  new_count_ += n;
  while (size_ > capacity_ && !traj_.empty()) {
    size_ -= static_cast<int64_t>(traj_.front().steps.size());
    traj_.pop_front();
  }
}

static void save_traj(std::ostream& os, const LLTrajectory& t) {
  io::put_u64(os, t.steps.size());
  for (const auto& s : t.steps) {
    save_compact_obs(os, s.obs);
    io::put_i64(os, s.action);
    io::put_f64(os, s.reward);
    io::put_i64(os, s.done ? 1 : 0);
  }
  save_compact_obs(os, t.final_obs);
  io::put_i64(os, t.success ? 1 : 0);
  io::put_i64(os, t.timeout ? 1 : 0);
}

static LLTrajectory load_traj(std::istream& is) {
  LLTrajectory t;
  uint64_t n = io::get_u64(is);
  t.steps.resize(n);
  for (auto& s : t.steps) {
    s.obs = load_compact_obs(is);
    s.action = static_cast<uint8_t>(io::get_i64(is));
    s.reward = static_cast<float>(io::get_f64(is));
    s.done = io::get_i64(is) != 0;
  }
  t.final_obs = load_compact_obs(is);
  t.success = io::get_i64(is) != 0;
  t.timeout = io::get_i64(is) != 0;
  return t;
}

void ReplayBuffer::save(std::ostream& os) const {
  io::put_i64(os, capacity_);
  io::put_i64(os, new_count_);
  io::put_u64(os, traj_.size());
  for (const auto& t : traj_) save_traj(os, t);
}

void ReplayBuffer::load(std::istream& is) {
  capacity_ = io::get_i64(is);
  new_count_ = io::get_i64(is);
  uint64_t n = io::get_u64(is);
  traj_.clear();
  size_ = 0;
  for (uint64_t i = 0; i < n; ++i) {
    traj_.push_back(load_traj(is));
    size_ += static_cast<int64_t>(traj_.back().steps.size());
  }
}

// -------------------------------------------------------------------- bank

LowLevelBank::LowLevelBank(const Featurizer* featurizer, const GoalCatalog* catalog, LLConfig cfg,
                           uint64_t seed)
    : featurizer_(featurizer), catalog_(catalog), cfg_(cfg), seed_(seed) {}

Action LowLevelBank::act(const FeatureVector& obs, GoalId skill, bool greedy, Rng& rng) const {
  if (auto a = catalog_->action_of_goal(skill)) return *a;  // passthrough
  auto it = nets_.find(skill);
  if (it == nets_.end())
    throw std::out_of_range("no low-level policy for skill " + std::to_string(skill));
  Eigen::VectorXd p = it->second->action_probs(obs);
  if (greedy) {
    Eigen::Index best;
    p.maxCoeff(&best);
    return static_cast<Action>(best);
  }
  double u = rng.uniform();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<Action>(i);
  }
  return static_cast<Action>(p.size() - 1);
}

void LowLevelBank::ensure_policy(GoalId skill) {
  if (catalog_->is_elementary(skill) || nets_.count(skill)) return;
  Rng rng(derive_seed(seed_, "ll_init", static_cast<uint64_t>(skill)));
  auto net = std::make_unique<LLNet>();
  net->init(featurizer_->ll_channels(), featurizer_->view(), cfg_, rng);
  nets_[skill] = std::move(net);
  nn::Adam adam;
  adam.lr = cfg_.lr;
  adams_[skill] = adam;
  train_rngs_[skill] = Rng(derive_seed(seed_, "ll_train", static_cast<uint64_t>(skill)));
}

void LowLevelBank::store(GoalId skill, LLTrajectory t) { buffer(skill).add(std::move(t)); }

ReplayBuffer& LowLevelBank::buffer(GoalId skill) {
  auto it = buffers_.find(skill);
  if (it == buffers_.end())
    it = buffers_.emplace(skill, ReplayBuffer(cfg_.buffer_capacity)).first;
  return it->second;
}

std::vector<GoalId> LowLevelBank::due_skills() const {
  std::vector<GoalId> out;
  for (const auto& [id, buf] : buffers_)
    if (buf.new_since_update() >= cfg_.update_every) out.push_back(id);
  return out;
}

AwrStats LowLevelBank::awr_update(GoalId skill) {
  if (buffer(skill).new_since_update() < cfg_.update_every) return {};
  return force_awr_update(skill);
}

AwrStats LowLevelBank::force_awr_update(GoalId skill) {
  ensure_policy(skill);
  ReplayBuffer& buf = buffer(skill);
  AwrStats stats;
  if (buf.trajectories().empty()) return stats;
  LLNet& net = *nets_[skill];
  nn::Adam& adam = adams_[skill];
  Rng& rng = train_rngs_[skill];
  auto params = net.params();

  const auto& trajs = buf.trajectories();
  double weight_sum = 0.0;
  int64_t weight_n = 0;
  stats.min_weight = cfg_.weight_clip;
  stats.max_weight = 0.0;

  for (int batch = 0; batch < cfg_.batches_per_update; ++batch) {
    // sample whole trajectories until the batch is full
    std::vector<std::pair<const LLTrajectory*, int>> picks;  // (traj, step)
    std::vector<double> returns;
    int64_t want = cfg_.batch_size;
    int guard = 0;
    while (want > 0 && guard++ < 4 * cfg_.batch_size) {
      const LLTrajectory& t = trajs[rng.uniform_int(trajs.size())];
      // Monte-Carlo returns; timed-out executions bootstrap the terminal
      // value from the current critic (proxy reward).
      double carry = t.timeout ? net.value(featurizer_->ll_obs(t.final_obs)) : 0.0;
      std::vector<double> ret(t.steps.size());
      for (int64_t i = static_cast<int64_t>(t.steps.size()) - 1; i >= 0; --i) {
        carry = t.steps[static_cast<size_t>(i)].reward + cfg_.gamma * carry;
        ret[static_cast<size_t>(i)] = carry;
      }
      for (size_t i = 0; i < t.steps.size() && want > 0; ++i, --want) {
        picks.push_back({&t, static_cast<int>(i)});
        returns.push_back(ret[i]);
      }
    }
    if (picks.empty()) break;
    const int bs = static_cast<int>(picks.size());

    Matrix X(featurizer_->ll_dim(), bs);
    for (int j = 0; j < bs; ++j)
      featurizer_->ll_obs_into(picks[j].first->steps[picks[j].second].obs, X.col(j).data());

    LLNet::Cache cache;
    net.forward(X, cache);

    // softmax over logits
    Matrix P = cache.logits;
    for (int j = 0; j < bs; ++j) {
      double m = P.col(j).maxCoeff();
      P.col(j) = (P.col(j).array() - m).exp();
      P.col(j) /= P.col(j).sum();
    }
    Matrix V = (1.0 + (-cache.vlogit.array()).exp()).inverse().matrix();

    // AWR weights from advantages under the current critic
    Matrix dLogits = Matrix::Zero(kActionCount, bs);
    Matrix dVlogit(1, bs);
    double actor_loss = 0.0, critic_loss = 0.0;
    for (int j = 0; j < bs; ++j) {
      double R = returns[static_cast<size_t>(j)];
      double v = V(0, j);
      double adv = R - v;
      double w = std::min(std::exp(adv / cfg_.beta_awr), cfg_.weight_clip);
      weight_sum += w;
      ++weight_n;
      stats.min_weight = std::min(stats.min_weight, w);
      stats.max_weight = std::max(stats.max_weight, w);
      int a = picks[static_cast<size_t>(j)].first->steps[picks[static_cast<size_t>(j)].second].action;
      actor_loss += -w * std::log(std::max(P(a, j), 1e-12));
      // d(-w log p_a)/dlogits = w * (p - onehot_a)
      dLogits.col(j) = w * P.col(j);
      dLogits(a, j) -= w;
      // critic: MSE on sigmoid output; dL/dvlogit = 2(v-R) v(1-v)
      critic_loss += (v - R) * (v - R);
      dVlogit(0, j) = cfg_.value_coef * 2.0 * (v - R) * v * (1.0 - v);
    }
    dLogits /= bs;
    dVlogit /= bs;
    nn::zero_grads(params);
    net.backward(dLogits, dVlogit, cache);
    adam.step(params);

    stats.transitions_seen += bs;
    stats.actor_loss += actor_loss / bs;
    stats.critic_loss += critic_loss / bs;
  }
  if (cfg_.batches_per_update > 0) {
    stats.actor_loss /= cfg_.batches_per_update;
    stats.critic_loss /= cfg_.batches_per_update;
  }
  stats.mean_weight = weight_n ? weight_sum / static_cast<double>(weight_n) : 0.0;
  buf.mark_updated();
  return stats;
}

std::vector<GoalId> LowLevelBank::instantiated() const {
  std::vector<GoalId> out;
  for (const auto& [id, _] : nets_) out.push_back(id);
  return out;
}

void LowLevelBank::save(std::ostream& os, bool include_buffers) const {
  io::put_u64(os, nets_.size());
  for (const auto& [id, net] : nets_) {
    io::put_i64(os, id);
    net->save(os);
    adams_.at(id).save(os);
    io::put_str(os, train_rngs_.at(id).serialize());
  }
  io::put_i64(os, include_buffers ? 1 : 0);
  if (include_buffers) {
    io::put_u64(os, buffers_.size());
    for (const auto& [id, buf] : buffers_) {
      io::put_i64(os, id);
      buf.save(os);
    }
  }
}

void LowLevelBank::load(std::istream& is) {
  nets_.clear();
  adams_.clear();
  buffers_.clear();
  train_rngs_.clear();
  uint64_t n = io::get_u64(is);
  for (uint64_t i = 0; i < n; ++i) {
    GoalId id = static_cast<GoalId>(io::get_i64(is));
    auto net = std::make_unique<LLNet>();
    net->load(is);
    nets_[id] = std::move(net);
    adams_[id].load(is);
    Rng r;
    r.deserialize(io::get_str(is));
    train_rngs_[id] = r;
  }
  if (io::get_i64(is)) {
    uint64_t nb = io::get_u64(is);
    for (uint64_t i = 0; i < nb; ++i) {
      GoalId id = static_cast<GoalId>(io::get_i64(is));
      ReplayBuffer buf(cfg_.buffer_capacity);
      buf.load(is);
      buffers_.emplace(id, std::move(buf));
    }
  }
}

// --------------------------------------------------------------- relabeling

void relabel_and_store(LowLevelBank& bank, const std::vector<LLSegment>& segments, GoalId hl_goal,
                       const std::vector<float>& hl_goal_rewards, bool goal_success,
                       bool store_failed_compiled) {
  // per-skill segments
  for (const auto& seg : segments) {
    if (seg.elementary || seg.obs.empty()) continue;
    LLTrajectory t;
    t.steps.reserve(seg.obs.size());
    for (size_t i = 0; i < seg.obs.size(); ++i) {
      LLTransition tr;
      tr.obs = seg.obs[i];
      tr.action = seg.actions[i];
      tr.reward = seg.skill_rewards[i];
      tr.done = (i + 1 == seg.obs.size()) && seg.skill_success;
      t.steps.push_back(std::move(tr));
    }
    t.final_obs = seg.final_obs;
    t.success = seg.skill_success;
    t.timeout = !seg.skill_success;
    bank.store(seg.skill, std::move(t));
  }

  // compiled goal trajectory: the concatenation of every segment
  if (!goal_success && !store_failed_compiled) return;
  LLTrajectory compiled;
  size_t total = 0;
  for (const auto& seg : segments) total += seg.obs.size();
  if (total == 0) return;
  compiled.steps.reserve(total);
  size_t k = 0;
  for (const auto& seg : segments) {
    for (size_t i = 0; i < seg.obs.size(); ++i, ++k) {
      LLTransition tr;
      tr.obs = seg.obs[i];
      tr.action = seg.actions[i];
      tr.reward = k < hl_goal_rewards.size() ? hl_goal_rewards[k] : 0.f;
      tr.done = goal_success && k + 1 == total;
      compiled.steps.push_back(std::move(tr));
    }
    compiled.final_obs = seg.final_obs;
  }
  compiled.success = goal_success;
  compiled.timeout = !goal_success;
  bank.store(hl_goal, std::move(compiled));
}

}  // namespace craftrl
