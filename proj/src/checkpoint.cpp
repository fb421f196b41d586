#include "craftrl/checkpoint.hpp"

#include <fstream>

#include "craftrl/orchestrator.hpp"
#include "craftrl/serialize.hpp"

namespace craftrl {

static constexpr uint64_t kMagic = 0x43524c434b505431ULL;  // "CRLCKPT1"
static constexpr int64_t kVersion = 1;

void save_world(std::ostream& os, const WorldState& s) {
  io::put_i64(os, s.side);
  io::put_u64(os, s.grid.size());
  os.write(reinterpret_cast<const char*>(s.grid.data()),
           static_cast<std::streamsize>(s.grid.size()));
  io::put_i64(os, s.ax);
  io::put_i64(os, s.ay);
  io::put_i64(os, static_cast<int64_t>(s.facing));
  for (int c : s.inventory) io::put_i64(os, c);
  io::put_u64(os, s.placements.size());
  for (const auto& p : s.placements) {
    io::put_i64(os, static_cast<int64_t>(p.kind));
    io::put_i64(os, p.x);
    io::put_i64(os, p.y);
  }
  io::put_i64(os, s.ll_step_count);
  io::put_i64(os, s.hl_step_count);
  io::put_i64(os, s.episode_step_count);
  io::put_str(os, s.rng.serialize());
}

WorldState load_world(std::istream& is) {
  WorldState s;
  s.side = static_cast<int>(io::get_i64(is));
  uint64_t n = io::get_u64(is);
  s.grid.resize(n);
  is.read(reinterpret_cast<char*>(s.grid.data()), static_cast<std::streamsize>(n));
  s.ax = static_cast<int>(io::get_i64(is));
  s.ay = static_cast<int>(io::get_i64(is));
  s.facing = static_cast<Dir>(io::get_i64(is));
  for (int i = 0; i < kItemCount; ++i)
    s.inventory[static_cast<size_t>(i)] = static_cast<int>(io::get_i64(is));
  uint64_t np = io::get_u64(is);
  s.placements.clear();
  for (uint64_t i = 0; i < np; ++i) {
    Placement p;
    p.kind = static_cast<Tile>(io::get_i64(is));
    p.x = static_cast<int>(io::get_i64(is));
    p.y = static_cast<int>(io::get_i64(is));
    s.placements.push_back(p);
  }
  s.ll_step_count = io::get_i64(is);
  s.hl_step_count = io::get_i64(is);
  s.episode_step_count = io::get_i64(is);
  s.rng.deserialize(io::get_str(is));
  if (!is) throw std::runtime_error("world state truncated");
  return s;
}

namespace {

void save_hl_traj(std::ostream& os, const HLTrajectory& t) {
  io::put_u64(os, t.steps.size());
  for (const auto& s : t.steps) {
    io::put_matrix(os, s.features);
    io::put_vec<int>(os, s.tokens, [](std::ostream& o, int v) { io::put_i64(o, v); });
    io::put_vec<double>(os, s.behavior_logprobs,
                        [](std::ostream& o, double v) { io::put_f64(o, v); });
    io::put_u64(os, s.masks.size());
    for (const auto& m : s.masks)
      io::put_vec<int>(os, m, [](std::ostream& o, int v) { io::put_i64(o, v); });
    io::put_f64(os, s.reward);
    io::put_f64(os, s.value_est);
  }
  io::put_f64(os, t.final_value);
  io::put_i64(os, t.terminal ? 1 : 0);
}

HLTrajectory load_hl_traj(std::istream& is) {
  HLTrajectory t;
  uint64_t n = io::get_u64(is);
  t.steps.resize(n);
  for (auto& s : t.steps) {
    s.features = io::get_matrix(is);
    s.tokens = io::get_vec<int>(is, [](std::istream& i) { return static_cast<int>(io::get_i64(i)); });
    s.behavior_logprobs = io::get_vec<double>(is, [](std::istream& i) { return io::get_f64(i); });
    uint64_t nm = io::get_u64(is);
    s.masks.resize(nm);
    for (auto& m : s.masks)
      m = io::get_vec<int>(is, [](std::istream& i) { return static_cast<int>(io::get_i64(i)); });
    s.reward = io::get_f64(is);
    s.value_est = io::get_f64(is);
  }
  t.final_value = io::get_f64(is);
  t.terminal = io::get_i64(is) != 0;
  return t;
}

}  // namespace

struct CheckpointCodec {
  static void save(const Trainer& tr, std::ostream& os) {
    io::put_u64(os, kMagic);
    io::put_i64(os, kVersion);
    io::put_str(os, tr.cfg_.to_json_text());
    io::put_u64(os, tr.cfg_.hash());

    io::put_i64(os, tr.env_steps_);
    io::put_i64(os, tr.hl_steps_);
    io::put_i64(os, tr.cycle_);
    io::put_i64(os, tr.eval_counter_);
    io::put_i64(os, tr.cycle_hl_transitions_);
    io::put_i64(os, tr.max_segment_steps_cycle_);
    io::put_i64(os, tr.max_attempt_skills_cycle_);
    io::put_i64(os, tr.max_episode_hl_cycle_);
    io::put_i64(os, tr.mastery_hl_steps_ ? *tr.mastery_hl_steps_ : -1);
    io::put_i64(os, tr.mastery_env_steps_ ? *tr.mastery_env_steps_ : -1);
    io::put_i64(os, tr.post_mastery_evals_done_);

    io::put_u64(os, tr.cycle_batch_.size());
    for (const auto& t : tr.cycle_batch_) save_hl_traj(os, t);

    io::put_u64(os, tr.envs_.size());
    for (const auto& env : tr.envs_) {
      save_world(os, env->state);
      io::put_i64(os, env->episode_hl_steps);
      io::put_u64(os, env->reset_counter);
      io::put_str(os, env->rng.serialize());
      io::put_i64(os, env->needs_reset ? 1 : 0);
      io::put_str(os, env->last_action_text);
    }

    tr.hl_->save(os);
    tr.bank_->save(os, tr.cfg_.train.checkpoint_full_state);
    tr.competence_->save(os);
    tr.sampler_->save(os);
    tr.tracker_.save(os);

    const auto& last = tr.metrics_.last_steps();
    io::put_u64(os, last.size());
    for (const auto& [k, v] : last) {
      io::put_str(os, k);
      io::put_i64(os, v);
    }
  }

  static void load(Trainer& tr, std::istream& is, bool force) {
    if (io::get_u64(is) != kMagic) throw std::runtime_error("checkpoint: bad magic");
    if (io::get_i64(is) != kVersion) throw std::runtime_error("checkpoint: unknown version");
    std::string cfg_text = io::get_str(is);
    uint64_t h = io::get_u64(is);
    if (h != tr.cfg_.hash() && !force)
      throw std::runtime_error(
          "checkpoint: config hash mismatch (use force to override)");

    tr.env_steps_ = io::get_i64(is);
    tr.hl_steps_ = io::get_i64(is);
    tr.cycle_ = io::get_i64(is);
    tr.eval_counter_ = io::get_i64(is);
    tr.cycle_hl_transitions_ = io::get_i64(is);
    tr.max_segment_steps_cycle_ = static_cast<int>(io::get_i64(is));
    tr.max_attempt_skills_cycle_ = static_cast<int>(io::get_i64(is));
    tr.max_episode_hl_cycle_ = io::get_i64(is);
    int64_t ms = io::get_i64(is);
    tr.mastery_hl_steps_ = ms >= 0 ? std::optional<int64_t>(ms) : std::nullopt;
    int64_t me = io::get_i64(is);
    tr.mastery_env_steps_ = me >= 0 ? std::optional<int64_t>(me) : std::nullopt;
    tr.post_mastery_evals_done_ = static_cast<int>(io::get_i64(is));

    uint64_t nb = io::get_u64(is);
    tr.cycle_batch_.clear();
    for (uint64_t i = 0; i < nb; ++i) tr.cycle_batch_.push_back(load_hl_traj(is));

    uint64_t ne = io::get_u64(is);
    if (ne != tr.envs_.size())
      throw std::runtime_error("checkpoint: envs_parallel mismatch");
    for (auto& env : tr.envs_) {
      env->state = load_world(is);
      env->episode_hl_steps = io::get_i64(is);
      env->reset_counter = io::get_u64(is);
      env->rng.deserialize(io::get_str(is));
      env->needs_reset = io::get_i64(is) != 0;
      env->last_action_text = io::get_str(is);
      env->verifiers->reset_episode();
    }

    tr.hl_->load(is);
    tr.bank_->load(is);
    tr.competence_->load(is);
    tr.sampler_->load(is);
    tr.tracker_.load(is);

    uint64_t nk = io::get_u64(is);
    std::map<std::string, int64_t> last;
    for (uint64_t i = 0; i < nk; ++i) {
      std::string k = io::get_str(is);
      last[k] = io::get_i64(is);
    }
    tr.metrics_.restore_last_steps(last);
    tr.resumed_ = true;
    (void)cfg_text;
  }
};

void Trainer::save_checkpoint(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot write " + path);
  CheckpointCodec::save(*this, os);
}

void Trainer::load_checkpoint(const std::string& path, bool force) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  CheckpointCodec::load(*this, is, force);
}

}  // namespace craftrl
