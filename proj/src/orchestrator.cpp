#include "craftrl/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

namespace craftrl {

namespace {

bool contains_id(const std::vector<GoalId>& v, GoalId id) {
  return std::find(v.begin(), v.end(), id) != v.end();
}

}  // namespace

Trainer::Trainer(const RunConfig& cfg)
    : cfg_(cfg),
      catalog_(GoalCatalog::builtin()),
      lexicon_(Lexicon::builtin()),
      vocab_(Vocabulary::builtin(catalog_, lexicon_)),
      featurizer_(&catalog_, &vocab_, cfg.env.view),
      tracker_(cfg.tracker_window) {
  cfg_.validate();
  cfg_.skillspace.flat_baseline = cfg_.train.flat_baseline;

  HLConfig hl_cfg = cfg_.hl;
  hl_cfg.min_batch = static_cast<int>(cfg_.budgets.cycle_size);
  hl_ = std::make_unique<HighLevelPolicy>(featurizer_.hl_dim(), &vocab_, hl_cfg,
                                          cfg_.master_seed);
  competence_ = std::make_unique<CompetenceEstimator>(&featurizer_, &catalog_, cfg_.competence,
                                                      derive_seed(cfg_.master_seed, "competence"));
  LLConfig ll_cfg = cfg_.ll;
  bank_ = std::make_unique<LowLevelBank>(&featurizer_, &catalog_, ll_cfg,
                                         derive_seed(cfg_.master_seed, "ll_bank"));

  if (cfg_.goal_subset.empty()) {
    train_goals_ = catalog_.achievement_ids();
  } else {
    for (const auto& text : cfg_.goal_subset) train_goals_.push_back(catalog_.find_text(text)->id);
  }
  // deterministic parameters per skill id, so instantiating the training
  // candidates up front matches lazy instantiation exactly
  if (!cfg_.train.flat_baseline)
    for (GoalId g : train_goals_) bank_->ensure_policy(g);

  sampler_ = std::make_unique<GoalSampler>(&catalog_, &featurizer_, train_goals_, cfg_.sampler,
                                           competence_.get());

  for (int i = 0; i < cfg_.budgets.envs_parallel; ++i) {
    auto env = std::make_unique<EnvSlot>();
    env->index = i;
    env->verifiers = std::make_unique<VerifierBank>(&catalog_);
    env->rng = Rng(derive_seed(cfg_.master_seed, "env_rng", static_cast<uint64_t>(i)));
    envs_.push_back(std::move(env));
  }
  for (const auto& g : catalog_.goals()) token_cache_.push_back(vocab_.tokenize(g.text));
}

std::vector<int> Trainer::goal_tokens(GoalId id) const {
  return token_cache_[static_cast<size_t>(id)];
}

void Trainer::reset_env(EnvSlot& env) {
  uint64_t seed = derive_seed(cfg_.master_seed, "train_world",
                              (static_cast<uint64_t>(env.index) << 32) | env.reset_counter);
  env.state = generate_world(seed, cfg_.env.side, cfg_.env.gen);
  env.verifiers->reset_episode();
  env.episode_hl_steps = 0;
  ++env.reset_counter;
  env.last_action_text.clear();
  env.needs_reset = false;
}

std::vector<GoalId> Trainer::skill_candidates(GoalId goal) const {
  std::vector<GoalId> cand = train_goals_;
  if (!contains_id(cand, goal) && !catalog_.is_elementary(goal)) cand.push_back(goal);
  return cand;
}

AttemptParams Trainer::train_params() const {
  AttemptParams p;
  p.n_hl = cfg_.budgets.n_hl;
  p.n_ll = cfg_.budgets.n_ll;
  p.greedy_hl = false;
  p.greedy_ll = false;
  p.learn = true;
  return p;
}

AttemptParams Trainer::eval_params() const {
  AttemptParams p;
  p.n_hl = cfg_.eval.n_hl > 0 ? cfg_.eval.n_hl : cfg_.budgets.n_hl;
  p.n_ll = cfg_.eval.n_ll > 0 ? cfg_.eval.n_ll : cfg_.budgets.n_ll;
  p.greedy_hl = cfg_.eval.greedy;
  p.greedy_ll = cfg_.eval.greedy;
  p.learn = false;
  return p;
}

AttemptResult Trainer::run_goal_attempt(EnvSlot& env, GoalId goal,
                                        const std::vector<int>& goal_tokens,
                                        const AttemptParams& params) {
  AttemptResult res;
  res.goal = goal;
  res.initial_state = env.state;
  CompetenceView comp_view = competence_->view();
  std::vector<GoalId> candidates = skill_candidates(goal);

  while (res.hl_steps < params.n_hl &&
         env.episode_hl_steps < cfg_.budgets.episode_cap && !res.success) {
    AdmissibleSet adm = build_admissible(env.state, catalog_, candidates, comp_view, tracker_,
                                         cfg_.skillspace, env.rng);
    if (params.learn && cfg_.train.log_skillspace_draws) {
      nlohmann::ordered_json draws = nlohmann::ordered_json::array();
      for (const auto& d : adm.draws)
        draws.push_back({{"goal", d.goal}, {"p", d.p}, {"included", d.included}});
      res.draw_logs.push_back(std::move(draws));
    }

    FeatureVector hl_feat =
        featurizer_.hl_features(env.state, goal_tokens, res.hl_steps, params.n_hl);
    res.hl_states.push_back(featurizer_.encode(env.state));

    std::vector<std::pair<GoalId, std::vector<int>>> adm_tokens;
    adm_tokens.reserve(adm.skills.size());
    for (GoalId id : adm.skills) adm_tokens.push_back({id, token_cache_[static_cast<size_t>(id)]});

    DecodeResult dec = hl_->decode(hl_feat, adm_tokens, env.rng, params.greedy_hl);
    GoalId skill = dec.skill;
    res.skills_called.push_back(catalog_.goal(skill).text);

    LLSegment seg;
    seg.skill = skill;
    seg.elementary = catalog_.is_elementary(skill);
    bool goal_fired = false;

    if (seg.elementary) {
      Action a = *catalog_.action_of_goal(skill);
      CompactObs obs = featurizer_.encode(env.state);
      PrevSummary prev = summarize(env.state);
      step(env.state, a);
      std::vector<GoalId> fired = env.verifiers->fired(prev, a, env.state);
      goal_fired = contains_id(fired, goal);
      seg.obs.push_back(obs);
      seg.actions.push_back(static_cast<uint8_t>(a));
      seg.skill_rewards.push_back(1.f);  // passthrough always executes
      res.goal_rewards.push_back(goal_fired ? 1.f : 0.f);
      res.actions.push_back(static_cast<uint8_t>(a));
      seg.skill_success = true;
      ++res.env_steps;
      env.last_action_text = action_text(a);
    } else {
      bool skill_fired = false;
      int steps = 0;
      while (steps < params.n_ll) {
        CompactObs obs = featurizer_.encode(env.state);
        Action a = bank_->act(featurizer_.ll_obs(obs), skill, params.greedy_ll, env.rng);
        PrevSummary prev = summarize(env.state);
        step(env.state, a);
        std::vector<GoalId> fired = env.verifiers->fired(prev, a, env.state);
        bool sf = contains_id(fired, skill);
        bool gf = contains_id(fired, goal);
        seg.obs.push_back(obs);
        seg.actions.push_back(static_cast<uint8_t>(a));
        seg.skill_rewards.push_back(sf ? 1.f : 0.f);
        res.goal_rewards.push_back(gf ? 1.f : 0.f);
        res.actions.push_back(static_cast<uint8_t>(a));
        ++steps;
        ++res.env_steps;
        env.last_action_text = action_text(a);
        if (sf) skill_fired = true;
        if (gf) goal_fired = true;
        if (sf || gf) break;  // the skill or the episode goal completed
      }
      seg.skill_success = skill_fired;
    }
    seg.final_obs = featurizer_.encode(env.state);
    res.max_segment_steps =
        std::max(res.max_segment_steps, static_cast<int>(seg.obs.size()));
    res.segments.push_back(std::move(seg));

    HLStep hs;
    hs.features = hl_feat;
    hs.tokens = dec.tokens;
    hs.behavior_logprobs = dec.logprobs;
    hs.masks = dec.masks;
    hs.reward = goal_fired ? 1.0 : 0.0;
    hs.value_est = hl_->value(hl_feat);
    res.hl_traj.steps.push_back(std::move(hs));

    ++res.hl_steps;
    ++env.episode_hl_steps;
    ++env.state.hl_step_count;
    res.success = goal_fired;
  }

  res.hl_traj.terminal = res.success;
  if (!res.success && !res.hl_traj.steps.empty()) {
    FeatureVector final_feat =
        featurizer_.hl_features(env.state, goal_tokens, res.hl_steps, params.n_hl);
    res.hl_traj.final_value = hl_->value(final_feat);
  }
  return res;
}

void Trainer::apply_attempt(AttemptResult& r) {
  hl_steps_ += r.hl_steps;
  env_steps_ += r.env_steps;
  cycle_hl_transitions_ += r.hl_steps;
  cycle_batch_.push_back(std::move(r.hl_traj));

  max_segment_steps_cycle_ = std::max(max_segment_steps_cycle_, r.max_segment_steps);
  max_attempt_skills_cycle_ = std::max(max_attempt_skills_cycle_, r.hl_steps);

  if (!cfg_.train.flat_baseline) {
    relabel_and_store(*bank_, r.segments, r.goal, r.goal_rewards, r.success,
                      cfg_.train.store_failed_compiled);
    for (const auto& seg : r.segments) {
      if (seg.elementary) continue;
      size_t k = std::min<size_t>(seg.obs.size(),
                                  static_cast<size_t>(cfg_.competence.samples_per_execution));
      std::vector<CompactObs> head(seg.obs.begin(), seg.obs.begin() + static_cast<long>(k));
      competence_->record_execution(head, seg.skill, seg.skill_success);
    }
  }
  sampler_->record_outcome(r.hl_states, r.goal, r.success);
  sampler_->update_if_due();

  if (metrics_.is_open()) {
    nlohmann::ordered_json lp = nlohmann::ordered_json::array();
    for (double v : r.sampler_lp) lp.push_back(v);
    metrics_.write("sampler", hl_steps_,
                   {{"cycle", cycle_},
                    {"goal", catalog_.goal(r.goal).text},
                    {"eps", r.sampler_eps},
                    {"lp", std::move(lp)},
                    {"success", r.success}});
    if (cfg_.train.log_skillspace_draws) {
      int64_t base = hl_steps_ - r.hl_steps;
      for (size_t i = 0; i < r.draw_logs.size(); ++i)
        metrics_.write("skillspace", base + static_cast<int64_t>(i) + 1,
                       {{"draws", std::move(r.draw_logs[i])}});
    }
  }
}

void Trainer::collect_round() {
  const int n = static_cast<int>(envs_.size());
  std::vector<AttemptResult> results(static_cast<size_t>(n));

  auto worker = [&](int i) {
    EnvSlot& env = *envs_[static_cast<size_t>(i)];
    if (env.needs_reset || env.episode_hl_steps >= cfg_.budgets.episode_cap) reset_env(env);
    double eps = sampler_->epsilon();
    std::vector<double> lp = sampler_->learning_progress_all(env.state);
    GoalId goal = sampler_->sample_goal(env.state, env.rng);
    AttemptResult r = run_goal_attempt(env, goal, goal_tokens(goal), train_params());
    r.sampler_eps = eps;
    r.sampler_lp = std::move(lp);
    results[static_cast<size_t>(i)] = std::move(r);
    if (env.episode_hl_steps >= cfg_.budgets.episode_cap) env.needs_reset = true;
  };

  if (n == 1) {
    worker(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) threads.emplace_back(worker, i);
    for (auto& t : threads) t.join();
  }

  for (int i = 0; i < n; ++i) {
    max_episode_hl_cycle_ =
        std::max(max_episode_hl_cycle_, envs_[static_cast<size_t>(i)]->episode_hl_steps);
    apply_attempt(results[static_cast<size_t>(i)]);
  }
  run_due_updates();
}

void Trainer::run_due_updates() {
  if (!cfg_.train.flat_baseline) {
    for (GoalId skill : bank_->due_skills()) {
      AwrStats st = bank_->awr_update(skill);
      tracker_.record_update(skill);
      if (metrics_.is_open())
        metrics_.write("ll_train", hl_steps_,
                       {{"skill", catalog_.goal(skill).text},
                        {"transitions", st.transitions_seen},
                        {"actor_loss", st.actor_loss},
                        {"critic_loss", st.critic_loss},
                        {"mean_weight", st.mean_weight},
                        {"buffer", bank_->buffer(skill).size()}});
    }
    if (competence_->train_if_due() && metrics_.is_open())
      metrics_.write("estimator", hl_steps_,
                     {{"version", competence_->version()},
                      {"buffer", competence_->buffer_size()}});
  }
}

void Trainer::end_cycle() {
  ++cycle_;
  PpoStats st = hl_->ppo_update(cycle_batch_);
  cycle_batch_.clear();
  cycle_hl_transitions_ = 0;
  if (metrics_.is_open())
    metrics_.write("hl_train", hl_steps_,
                   {{"cycle", cycle_},
                    {"transitions", st.transitions},
                    {"policy_loss", st.policy_loss},
                    {"value_loss", st.value_loss},
                    {"entropy", st.entropy},
                    {"kl_ref", st.kl_ref},
                    {"mean_skill_len", st.mean_skill_len},
                    {"env_steps", env_steps_},
                    {"max_skill_exec_steps", max_segment_steps_cycle_},
                    {"max_attempt_skills", max_attempt_skills_cycle_},
                    {"max_episode_hl_steps", max_episode_hl_cycle_}});
  max_segment_steps_cycle_ = 0;
  max_attempt_skills_cycle_ = 0;
  max_episode_hl_cycle_ = 0;

  competence_->on_cycle_end();
  sampler_->on_cycle_end();
  tracker_.on_cycle_end();

  if (cycle_ % cfg_.eval.every_cycles == 0) {
    EvalReport rep = evaluate();
    if (metrics_.is_open()) metrics_.write("eval", rep.step, rep.to_json(catalog_));
    if (!cfg_.train.stop_on_mastery_goal.empty()) {
      const Goal* g = catalog_.find_text(cfg_.train.stop_on_mastery_goal);
      if (g) {
        for (size_t i = 0; i < rep.goals.size(); ++i) {
          if (rep.goals[i] != g->id) continue;
          if (!mastery_hl_steps_ && rep.success_rate[i] > cfg_.train.mastery_threshold) {
            mastery_hl_steps_ = hl_steps_;
            mastery_env_steps_ = env_steps_;
          } else if (mastery_hl_steps_) {
            ++post_mastery_evals_done_;
          }
        }
      }
    }
  }

  if (cfg_.train.checkpoint_every_cycles > 0 &&
      cycle_ % cfg_.train.checkpoint_every_cycles == 0)
    save_checkpoint(cfg_.out_dir + "/checkpoint.bin");
}

void Trainer::open_metrics(bool append) {
  std::filesystem::create_directories(cfg_.out_dir);
  metrics_.open(cfg_.out_dir + "/metrics.jsonl", append);
}

void Trainer::run() {
  if (!metrics_.is_open()) open_metrics(resumed_);
  if (!resumed_) {
    std::ofstream cfg_out(cfg_.out_dir + "/config.json");
    cfg_out << cfg_.to_json_text() << "\n";
  }
  while (true) {
    collect_round();
    if (cycle_hl_transitions_ >= cfg_.budgets.cycle_size) end_cycle();
    if (env_steps_ >= cfg_.train.max_env_steps) break;
    if (cfg_.train.max_cycles > 0 && cycle_ >= cfg_.train.max_cycles) break;
    if (mastery_hl_steps_ && post_mastery_evals_done_ >= cfg_.train.post_mastery_evals) break;
  }
  save_checkpoint(cfg_.out_dir + "/checkpoint.bin");
  metrics_.flush();
}

EvalReport Trainer::evaluate() {
  EvalReport rep;
  rep.step = hl_steps_;
  rep.env_steps = env_steps_;
  rep.cycle = cycle_;
  rep.goals = train_goals_;
  ++eval_counter_;

  struct Task {
    GoalId goal;
    int seed_index;
  };
  std::vector<Task> tasks;
  for (GoalId g : train_goals_)
    for (int i = 0; i < cfg_.eval.seeds; ++i) tasks.push_back({g, i});
  std::vector<char> success(tasks.size(), 0);
  std::vector<int> hl_calls(tasks.size(), 0);

  auto run_task = [&](size_t t) {
    AttemptResult r = eval_attempt(tasks[t].seed_index, tasks[t].goal, "");
    success[t] = r.success ? 1 : 0;
    hl_calls[t] = r.hl_steps;
  };
  unsigned workers = std::min<unsigned>(std::thread::hardware_concurrency(),
                                        static_cast<unsigned>(cfg_.budgets.envs_parallel));
  if (workers <= 1 || tasks.size() < 2) {
    for (size_t t = 0; t < tasks.size(); ++t) run_task(t);
  } else {
    std::atomic<size_t> next{0};
    auto loop = [&]() {
      for (size_t t = next.fetch_add(1); t < tasks.size(); t = next.fetch_add(1)) run_task(t);
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(loop);
    for (auto& th : pool) th.join();
  }

  for (size_t gi = 0; gi < train_goals_.size(); ++gi) {
    int ok = 0, calls = 0;
    for (size_t t = 0; t < tasks.size(); ++t) {
      if (tasks[t].goal != train_goals_[gi]) continue;
      ok += success[t];
      if (success[t]) calls += hl_calls[t];
    }
    double sr = static_cast<double>(ok) / cfg_.eval.seeds;
    rep.success_rate.push_back(sr);
    rep.mean_hl_calls_success.push_back(ok > 0 ? static_cast<double>(calls) / ok : 0.0);
  }
  std::vector<double> pct;
  for (double sr : rep.success_rate) pct.push_back(100.0 * sr);
  rep.crafter = crafter_score(pct);
  return rep;
}

AttemptResult Trainer::eval_attempt(int world_index, GoalId goal,
                                    const std::string& text_override) {
  EnvSlot env;
  env.index = -1;
  env.state = generate_world(
      derive_seed(cfg_.master_seed, "eval_world", static_cast<uint64_t>(world_index)),
      cfg_.env.side, cfg_.env.gen);
  env.verifiers = std::make_unique<VerifierBank>(&catalog_);
  env.rng = Rng(derive_seed(cfg_.master_seed, "eval_rng",
                            (static_cast<uint64_t>(eval_counter_) << 40) ^
                                (static_cast<uint64_t>(goal) << 20) ^
                                static_cast<uint64_t>(world_index)));
  std::vector<int> tokens =
      text_override.empty() ? goal_tokens(goal) : vocab_.tokenize(text_override);
  return run_goal_attempt(env, goal, tokens, eval_params());
}

Trainer::SuiteResult Trainer::synonym_suite(int runs_per_reformulation) {
  SuiteResult out;
  for (GoalId id : train_goals_) {
    const Goal& g = catalog_.goal(id);
    std::vector<std::string> forms = expand_synonyms(g, lexicon_);
    if (forms.empty()) continue;
    std::vector<double> srs;
    for (const auto& text : forms) {
      int ok = 0;
      for (int i = 0; i < runs_per_reformulation; ++i)
        if (eval_attempt(i, id, text).success) ++ok;
      srs.push_back(100.0 * ok / runs_per_reformulation);
      out.labels.push_back(text);
    }
    out.group_sr_percent.push_back(std::move(srs));
  }
  if (!out.group_sr_percent.empty()) out.score = synonym_score(out.group_sr_percent);
  return out;
}

Trainer::SuiteResult Trainer::compositional_suite(int n, int runs_per_goal) {
  SuiteResult out;
  for (GoalId id : train_goals_) {
    const Goal& g = catalog_.goal(id);
    if (g.verb == "go" || g.kind != GoalKind::achievement) continue;  // excluded by protocol
    Goal comp = make_n_compositional(catalog_, g, n);
    const Goal* existing = catalog_.find_text(comp.text);
    GoalId cid = existing ? existing->id : register_eval_goal(comp);
    int ok = 0;
    for (int i = 0; i < runs_per_goal; ++i)
      if (eval_attempt(i, cid, "").success) ++ok;
    out.labels.push_back(comp.text);
    out.group_sr_percent.push_back({100.0 * ok / runs_per_goal});
  }
  std::vector<double> flat;
  for (const auto& g : out.group_sr_percent) flat.push_back(g[0]);
  if (!flat.empty()) out.score = crafter_score(flat);
  return out;
}

GoalId Trainer::register_eval_goal(const Goal& g) {
  GoalId id = catalog_.add_goal(g);
  token_cache_.push_back(vocab_.tokenize(catalog_.goal(id).text));
  if (!cfg_.train.flat_baseline) bank_->ensure_policy(id);
  return id;
}

}  // namespace craftrl
