#include "craftrl/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "craftrl/rng.hpp"

namespace craftrl {

using ordered_json = nlohmann::ordered_json;

namespace {

void check_keys(const ordered_json& j, const std::set<std::string>& allowed,
                const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument("config: " + where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::invalid_argument("config: unknown key '" + where + "." + it.key() + "'");
}

template <typename T>
void get_to(const ordered_json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

void require_range(bool ok, const std::string& field, const std::string& rule) {
  if (!ok) throw std::invalid_argument("config: field '" + field + "' violates: " + rule);
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("config: JSON parse error: ") + e.what());
  }
  RunConfig c;
  check_keys(j, {"master_seed", "out_dir", "env", "budgets", "goal_subset", "hl", "ll",
                 "competence", "skillspace", "tracker_window", "sampler", "eval", "train"},
             "root");
  get_to(j, "master_seed", c.master_seed);
  get_to(j, "out_dir", c.out_dir);
  get_to(j, "goal_subset", c.goal_subset);
  get_to(j, "tracker_window", c.tracker_window);

  if (j.contains("env")) {
    const auto& e = j["env"];
    check_keys(e,
               {"side", "view", "tree_density", "water_density", "sand_density", "bush_density",
                "path_density", "stone_density", "coal_fraction", "iron_fraction", "min_trees",
                "min_stones", "min_coals"},
               "env");
    get_to(e, "side", c.env.side);
    get_to(e, "view", c.env.view);
    get_to(e, "tree_density", c.env.gen.tree_density);
    get_to(e, "water_density", c.env.gen.water_density);
    get_to(e, "sand_density", c.env.gen.sand_density);
    get_to(e, "bush_density", c.env.gen.bush_density);
    get_to(e, "path_density", c.env.gen.path_density);
    get_to(e, "stone_density", c.env.gen.stone_density);
    get_to(e, "coal_fraction", c.env.gen.coal_fraction);
    get_to(e, "iron_fraction", c.env.gen.iron_fraction);
    get_to(e, "min_trees", c.env.gen.min_trees);
    get_to(e, "min_stones", c.env.gen.min_stones);
    get_to(e, "min_coals", c.env.gen.min_coals);
  }
  if (j.contains("budgets")) {
    const auto& b = j["budgets"];
    check_keys(b, {"n_hl", "n_ll", "episode_cap", "envs_parallel", "cycle_size"}, "budgets");
    get_to(b, "n_hl", c.budgets.n_hl);
    get_to(b, "n_ll", c.budgets.n_ll);
    get_to(b, "episode_cap", c.budgets.episode_cap);
    get_to(b, "envs_parallel", c.budgets.envs_parallel);
    get_to(b, "cycle_size", c.budgets.cycle_size);
  }
  if (j.contains("hl")) {
    const auto& h = j["hl"];
    check_keys(h,
               {"lr", "gamma", "lambda", "clip", "entropy_coef", "beta_kl", "value_coef",
                "epochs", "minibatches", "adv_norm", "context_width", "token_emb", "head_hidden",
                "value_width", "max_skill_tokens", "init_scale"},
               "hl");
    get_to(h, "lr", c.hl.lr);
    get_to(h, "gamma", c.hl.gamma);
    get_to(h, "lambda", c.hl.lambda);
    get_to(h, "clip", c.hl.clip);
    get_to(h, "entropy_coef", c.hl.entropy_coef);
    get_to(h, "beta_kl", c.hl.beta_kl);
    get_to(h, "value_coef", c.hl.value_coef);
    get_to(h, "epochs", c.hl.epochs);
    get_to(h, "minibatches", c.hl.minibatches);
    get_to(h, "adv_norm", c.hl.adv_norm);
    get_to(h, "context_width", c.hl.context_width);
    get_to(h, "token_emb", c.hl.token_emb);
    get_to(h, "head_hidden", c.hl.head_hidden);
    get_to(h, "value_width", c.hl.value_width);
    get_to(h, "max_skill_tokens", c.hl.max_skill_tokens);
    get_to(h, "init_scale", c.hl.init_scale);
  }
  if (j.contains("ll")) {
    const auto& l = j["ll"];
    check_keys(l,
               {"lr", "gamma", "beta_awr", "weight_clip", "value_coef", "buffer_capacity",
                "update_every", "batches_per_update", "batch_size", "conv_channels", "fc",
                "activation", "init_scale"},
               "ll");
    get_to(l, "lr", c.ll.lr);
    get_to(l, "gamma", c.ll.gamma);
    get_to(l, "beta_awr", c.ll.beta_awr);
    get_to(l, "weight_clip", c.ll.weight_clip);
    get_to(l, "value_coef", c.ll.value_coef);
    get_to(l, "buffer_capacity", c.ll.buffer_capacity);
    get_to(l, "update_every", c.ll.update_every);
    get_to(l, "batches_per_update", c.ll.batches_per_update);
    get_to(l, "batch_size", c.ll.batch_size);
    get_to(l, "conv_channels", c.ll.conv_channels);
    get_to(l, "fc", c.ll.fc);
    get_to(l, "activation", c.ll.activation);
    get_to(l, "init_scale", c.ll.init_scale);
  }
  if (j.contains("competence")) {
    const auto& m = j["competence"];
    check_keys(m,
               {"lr", "update_every", "epochs", "buffer_cycles", "samples_per_execution",
                "hidden1", "hidden2", "batch_size", "init_scale"},
               "competence");
    get_to(m, "lr", c.competence.lr);
    get_to(m, "update_every", c.competence.update_every);
    get_to(m, "epochs", c.competence.epochs);
    get_to(m, "buffer_cycles", c.competence.buffer_cycles);
    get_to(m, "samples_per_execution", c.competence.samples_per_execution);
    get_to(m, "hidden1", c.competence.hidden1);
    get_to(m, "hidden2", c.competence.hidden2);
    get_to(m, "batch_size", c.competence.batch_size);
    get_to(m, "init_scale", c.competence.init_scale);
  }
  if (j.contains("skillspace")) {
    const auto& s = j["skillspace"];
    check_keys(s, {"eps_cap"}, "skillspace");
    get_to(s, "eps_cap", c.skillspace.eps_cap);
  }
  if (j.contains("sampler")) {
    const auto& s = j["sampler"];
    check_keys(s,
               {"entries_per_trajectory", "update_every", "ring_size", "buffer_cycles", "eps0",
                "eps_decay_rate", "eps_horizon_entries"},
               "sampler");
    get_to(s, "entries_per_trajectory", c.sampler.entries_per_trajectory);
    get_to(s, "update_every", c.sampler.update_every);
    get_to(s, "ring_size", c.sampler.ring_size);
    get_to(s, "buffer_cycles", c.sampler.buffer_cycles);
    get_to(s, "eps0", c.sampler.eps0);
    get_to(s, "eps_decay_rate", c.sampler.eps_decay_rate);
    get_to(s, "eps_horizon_entries", c.sampler.eps_horizon_entries);
  }
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    check_keys(e, {"every_cycles", "seeds", "greedy", "n_hl", "n_ll"}, "eval");
    get_to(e, "every_cycles", c.eval.every_cycles);
    get_to(e, "seeds", c.eval.seeds);
    get_to(e, "greedy", c.eval.greedy);
    get_to(e, "n_hl", c.eval.n_hl);
    get_to(e, "n_ll", c.eval.n_ll);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    check_keys(t,
               {"max_env_steps", "max_cycles", "flat_baseline", "store_failed_compiled",
                "checkpoint_every_cycles", "checkpoint_full_state", "stop_on_mastery_goal",
                "mastery_threshold", "post_mastery_evals", "log_skillspace_draws"},
               "train");
    get_to(t, "max_env_steps", c.train.max_env_steps);
    get_to(t, "max_cycles", c.train.max_cycles);
    get_to(t, "flat_baseline", c.train.flat_baseline);
    get_to(t, "store_failed_compiled", c.train.store_failed_compiled);
    get_to(t, "checkpoint_every_cycles", c.train.checkpoint_every_cycles);
    get_to(t, "checkpoint_full_state", c.train.checkpoint_full_state);
    get_to(t, "stop_on_mastery_goal", c.train.stop_on_mastery_goal);
    get_to(t, "mastery_threshold", c.train.mastery_threshold);
    get_to(t, "post_mastery_evals", c.train.post_mastery_evals);
    get_to(t, "log_skillspace_draws", c.train.log_skillspace_draws);
  }
  c.skillspace.flat_baseline = c.train.flat_baseline;
  c.validate();
  return c;
}

RunConfig RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string RunConfig::to_json_text() const {
  ordered_json j;
  j["master_seed"] = master_seed;
  j["out_dir"] = out_dir;
  j["env"] = {{"side", env.side},
              {"view", env.view},
              {"tree_density", env.gen.tree_density},
              {"water_density", env.gen.water_density},
              {"sand_density", env.gen.sand_density},
              {"bush_density", env.gen.bush_density},
              {"path_density", env.gen.path_density},
              {"stone_density", env.gen.stone_density},
              {"coal_fraction", env.gen.coal_fraction},
              {"iron_fraction", env.gen.iron_fraction},
              {"min_trees", env.gen.min_trees},
              {"min_stones", env.gen.min_stones},
              {"min_coals", env.gen.min_coals}};
  j["budgets"] = {{"n_hl", budgets.n_hl},
                  {"n_ll", budgets.n_ll},
                  {"episode_cap", budgets.episode_cap},
                  {"envs_parallel", budgets.envs_parallel},
                  {"cycle_size", budgets.cycle_size}};
  j["goal_subset"] = goal_subset;
  j["hl"] = {{"lr", hl.lr},
             {"gamma", hl.gamma},
             {"lambda", hl.lambda},
             {"clip", hl.clip},
             {"entropy_coef", hl.entropy_coef},
             {"beta_kl", hl.beta_kl},
             {"value_coef", hl.value_coef},
             {"epochs", hl.epochs},
             {"minibatches", hl.minibatches},
             {"adv_norm", hl.adv_norm},
             {"context_width", hl.context_width},
             {"token_emb", hl.token_emb},
             {"head_hidden", hl.head_hidden},
             {"value_width", hl.value_width},
             {"max_skill_tokens", hl.max_skill_tokens},
             {"init_scale", hl.init_scale}};
  j["ll"] = {{"lr", ll.lr},
             {"gamma", ll.gamma},
             {"beta_awr", ll.beta_awr},
             {"weight_clip", ll.weight_clip},
             {"value_coef", ll.value_coef},
             {"buffer_capacity", ll.buffer_capacity},
             {"update_every", ll.update_every},
             {"batches_per_update", ll.batches_per_update},
             {"batch_size", ll.batch_size},
             {"conv_channels", ll.conv_channels},
             {"fc", ll.fc},
             {"activation", ll.activation},
             {"init_scale", ll.init_scale}};
  j["competence"] = {{"lr", competence.lr},
                     {"update_every", competence.update_every},
                     {"epochs", competence.epochs},
                     {"buffer_cycles", competence.buffer_cycles},
                     {"samples_per_execution", competence.samples_per_execution},
                     {"hidden1", competence.hidden1},
                     {"hidden2", competence.hidden2},
                     {"batch_size", competence.batch_size},
                     {"init_scale", competence.init_scale}};
  j["skillspace"] = {{"eps_cap", skillspace.eps_cap}};
  j["tracker_window"] = tracker_window;
  j["sampler"] = {{"entries_per_trajectory", sampler.entries_per_trajectory},
                  {"update_every", sampler.update_every},
                  {"ring_size", sampler.ring_size},
                  {"buffer_cycles", sampler.buffer_cycles},
                  {"eps0", sampler.eps0},
                  {"eps_decay_rate", sampler.eps_decay_rate},
                  {"eps_horizon_entries", sampler.eps_horizon_entries}};
  j["eval"] = {{"every_cycles", eval.every_cycles},
               {"seeds", eval.seeds},
               {"greedy", eval.greedy},
               {"n_hl", eval.n_hl},
               {"n_ll", eval.n_ll}};
  j["train"] = {{"max_env_steps", train.max_env_steps},
                {"max_cycles", train.max_cycles},
                {"flat_baseline", train.flat_baseline},
                {"store_failed_compiled", train.store_failed_compiled},
                {"checkpoint_every_cycles", train.checkpoint_every_cycles},
                {"checkpoint_full_state", train.checkpoint_full_state},
                {"stop_on_mastery_goal", train.stop_on_mastery_goal},
                {"mastery_threshold", train.mastery_threshold},
                {"post_mastery_evals", train.post_mastery_evals},
                {"log_skillspace_draws", train.log_skillspace_draws}};
  return j.dump(2);
}

uint64_t RunConfig::hash() const { return fnv1a64(to_json_text()); }

void RunConfig::validate() const {
  require_range(env.side >= 7, "env.side", ">= 7");
  require_range(env.view >= 3 && env.view % 2 == 1 && env.view <= 2 * env.side + 1, "env.view",
                "odd and >= 3");
  require_range(budgets.n_hl > 0, "budgets.n_hl", "> 0");
  require_range(budgets.n_ll > 0, "budgets.n_ll", "> 0");
  require_range(budgets.episode_cap > 0, "budgets.episode_cap", "> 0");
  require_range(budgets.envs_parallel > 0, "budgets.envs_parallel", "> 0");
  require_range(budgets.cycle_size > 0, "budgets.cycle_size", "> 0");
  require_range(hl.lr > 0 && ll.lr > 0 && competence.lr > 0, "lr", "> 0");
  require_range(hl.gamma > 0 && hl.gamma <= 1, "hl.gamma", "(0,1]");
  require_range(hl.lambda >= 0 && hl.lambda <= 1, "hl.lambda", "[0,1]");
  require_range(hl.clip > 0 && hl.clip < 1, "hl.clip", "(0,1)");
  require_range(hl.epochs > 0 && hl.minibatches > 0, "hl.epochs/minibatches", "> 0");
  require_range(ll.gamma > 0 && ll.gamma <= 1, "ll.gamma", "(0,1]");
  require_range(ll.beta_awr > 0, "ll.beta_awr", "> 0");
  require_range(ll.weight_clip >= 1, "ll.weight_clip", ">= 1");
  require_range(ll.buffer_capacity > 0, "ll.buffer_capacity", "> 0");
  require_range(ll.conv_channels.size() == 3, "ll.conv_channels", "exactly 3 widths");
  require_range(ll.fc.size() == 2, "ll.fc", "exactly 2 widths");
  require_range(competence.update_every > 0, "competence.update_every", "> 0");
  require_range(competence.buffer_cycles > 0, "competence.buffer_cycles", "> 0");
  require_range(competence.samples_per_execution > 0, "competence.samples_per_execution", "> 0");
  require_range(skillspace.eps_cap >= 0 && skillspace.eps_cap <= 1, "skillspace.eps_cap",
                "[0,1]");
  require_range(tracker_window > 0, "tracker_window", "> 0");
  require_range(sampler.entries_per_trajectory > 0, "sampler.entries_per_trajectory", "> 0");
  require_range(sampler.update_every > 0, "sampler.update_every", "> 0");
  require_range(sampler.ring_size >= 2, "sampler.ring_size", ">= 2");
  require_range(sampler.eps0 >= 0 && sampler.eps0 <= 1, "sampler.eps0", "[0,1]");
  require_range(sampler.eps_horizon_entries > 0, "sampler.eps_horizon_entries", "> 0");
  require_range(eval.seeds > 0, "eval.seeds", "> 0");
  require_range(eval.every_cycles > 0, "eval.every_cycles", "> 0");
  require_range(eval.n_hl >= 0 && eval.n_ll >= 0, "eval.n_hl/n_ll", ">= 0");
  require_range(train.mastery_threshold > 0 && train.mastery_threshold <= 1,
                "train.mastery_threshold", "(0,1]");
  require_range(train.max_env_steps > 0 || train.max_cycles > 0, "train.max_env_steps",
                "a stop condition is required");
  const GoalCatalog catalog = GoalCatalog::builtin();
  for (const auto& g : goal_subset) {
    const Goal* found = catalog.find_text(g);
    if (!found || found->kind != GoalKind::achievement)
      throw std::invalid_argument("config: goal_subset entry '" + g +
                                  "' is not an achievement goal");
  }
}

void RunConfig::apply_desk_scale() {
  env.side = 9;
  env.view = 7;
  budgets.envs_parallel = 8;
  budgets.cycle_size = 512;
  hl.context_width = 96;
  hl.token_emb = 16;
  hl.head_hidden = 64;
  hl.value_width = 64;
  hl.lr = 1e-3;
  hl.min_batch = 0;
  ll.conv_channels = {8, 16, 16};
  ll.fc = {128, 64};
  ll.lr = 1e-3;
  ll.update_every = 512;
  ll.batches_per_update = 16;
  ll.batch_size = 128;
  ll.buffer_capacity = 30000;
  competence.hidden1 = 64;
  competence.hidden2 = 64;
  competence.lr = 1e-3;
  eval.seeds = 20;
}

}  // namespace craftrl
