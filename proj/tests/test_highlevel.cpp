#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "craftrl/highlevel.hpp"

using namespace craftrl;

namespace {

struct Fixture {
  GoalCatalog catalog = GoalCatalog::builtin();
  Lexicon lex = Lexicon::builtin();
  Vocabulary vocab = Vocabulary::builtin(catalog, lex);

  HLConfig cfg() const {
    HLConfig c;
    c.context_width = 24;
    c.token_emb = 8;
    c.head_hidden = 16;
    c.value_width = 16;
    c.lr = 1e-3;
    c.min_batch = 1;
    c.minibatches = 2;
    c.epochs = 2;
    return c;
  }

  std::vector<std::pair<GoalId, std::vector<int>>> admissible(
      const std::vector<std::string>& texts) const {
    std::vector<std::pair<GoalId, std::vector<int>>> out;
    for (const auto& t : texts) out.push_back({catalog.find_text(t)->id, vocab.tokenize(t)});
    return out;
  }

  FeatureVector features(int variant = 0) const {
    FeatureVector f = FeatureVector::Zero(20);
    f[variant % 20] = 1.0;
    f[19] = 0.5;
    return f;
  }
};

// enumerate all root-to-leaf paths of the trie and sum their probabilities
double total_path_probability(const HighLevelPolicy& policy, const FeatureVector& features,
                              const std::vector<std::pair<GoalId, std::vector<int>>>& adm) {
  SkillTrie trie;
  for (const auto& [id, toks] : adm) trie.insert(id, toks);
  FeatureVector ctx = policy.net().context(features);
  double total = 0.0;
  std::function<void(int, std::vector<int>, double)> walk = [&](int node, std::vector<int> prefix,
                                                                double logp) {
    if (trie.is_terminal(node)) {
      total += std::exp(logp);
      return;
    }
    std::vector<int> mask = trie.next_tokens(node);
    std::vector<double> lp =
        masked_log_softmax(policy.net().token_logits(ctx, prefix), mask);
    for (size_t i = 0; i < mask.size(); ++i) {
      auto next = prefix;
      next.push_back(mask[i]);
      walk(trie.child(node, mask[i]), std::move(next), logp + lp[i]);
    }
  };
  walk(trie.root(), {}, 0.0);
  return total;
}

}  // namespace

TEST_CASE("trie paths spell exactly the admissible skills") {
  Fixture fx;
  auto adm = fx.admissible({"collect wood", "place table", "make wood pickaxe", "go to tree",
                            "move up", "craft wood sword"});
  SkillTrie trie;
  for (const auto& [id, toks] : adm) trie.insert(id, toks);

  // walk every path; each leaf's skill must be an admissible one
  std::set<GoalId> found;
  std::function<void(int)> walk = [&](int node) {
    if (trie.is_terminal(node)) {
      found.insert(trie.skill_at(node));
      return;
    }
    for (int t : trie.next_tokens(node)) walk(trie.child(node, t));
  };
  walk(trie.root());
  CHECK(found.size() == adm.size());
  for (const auto& [id, _] : adm) CHECK(found.count(id) == 1);
}

TEST_CASE("decoding a singleton set is forced with log-probability zero") {
  Fixture fx;
  HighLevelPolicy policy(20, &fx.vocab, fx.cfg(), 1);
  Rng rng(2);
  auto adm = fx.admissible({"collect wood"});
  DecodeResult r = policy.decode(fx.features(), adm, rng, false);
  CHECK(r.skill == fx.catalog.find_text("collect wood")->id);
  CHECK(r.total_logprob == doctest::Approx(0.0));
  for (double lp : r.logprobs) CHECK(lp == doctest::Approx(0.0));
}

TEST_CASE("decoding never emits an inadmissible skill") {
  Fixture fx;
  HighLevelPolicy policy(20, &fx.vocab, fx.cfg(), 1);
  Rng rng(3);
  std::vector<std::string> pool = {"collect wood",      "place table", "go to tree",
                                   "make wood pickaxe", "move up",     "move down",
                                   "chop tree",         "noop",        "collect stone"};
  for (int trial = 0; trial < 1000; ++trial) {
    // random non-empty admissible subset
    std::vector<std::string> chosen;
    for (const auto& t : pool)
      if (rng.uniform() < 0.5) chosen.push_back(t);
    if (chosen.empty()) chosen.push_back(pool[rng.uniform_int(pool.size())]);
    auto adm = fx.admissible(chosen);
    DecodeResult r = policy.decode(fx.features(trial), adm, rng, false);
    bool ok = false;
    for (const auto& [id, _] : adm) ok |= id == r.skill;
    REQUIRE(ok);
    // factorization identity
    double sum = 0;
    for (double lp : r.logprobs) sum += lp;
    REQUIRE(r.total_logprob == doctest::Approx(sum));
  }
}

TEST_CASE("path probabilities over the trie sum to one") {
  Fixture fx;
  HighLevelPolicy policy(20, &fx.vocab, fx.cfg(), 5);
  auto adm = fx.admissible({"collect wood", "collect stone", "place table", "go to tree",
                            "go to table", "make wood pickaxe", "move up", "craft wood sword"});
  for (int v = 0; v < 5; ++v) {
    double total = total_path_probability(policy, fx.features(v), adm);
    CHECK(std::abs(total - 1.0) < 1e-6);
  }
}

TEST_CASE("gae with lambda=1 gamma=1 equals Monte-Carlo advantages") {
  HLTrajectory traj;
  std::vector<double> rewards = {0, 0, 1, 0, 1};
  std::vector<double> values = {0.3, 0.6, 0.2, 0.9, 0.4};
  for (size_t i = 0; i < rewards.size(); ++i) {
    HLStep s;
    s.reward = rewards[i];
    s.value_est = values[i];
    traj.steps.push_back(std::move(s));
  }
  traj.terminal = true;
  std::vector<double> adv = gae_advantages(traj, 1.0, 1.0);
  // oracle: brute-force Monte-Carlo returns minus values
  for (size_t i = 0; i < rewards.size(); ++i) {
    double ret = 0;
    for (size_t j = i; j < rewards.size(); ++j) ret += rewards[j];
    CHECK(adv[i] == doctest::Approx(ret - values[i]).epsilon(1e-12));
  }

  // truncated attempts bootstrap with the recorded final value
  HLTrajectory trunc = traj;
  trunc.terminal = false;
  trunc.final_value = 0.7;
  std::vector<double> adv2 = gae_advantages(trunc, 1.0, 1.0);
  for (size_t i = 0; i < rewards.size(); ++i) {
    double ret = 0.7;
    for (size_t j = i; j < rewards.size(); ++j) ret += rewards[j];
    CHECK(adv2[i] == doctest::Approx(ret - values[i]).epsilon(1e-12));
  }
}

TEST_CASE("value head is sigmoid-bounded and deterministic") {
  Fixture fx;
  HighLevelPolicy policy(20, &fx.vocab, fx.cfg(), 7);
  for (int v = 0; v < 10; ++v) {
    double a = policy.value(fx.features(v));
    CHECK(a > 0.0);
    CHECK(a < 1.0);
    CHECK(policy.value(fx.features(v)) == a);
  }
}

namespace {

HLTrajectory rollout_for_update(const Fixture& fx, HighLevelPolicy& policy, Rng& rng,
                                const std::vector<std::string>& texts, double reward_for,
                                GoalId rewarded) {
  HLTrajectory traj;
  auto adm = fx.admissible(texts);
  for (int k = 0; k < 6; ++k) {
    FeatureVector f = fx.features(k);
    DecodeResult d = policy.decode(f, adm, rng, false);
    HLStep s;
    s.features = f;
    s.tokens = d.tokens;
    s.behavior_logprobs = d.logprobs;
    s.masks = d.masks;
    double reward = d.skill == rewarded ? reward_for : 0.0;
    s.reward = reward;
    s.value_est = policy.value(f);
    traj.steps.push_back(std::move(s));
    if (reward > 0) break;
  }
  traj.terminal = !traj.steps.empty() && traj.steps.back().reward > 0;
  return traj;
}

}  // namespace

TEST_CASE("zero-advantage batches leave only entropy and KL gradients") {
  Fixture fx;
  HLConfig cfg = fx.cfg();
  cfg.gamma = 1.0;
  cfg.lambda = 1.0;
  cfg.adv_norm = false;
  HighLevelPolicy policy(20, &fx.vocab, cfg, 11);
  Rng rng(4);
  // zero rewards and zero value estimates give exactly zero advantages
  HLTrajectory traj;
  auto adm = fx.admissible({"collect wood", "move up", "place table"});
  for (int k = 0; k < 8; ++k) {
    FeatureVector f = fx.features(k);
    DecodeResult d = policy.decode(f, adm, rng, false);
    HLStep s;
    s.features = f;
    s.tokens = d.tokens;
    s.behavior_logprobs = d.logprobs;
    s.masks = d.masks;
    s.reward = 0.0;
    s.value_est = 0.0;
    traj.steps.push_back(std::move(s));
  }
  traj.terminal = true;
  PpoStats st = policy.ppo_update({traj});
  CHECK(st.updated);
  CHECK(st.policy_loss == doctest::Approx(0.0).epsilon(1e-12));  // surrogate vanishes
  CHECK(st.kl_ref >= 0.0);
  CHECK(std::isfinite(st.kl_ref));
}

TEST_CASE("ppo learns to pick the rewarded skill") {
  Fixture fx;
  HLConfig cfg = fx.cfg();
  cfg.lr = 5e-3;
  cfg.epochs = 4;
  HighLevelPolicy policy(20, &fx.vocab, cfg, 13);
  Rng rng(5);
  GoalId wood = fx.catalog.find_text("collect wood")->id;
  std::vector<std::string> texts = {"collect wood", "move up", "place table", "go to tree"};

  for (int round = 0; round < 30; ++round) {
    std::vector<HLTrajectory> batch;
    for (int b = 0; b < 8; ++b)
      batch.push_back(rollout_for_update(fx, policy, rng, texts, 1.0, wood));
    PpoStats st = policy.ppo_update(batch);
    CHECK(st.updated);
    CHECK(std::isfinite(st.kl_ref));
  }
  // greedy decoding now picks the rewarded skill
  auto adm = fx.admissible(texts);
  int picked = 0;
  for (int v = 0; v < 8; ++v) {
    DecodeResult d = policy.decode(fx.features(v), adm, rng, true);
    picked += d.skill == wood;
  }
  CHECK(picked >= 7);
}

TEST_CASE("single-token skills coincide with action-level ppo") {
  // with one-token names every skill emits exactly [word, EOS]? no: a
  // single-token skill here is one word + EOS, so the factorization has two
  // masked positions; the second is forced (EOS only) and contributes zero
  // log-probability, leaving the action-level term
  Fixture fx;
  HighLevelPolicy policy(20, &fx.vocab, fx.cfg(), 17);
  Rng rng(6);
  auto adm = fx.admissible({"noop"});
  DecodeResult d = policy.decode(fx.features(), adm, rng, false);
  CHECK(d.tokens.size() == 2);
  CHECK(d.logprobs.back() == doctest::Approx(0.0));
}

TEST_CASE("ppo loss gradients match finite differences on a probe network") {
  Fixture fx;
  HLConfig cfg;
  cfg.context_width = 6;
  cfg.token_emb = 4;
  cfg.head_hidden = 5;
  cfg.value_width = 4;
  cfg.min_batch = 1;
  HighLevelPolicy policy(8, &fx.vocab, cfg, 23);
  Rng rng(8);

  auto adm = fx.admissible({"collect wood", "place table", "move up"});
  std::vector<HLStep> steps;
  for (int k = 0; k < 3; ++k) {
    FeatureVector f = FeatureVector::Zero(8);
    f[k] = 1.0;
    DecodeResult d = policy.decode(f, adm, rng, false);
    HLStep s;
    s.features = f;
    s.tokens = d.tokens;
    // offset the behaviour log-probs so ratios sit away from clip kinks
    s.behavior_logprobs = d.logprobs;
    for (auto& lp : s.behavior_logprobs) lp -= 0.05;
    s.masks = d.masks;
    s.reward = k == 1 ? 1.0 : 0.0;
    s.value_est = 0.5;
    steps.push_back(std::move(s));
  }
  std::vector<HighLevelPolicy::MinibatchItem> items;
  items.push_back({&steps[0], 0.08, 0.3});
  items.push_back({&steps[1], -0.05, 0.9});
  items.push_back({&steps[2], 0.02, 0.1});

  auto params = policy.mutable_net().params();
  nn::zero_grads(params);
  policy.minibatch_backward(items, 1.0 / 3.0);
  auto loss = [&]() { return policy.minibatch_loss(items, 1.0 / 3.0); };
  CHECK(nn::max_rel_grad_error(params, loss, 1e-5) < 1e-4);
}

TEST_CASE("policy serialization round-trips and the reference stays frozen") {
  Fixture fx;
  HighLevelPolicy policy(20, &fx.vocab, fx.cfg(), 29);
  Rng rng(9);
  // one update to move the live net away from the reference
  std::vector<HLTrajectory> batch;
  GoalId wood = fx.catalog.find_text("collect wood")->id;
  for (int b = 0; b < 4; ++b)
    batch.push_back(
        rollout_for_update(fx, policy, rng, {"collect wood", "move up"}, 1.0, wood));
  policy.ppo_update(batch);
  CHECK_FALSE(policy.net().enc1.W == policy.reference().enc1.W);

  std::ostringstream os;
  policy.save(os);
  HighLevelPolicy back(20, &fx.vocab, fx.cfg(), 29);
  std::istringstream is(os.str());
  back.load(is);
  CHECK(back.net().enc1.W == policy.net().enc1.W);
  CHECK(back.reference().enc1.W == policy.reference().enc1.W);
}
