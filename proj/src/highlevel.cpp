#include "craftrl/highlevel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "craftrl/serialize.hpp"

namespace craftrl {

using nn::Matrix;

// -------------------------------------------------------------------- trie

void SkillTrie::insert(GoalId skill, const std::vector<int>& tokens) {
  int node = 0;
  for (int t : tokens) {
    auto& ch = nodes_[static_cast<size_t>(node)].children;
    auto it = std::lower_bound(ch.begin(), ch.end(), t,
                               [](const auto& p, int tok) { return p.first < tok; });
    if (it == ch.end() || it->first != t) {
      nodes_.push_back({});
      it = nodes_[static_cast<size_t>(node)].children.insert(
          it, {t, static_cast<int>(nodes_.size() - 1)});
    }
    node = it->second;
  }
  nodes_[static_cast<size_t>(node)].skill = skill;
}

std::vector<int> SkillTrie::next_tokens(int node) const {
  std::vector<int> out;
  for (const auto& [tok, _] : nodes_[static_cast<size_t>(node)].children) out.push_back(tok);
  return out;
}

int SkillTrie::child(int node, int token) const {
  const auto& ch = nodes_[static_cast<size_t>(node)].children;
  auto it = std::lower_bound(ch.begin(), ch.end(), token,
                             [](const auto& p, int tok) { return p.first < tok; });
  return (it != ch.end() && it->first == token) ? it->second : -1;
}

// --------------------------------------------------------------------- net

void HLNet::init(int feat_dim, int vocab_size, const HLConfig& cfg, Rng& rng) {
  vocab = vocab_size;
  max_len = cfg.max_skill_tokens;
  enc1.init(cfg.context_width, feat_dim, nn::Act::tanh_fn, rng, cfg.init_scale);
  enc2.init(cfg.context_width, cfg.context_width, nn::Act::tanh_fn, rng, cfg.init_scale);
  emb.resize(cfg.token_emb, vocab_size);
  for (Eigen::Index i = 0; i < emb.size(); ++i)
    emb.data()[i] = rng.uniform(-0.5, 0.5) / std::sqrt(static_cast<double>(cfg.token_emb));
  gemb = Matrix::Zero(emb.rows(), emb.cols());
  int head_in = cfg.context_width + cfg.token_emb + max_len + 1;
  head1.init(cfg.head_hidden, head_in, nn::Act::tanh_fn, rng, cfg.init_scale);
  head_out.init(vocab_size, cfg.head_hidden, nn::Act::identity, rng, 0.01);
  v1.init(cfg.value_width, cfg.context_width, nn::Act::tanh_fn, rng, cfg.init_scale);
  v2.init(cfg.value_width, cfg.value_width, nn::Act::tanh_fn, rng, cfg.init_scale);
  vout.init(1, cfg.value_width, nn::Act::identity, rng, 0.01);
}

FeatureVector HLNet::context(const FeatureVector& features) const {
  return enc2.apply(enc1.apply(features));
}

static FeatureVector head_input(const HLNet& net, const FeatureVector& ctx,
                                const std::vector<int>& prefix) {
  FeatureVector u = FeatureVector::Zero(ctx.size() + net.emb.rows() + net.max_len + 1);
  u.head(ctx.size()) = ctx;
  for (int t : prefix) u.segment(ctx.size(), net.emb.rows()) += net.emb.col(t);
  int len = std::min<int>(static_cast<int>(prefix.size()), net.max_len);
  u[ctx.size() + net.emb.rows() + len] = 1.0;
  return u;
}

FeatureVector HLNet::token_logits(const FeatureVector& ctx, const std::vector<int>& prefix) const {
  return head_out.apply(head1.apply(head_input(*this, ctx, prefix)));
}

double HLNet::value(const FeatureVector& features) const {
  double z = vout.apply(v2.apply(v1.apply(context(features))))(0, 0);
  return 1.0 / (1.0 + std::exp(-z));
}

std::vector<nn::ParamRef> HLNet::params() {
  std::vector<nn::ParamRef> ps;
  enc1.collect(ps);
  enc2.collect(ps);
  ps.push_back({&emb, &gemb});
  head1.collect(ps);
  head_out.collect(ps);
  v1.collect(ps);
  v2.collect(ps);
  vout.collect(ps);
  return ps;
}

void HLNet::save(std::ostream& os) const {
  io::put_i64(os, vocab);
  io::put_i64(os, max_len);
  enc1.save(os);
  enc2.save(os);
  io::put_matrix(os, emb);
  head1.save(os);
  head_out.save(os);
  v1.save(os);
  v2.save(os);
  vout.save(os);
}

void HLNet::load(std::istream& is) {
  vocab = static_cast<int>(io::get_i64(is));
  max_len = static_cast<int>(io::get_i64(is));
  enc1.load(is);
  enc2.load(is);
  emb = io::get_matrix(is);
  gemb = Matrix::Zero(emb.rows(), emb.cols());
  head1.load(is);
  head_out.load(is);
  v1.load(is);
  v2.load(is);
  vout.load(is);
}

std::vector<double> masked_log_softmax(const FeatureVector& logits,
                                       const std::vector<int>& mask) {
  double mx = -1e300;
  for (int id : mask) mx = std::max(mx, logits[id]);
  double denom = 0.0;
  for (int id : mask) denom += std::exp(logits[id] - mx);
  double log_denom = std::log(denom);
  std::vector<double> out(mask.size());
  for (size_t i = 0; i < mask.size(); ++i) out[i] = logits[mask[i]] - mx - log_denom;
  return out;
}

// ------------------------------------------------------------------ policy

HighLevelPolicy::HighLevelPolicy(int feat_dim, const Vocabulary* vocab, HLConfig cfg,
                                 uint64_t seed)
    : vocab_(vocab), cfg_(cfg), train_rng_(derive_seed(seed, "hl_train")) {
  Rng rng(derive_seed(seed, "hl_init"));
  net_.init(feat_dim, vocab->size(), cfg_, rng);
  ref_ = net_;  // frozen copy of the initial parameters
  adam_.lr = cfg_.lr;
}

DecodeResult HighLevelPolicy::decode(
    const FeatureVector& features,
    const std::vector<std::pair<GoalId, std::vector<int>>>& admissible, Rng& rng,
    bool greedy) const {
  if (admissible.empty()) throw std::invalid_argument("decode: empty admissible set");
  SkillTrie trie;
  for (const auto& [id, toks] : admissible) trie.insert(id, toks);

  DecodeResult res;
  FeatureVector ctx = net_.context(features);
  int node = trie.root();
  while (!trie.is_terminal(node)) {
    std::vector<int> mask = trie.next_tokens(node);
    FeatureVector logits = net_.token_logits(ctx, res.tokens);
    std::vector<double> lp = masked_log_softmax(logits, mask);
    size_t pick = 0;
    if (greedy) {
      for (size_t i = 1; i < lp.size(); ++i)
        if (lp[i] > lp[pick]) pick = i;
    } else {
      double u = rng.uniform();
      double acc = 0.0;
      pick = lp.size() - 1;
      for (size_t i = 0; i < lp.size(); ++i) {
        acc += std::exp(lp[i]);
        if (u < acc) {
          pick = i;
          break;
        }
      }
    }
    res.masks.push_back(mask);
    res.logprobs.push_back(lp[pick]);
    res.total_logprob += lp[pick];
    res.tokens.push_back(mask[pick]);
    node = trie.child(node, mask[pick]);
    if (static_cast<int>(res.tokens.size()) > net_.max_len + 1)
      throw std::logic_error("decode: skill exceeds max token length");
  }
  res.skill = trie.skill_at(node);
  return res;
}

std::vector<double> gae_advantages(const HLTrajectory& traj, double gamma, double lambda) {
  const size_t n = traj.steps.size();
  std::vector<double> adv(n, 0.0);
  double next_value = traj.terminal ? 0.0 : traj.final_value;
  double gae = 0.0;
  for (size_t i = n; i-- > 0;) {
    const HLStep& s = traj.steps[i];
    double delta = s.reward + gamma * next_value - s.value_est;
    gae = delta + gamma * lambda * gae;
    adv[i] = gae;
    next_value = s.value_est;
  }
  return adv;
}

double HighLevelPolicy::minibatch_backward(const std::vector<MinibatchItem>& items, double inv_n,
                                           double* policy_sum, double* value_sum,
                                           double* entropy_sum, double* kl_sum,
                                           int64_t* token_count) {
  const int ctx_w = cfg_.context_width;
  double total = 0.0;
  for (const auto& item : items) {
    const HLStep& s = *item.step;
    FeatureVector h1 = net_.enc1.apply(s.features);
    FeatureVector ctx = net_.enc2.apply(h1);
    FeatureVector ref_ctx = ref_.context(s.features);
    FeatureVector d_ctx = FeatureVector::Zero(ctx_w);

    std::vector<int> prefix;
    for (size_t p = 0; p < s.tokens.size(); ++p) {
      const std::vector<int>& mask = s.masks[p];
      FeatureVector u = head_input(net_, ctx, prefix);
      FeatureVector hh = net_.head1.apply(u);
      FeatureVector logits = net_.head_out.apply(hh);
      std::vector<double> lp = masked_log_softmax(logits, mask);
      std::vector<double> ref_lp = masked_log_softmax(ref_.token_logits(ref_ctx, prefix), mask);

      size_t pick = mask.size();
      for (size_t i = 0; i < mask.size(); ++i)
        if (mask[i] == s.tokens[p]) pick = i;
      if (pick == mask.size())
        throw std::logic_error("ppo_update: recorded token missing from mask");

      double ratio = std::exp(lp[pick] - s.behavior_logprobs[p]);
      double surr1 = ratio * item.advantage;
      double clipped = std::clamp(ratio, 1.0 - cfg_.clip, 1.0 + cfg_.clip);
      double surr2 = clipped * item.advantage;
      bool unclipped_active = surr1 <= surr2;

      double entropy = 0.0, kl = 0.0;
      for (size_t i = 0; i < mask.size(); ++i) {
        double pi = std::exp(lp[i]);
        entropy -= pi * lp[i];
        kl += pi * (lp[i] - ref_lp[i]);
      }
      double tok_loss =
          -std::min(surr1, surr2) - cfg_.entropy_coef * entropy + cfg_.beta_kl * kl;
      total += tok_loss * inv_n;
      if (policy_sum) *policy_sum += -std::min(surr1, surr2);
      if (entropy_sum) *entropy_sum += entropy;
      if (kl_sum) *kl_sum += kl;
      if (token_count) ++*token_count;

      FeatureVector dz = FeatureVector::Zero(net_.vocab);
      double coef_logp = unclipped_active ? -item.advantage * ratio : 0.0;
      for (size_t i = 0; i < mask.size(); ++i) {
        double pi = std::exp(lp[i]);
        double g = 0.0;
        g += coef_logp * ((i == pick ? 1.0 : 0.0) - pi);
        g += cfg_.entropy_coef * pi * (lp[i] + entropy);
        g += cfg_.beta_kl * pi * ((lp[i] - ref_lp[i]) - kl);
        dz[mask[i]] = g * inv_n;
      }
      FeatureVector dhh = net_.head_out.backward(dz, hh, logits);
      FeatureVector du = net_.head1.backward(dhh, u, hh);
      d_ctx += du.head(ctx_w);
      FeatureVector d_embsum = du.segment(ctx_w, net_.emb.rows());
      for (int t : prefix) net_.gemb.col(t) += d_embsum;

      prefix.push_back(s.tokens[p]);
    }

    FeatureVector vh1 = net_.v1.apply(ctx);
    FeatureVector vh2 = net_.v2.apply(vh1);
    double vz = net_.vout.apply(vh2)(0, 0);
    double v = 1.0 / (1.0 + std::exp(-vz));
    double verr = (v - item.ret) * (v - item.ret);
    total += cfg_.value_coef * verr * inv_n;
    if (value_sum) *value_sum += verr;
    FeatureVector dvz(1);
    dvz[0] = cfg_.value_coef * 2.0 * (v - item.ret) * v * (1.0 - v) * inv_n;
    FeatureVector dvh2 = net_.vout.backward(dvz, vh2, FeatureVector::Constant(1, vz));
    FeatureVector dvh1 = net_.v2.backward(dvh2, vh1, vh2);
    d_ctx += net_.v1.backward(dvh1, ctx, vh1);

    FeatureVector dh1 = net_.enc2.backward(d_ctx, h1, ctx);
    net_.enc1.backward(dh1, s.features, h1);
  }
  return total;
}

double HighLevelPolicy::minibatch_loss(const std::vector<MinibatchItem>& items, double inv_n) {
  double total = 0.0;
  for (const auto& item : items) {
    const HLStep& s = *item.step;
    FeatureVector ctx = net_.context(s.features);
    FeatureVector ref_ctx = ref_.context(s.features);
    std::vector<int> prefix;
    for (size_t p = 0; p < s.tokens.size(); ++p) {
      const std::vector<int>& mask = s.masks[p];
      std::vector<double> lp = masked_log_softmax(net_.token_logits(ctx, prefix), mask);
      std::vector<double> ref_lp = masked_log_softmax(ref_.token_logits(ref_ctx, prefix), mask);
      size_t pick = mask.size();
      for (size_t i = 0; i < mask.size(); ++i)
        if (mask[i] == s.tokens[p]) pick = i;
      double ratio = std::exp(lp[pick] - s.behavior_logprobs[p]);
      double surr1 = ratio * item.advantage;
      double surr2 = std::clamp(ratio, 1.0 - cfg_.clip, 1.0 + cfg_.clip) * item.advantage;
      double entropy = 0.0, kl = 0.0;
      for (size_t i = 0; i < mask.size(); ++i) {
        double pi = std::exp(lp[i]);
        entropy -= pi * lp[i];
        kl += pi * (lp[i] - ref_lp[i]);
      }
      total += (-std::min(surr1, surr2) - cfg_.entropy_coef * entropy + cfg_.beta_kl * kl) * inv_n;
    }
    double v = net_.value(s.features);
    total += cfg_.value_coef * (v - item.ret) * (v - item.ret) * inv_n;
  }
  return total;
}

PpoStats HighLevelPolicy::ppo_update(const std::vector<HLTrajectory>& trajs) {
  PpoStats stats;
  std::vector<MinibatchItem> flat;
  for (const auto& tr : trajs) {
    std::vector<double> adv = gae_advantages(tr, cfg_.gamma, cfg_.lambda);
    for (size_t i = 0; i < tr.steps.size(); ++i)
      flat.push_back({&tr.steps[i], adv[i], adv[i] + tr.steps[i].value_est});
  }
  stats.transitions = static_cast<int64_t>(flat.size());
  if (flat.empty() || stats.transitions < cfg_.min_batch) return stats;

  if (cfg_.adv_norm) {
    double mean = 0.0, sq = 0.0;
    for (const auto& f : flat) mean += f.advantage;
    mean /= static_cast<double>(flat.size());
    for (const auto& f : flat) sq += (f.advantage - mean) * (f.advantage - mean);
    double sd = std::sqrt(sq / static_cast<double>(flat.size()));
    if (sd > 1e-8)
      for (auto& f : flat) f.advantage = (f.advantage - mean) / sd;
  }

  auto params = net_.params();
  int64_t token_total = 0;
  for (const auto& f : flat) token_total += static_cast<int64_t>(f.step->tokens.size());
  stats.mean_skill_len = static_cast<double>(token_total) / static_cast<double>(flat.size());

  std::vector<size_t> order(flat.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  double last_policy = 0.0, last_value = 0.0, last_entropy = 0.0, last_kl = 0.0;
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    train_rng_.shuffle(order);
    size_t mb_count = static_cast<size_t>(std::max(1, cfg_.minibatches));
    size_t mb_size = (order.size() + mb_count - 1) / mb_count;
    double ep_policy = 0.0, ep_value = 0.0, ep_entropy = 0.0, ep_kl = 0.0;
    int64_t ep_tokens = 0;
    for (size_t start = 0; start < order.size(); start += mb_size) {
      size_t end = std::min(order.size(), start + mb_size);
      std::vector<MinibatchItem> mb;
      mb.reserve(end - start);
      for (size_t oi = start; oi < end; ++oi) mb.push_back(flat[order[oi]]);
      nn::zero_grads(params);
      minibatch_backward(mb, 1.0 / static_cast<double>(mb.size()), &ep_policy, &ep_value,
                         &ep_entropy, &ep_kl, &ep_tokens);
      adam_.step(params);
    }
    last_policy = ep_policy / static_cast<double>(std::max<int64_t>(1, ep_tokens));
    last_value = ep_value / static_cast<double>(flat.size());
    last_entropy = ep_entropy / static_cast<double>(std::max<int64_t>(1, ep_tokens));
    last_kl = ep_kl / static_cast<double>(std::max<int64_t>(1, ep_tokens));
  }
  stats.policy_loss = last_policy;
  stats.value_loss = last_value;
  stats.entropy = last_entropy;
  stats.kl_ref = last_kl;
  stats.updated = true;
  return stats;
}

void HighLevelPolicy::save(std::ostream& os) const {
  net_.save(os);
  ref_.save(os);
  adam_.save(os);
  io::put_str(os, train_rng_.serialize());
}

void HighLevelPolicy::load(std::istream& is) {
  net_.load(is);
  ref_.load(is);
  adam_.load(is);
  Rng r;
  r.deserialize(io::get_str(is));
  train_rng_ = r;
}

}  // namespace craftrl
