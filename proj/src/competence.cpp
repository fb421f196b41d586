#include "craftrl/competence.hpp"

#include <algorithm>
#include <cmath>

#include "craftrl/serialize.hpp"

namespace craftrl {

using nn::Matrix;

void CompetenceNet::init(int in_dim, const CompetenceConfig& cfg, Rng& rng) {
  l1.init(cfg.hidden1, in_dim, nn::Act::tanh_fn, rng, cfg.init_scale);
  l2.init(cfg.hidden2, cfg.hidden1, nn::Act::tanh_fn, rng, cfg.init_scale);
  out.init(1, cfg.hidden2, nn::Act::identity, rng, 0.01);
}

double CompetenceNet::logit(const FeatureVector& x) const {
  return out.apply(l2.apply(l1.apply(x)))(0, 0);
}

Matrix CompetenceNet::logits(const Matrix& X) const { return out.apply(l2.apply(l1.apply(X))); }

double CompetenceNet::prob(const FeatureVector& x) const {
  return 1.0 / (1.0 + std::exp(-logit(x)));
}

std::vector<nn::ParamRef> CompetenceNet::params() {
  std::vector<nn::ParamRef> ps;
  l1.collect(ps);
  l2.collect(ps);
  out.collect(ps);
  return ps;
}

void CompetenceNet::save(std::ostream& os) const {
  l1.save(os);
  l2.save(os);
  out.save(os);
}

void CompetenceNet::load(std::istream& is) {
  l1.load(is);
  l2.load(is);
  out.load(is);
}

double CompetenceView::estimate(const WorldState& s, GoalId skill) const {
  if (catalog->is_elementary(skill)) return 1.0;
  return estimate_features(featurizer->comp_features(s, skill));
}

double CompetenceView::estimate_features(const FeatureVector& f) const {
  return net->prob(f);
}

CompetenceEstimator::CompetenceEstimator(const Featurizer* featurizer, const GoalCatalog* catalog,
                                         CompetenceConfig cfg, uint64_t seed)
    : featurizer_(featurizer), catalog_(catalog), cfg_(cfg), rng_(seed) {
  net_.init(featurizer_->comp_dim(), cfg_, rng_);
  adam_.lr = cfg_.lr;
  publish();
  version_ = 0;  // initial snapshot is version 0
}

double CompetenceEstimator::estimate(const WorldState& s, GoalId skill) const {
  if (catalog_->is_elementary(skill)) return 1.0;
  return net_.prob(featurizer_->comp_features(s, skill));
}

CompetenceView CompetenceEstimator::view() const {
  return CompetenceView{published_, featurizer_, catalog_, version_};
}

void CompetenceEstimator::record_execution(const std::vector<CompactObs>& states, GoalId skill,
                                           bool outcome) {
  size_t n = std::min<size_t>(states.size(), static_cast<size_t>(cfg_.samples_per_execution));
  for (size_t i = 0; i < n; ++i) {
    buffer_.push_back({states[i], skill, outcome ? 1 : 0, cycle_});
    ++new_samples_;
  }
}

bool CompetenceEstimator::train_if_due() {
  if (new_samples_ < cfg_.update_every) return false;
  force_train();
  return true;
}

void CompetenceEstimator::force_train() {
  for (int e = 0; e < cfg_.epochs; ++e) train_pass();
  new_samples_ = 0;
  ++version_;
  publish();
}

void CompetenceEstimator::train_pass() {
  if (buffer_.empty()) return;
  std::vector<size_t> order(buffer_.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng_.shuffle(order);
  auto params = net_.params();
  const int in_dim = featurizer_->comp_dim();
  for (size_t start = 0; start < order.size(); start += cfg_.batch_size) {
    size_t bs = std::min<size_t>(cfg_.batch_size, order.size() - start);
    Matrix X(in_dim, bs), Y(1, bs);
    for (size_t j = 0; j < bs; ++j) {
      const auto& s = buffer_[order[start + j]];
      X.col(j) = featurizer_->comp_features(s.obs, s.skill);
      Y(0, j) = s.outcome;
    }
    // forward with caches
    Matrix h1 = net_.l1.apply(X);
    Matrix h2 = net_.l2.apply(h1);
    Matrix z = net_.out.apply(h2);
    // dL/dz for mean BCE over the batch: (sigmoid(z) - y) / bs
    Matrix p = (1.0 + (-z.array()).exp()).inverse().matrix();
    Matrix dz = (p - Y) / static_cast<double>(bs);
    nn::zero_grads(params);
    Matrix dh2 = net_.out.backward(dz, h2, z);
    Matrix dh1 = net_.l2.backward(dh2, h1, h2);
    net_.l1.backward(dh1, X, h1);
    adam_.step(params);
  }
}

void CompetenceEstimator::publish() {
  published_ = std::make_shared<const CompetenceNet>(net_);
}

void CompetenceEstimator::on_cycle_end() {
  ++cycle_;
  while (!buffer_.empty() && buffer_.front().cycle <= cycle_ - cfg_.buffer_cycles)
    buffer_.pop_front();
}

void CompetenceEstimator::save(std::ostream& os) const {
  net_.save(os);
  adam_.save(os);
  io::put_str(os, rng_.serialize());
  io::put_i64(os, new_samples_);
  io::put_i64(os, cycle_);
  io::put_i64(os, version_);
  io::put_u64(os, buffer_.size());
  for (const auto& s : buffer_) {
    save_compact_obs(os, s.obs);
    io::put_i64(os, s.skill);
    io::put_i64(os, s.outcome);
    io::put_i64(os, s.cycle);
  }
}

void CompetenceEstimator::load(std::istream& is) {
  net_.load(is);
  adam_.load(is);
  Rng r;
  r.deserialize(io::get_str(is));
  rng_ = r;
  new_samples_ = io::get_i64(is);
  cycle_ = io::get_i64(is);
  version_ = io::get_i64(is);
  uint64_t n = io::get_u64(is);
  buffer_.clear();
  for (uint64_t i = 0; i < n; ++i) {
    EstimatorSample s;
    s.obs = load_compact_obs(is);
    s.skill = static_cast<GoalId>(io::get_i64(is));
    s.outcome = static_cast<int>(io::get_i64(is));
    s.cycle = io::get_i64(is);
    buffer_.push_back(std::move(s));
  }
  publish();
}

}  // namespace craftrl
