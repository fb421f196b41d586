#include <doctest.h>

#include <sstream>

#include "craftrl/competence.hpp"

using namespace craftrl;

namespace {

struct Fixture {
  GoalCatalog catalog = GoalCatalog::builtin();
  Lexicon lex = Lexicon::builtin();
  Vocabulary vocab = Vocabulary::builtin(catalog, lex);
  Featurizer featurizer{&catalog, &vocab, 5};

  CompetenceConfig cfg() const {
    CompetenceConfig c;
    c.hidden1 = 32;
    c.hidden2 = 32;
    c.lr = 1e-2;
    c.update_every = 32;
    c.batch_size = 64;
    return c;
  }

  WorldState world(int variant = 0) const {
    WorldState w;
    w.side = 7;
    w.grid.assign(49, Tile::grass);
    w.ax = 2 + variant % 3;
    w.ay = 3;
    w.facing = Dir::up;
    w.set(3, 2, Tile::tree);
    return w;
  }
};

}  // namespace

TEST_CASE("elementary skills bypass the network with probability one") {
  Fixture fx;
  CompetenceEstimator est(&fx.featurizer, &fx.catalog, fx.cfg(), 1);
  WorldState w = fx.world();
  for (GoalId id : fx.catalog.elementary_ids()) {
    CHECK(est.estimate(w, id) == 1.0);
    CHECK(est.view().estimate(w, id) == 1.0);
  }
}

TEST_CASE("untrained estimates stay inside the open unit interval") {
  Fixture fx;
  CompetenceEstimator est(&fx.featurizer, &fx.catalog, fx.cfg(), 1);
  WorldState w = fx.world();
  for (GoalId id : fx.catalog.achievement_ids()) {
    double p = est.estimate(w, id);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
}

TEST_CASE("record_execution keeps the first states up to the augmentation cap") {
  Fixture fx;
  CompetenceEstimator est(&fx.featurizer, &fx.catalog, fx.cfg(), 1);
  GoalId wood = fx.catalog.find_text("collect wood")->id;
  std::vector<CompactObs> many(128, fx.featurizer.encode(fx.world()));
  est.record_execution(many, wood, true);
  CHECK(est.buffer_size() == 12);  // floor(0.1 * 128)
  std::vector<CompactObs> few(5, fx.featurizer.encode(fx.world()));
  est.record_execution(few, wood, false);
  CHECK(est.buffer_size() == 17);
  CHECK(est.new_samples() == 17);
}

TEST_CASE("training is gated on the new-sample count") {
  Fixture fx;
  CompetenceEstimator est(&fx.featurizer, &fx.catalog, fx.cfg(), 1);
  GoalId wood = fx.catalog.find_text("collect wood")->id;
  std::vector<CompactObs> states(10, fx.featurizer.encode(fx.world()));
  est.record_execution(states, wood, true);
  CHECK_FALSE(est.train_if_due());  // 10 < 32
  CHECK(est.version() == 0);
  for (int i = 0; i < 4; ++i) est.record_execution(states, wood, true);
  CHECK(est.train_if_due());
  CHECK(est.version() == 1);
  CHECK(est.new_samples() == 0);
}

TEST_CASE("published snapshots are immutable") {
  Fixture fx;
  CompetenceEstimator est(&fx.featurizer, &fx.catalog, fx.cfg(), 1);
  GoalId wood = fx.catalog.find_text("collect wood")->id;
  WorldState w = fx.world();
  CompetenceView snap = est.view();
  double before = snap.estimate(w, wood);
  std::vector<CompactObs> states(10, fx.featurizer.encode(w));
  for (int i = 0; i < 4; ++i) est.record_execution(states, wood, true);
  REQUIRE(est.train_if_due());
  CHECK(snap.estimate(w, wood) == before);    // old snapshot frozen
  CHECK(est.view().version > snap.version);   // new snapshot published
  CHECK(est.view().estimate(w, wood) != doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("balanced outcomes drive the estimate to one half") {
  Fixture fx;
  CompetenceEstimator est(&fx.featurizer, &fx.catalog, fx.cfg(), 3);
  GoalId wood = fx.catalog.find_text("collect wood")->id;
  WorldState w = fx.world();
  std::vector<CompactObs> one(1, fx.featurizer.encode(w));
  for (int i = 0; i < 100; ++i) est.record_execution(one, wood, i % 2 == 0);
  for (int i = 0; i < 300; ++i) est.force_train();
  CHECK(est.estimate(w, wood) == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("all-success training pushes held-in estimates up") {
  Fixture fx;
  CompetenceEstimator est(&fx.featurizer, &fx.catalog, fx.cfg(), 3);
  GoalId wood = fx.catalog.find_text("collect wood")->id;
  std::vector<CompactObs> states;
  for (int i = 0; i < 500; ++i) states.push_back(fx.featurizer.encode(fx.world(i)));
  // oracle: the empirical success mean of the training set is 1
  for (int i = 0; i < 50; ++i) {
    std::vector<CompactObs> chunk(states.begin() + i * 10, states.begin() + (i + 1) * 10);
    est.record_execution(chunk, wood, true);
  }
  for (int i = 0; i < 120; ++i) est.force_train();
  for (int v = 0; v < 3; ++v) CHECK(est.estimate(fx.world(v), wood) >= 0.9);
}

TEST_CASE("flipping every outcome moves the estimate upward") {
  Fixture fx;
  GoalId wood = fx.catalog.find_text("collect wood")->id;
  WorldState w = fx.world();

  CompetenceEstimator neg(&fx.featurizer, &fx.catalog, fx.cfg(), 5);
  std::vector<CompactObs> one(1, fx.featurizer.encode(w));
  for (int i = 0; i < 64; ++i) neg.record_execution(one, wood, false);
  for (int i = 0; i < 150; ++i) neg.force_train();
  double low = neg.estimate(w, wood);

  CompetenceEstimator pos(&fx.featurizer, &fx.catalog, fx.cfg(), 5);
  for (int i = 0; i < 64; ++i) pos.record_execution(one, wood, true);
  for (int i = 0; i < 150; ++i) pos.force_train();
  double high = pos.estimate(w, wood);

  CHECK(low < 0.2);
  CHECK(high > 0.8);
  CHECK(high > low);
}

TEST_CASE("samples older than the retention window are evicted") {
  Fixture fx;
  CompetenceConfig cfg = fx.cfg();
  cfg.buffer_cycles = 3;
  CompetenceEstimator est(&fx.featurizer, &fx.catalog, cfg, 1);
  GoalId wood = fx.catalog.find_text("collect wood")->id;
  std::vector<CompactObs> one(1, fx.featurizer.encode(fx.world()));
  est.record_execution(one, wood, true);  // cycle 0
  est.on_cycle_end();
  est.record_execution(one, wood, true);  // cycle 1
  est.on_cycle_end();
  est.record_execution(one, wood, true);  // cycle 2
  CHECK(est.buffer_size() == 3);
  est.on_cycle_end();  // cycle 0 falls out of the 3-cycle window
  CHECK(est.buffer_size() == 2);
  est.on_cycle_end();
  CHECK(est.buffer_size() == 1);
}

TEST_CASE("bce gradient matches finite differences on a probe network") {
  Fixture fx;
  CompetenceConfig cfg;
  cfg.hidden1 = 6;
  cfg.hidden2 = 4;
  Rng rng(17);
  CompetenceNet net;
  const int dim = 8;
  net.l1.init(cfg.hidden1, dim, nn::Act::tanh_fn, rng);
  net.l2.init(cfg.hidden2, cfg.hidden1, nn::Act::tanh_fn, rng);
  net.out.init(1, cfg.hidden2, nn::Act::identity, rng);

  nn::Matrix X(dim, 5), Y(1, 5);
  for (int i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-1, 1);
  for (int j = 0; j < 5; ++j) Y(0, j) = j % 2;

  auto loss = [&]() {
    nn::Matrix z = net.logits(X);
    double total = 0.0;
    for (int j = 0; j < 5; ++j) {
      double zj = z(0, j);
      // stable BCE on logits
      total += std::max(zj, 0.0) - zj * Y(0, j) + std::log1p(std::exp(-std::abs(zj)));
    }
    return total / 5.0;
  };

  auto ps = net.params();
  nn::zero_grads(ps);
  nn::Matrix h1 = net.l1.apply(X);
  nn::Matrix h2 = net.l2.apply(h1);
  nn::Matrix z = net.out.apply(h2);
  nn::Matrix p = (1.0 + (-z.array()).exp()).inverse().matrix();
  nn::Matrix dz = (p - Y) / 5.0;
  nn::Matrix dh2 = net.out.backward(dz, h2, z);
  nn::Matrix dh1 = net.l2.backward(dh2, h1, h2);
  net.l1.backward(dh1, X, h1);

  CHECK(nn::max_rel_grad_error(ps, loss, 1e-5) < 1e-4);
}

TEST_CASE("estimator serialization round-trips") {
  Fixture fx;
  CompetenceEstimator est(&fx.featurizer, &fx.catalog, fx.cfg(), 11);
  GoalId wood = fx.catalog.find_text("collect wood")->id;
  std::vector<CompactObs> states(10, fx.featurizer.encode(fx.world()));
  for (int i = 0; i < 4; ++i) est.record_execution(states, wood, true);
  est.train_if_due();

  std::ostringstream os;
  est.save(os);
  CompetenceEstimator back(&fx.featurizer, &fx.catalog, fx.cfg(), 11);
  std::istringstream is(os.str());
  back.load(is);
  CHECK(back.version() == est.version());
  CHECK(back.estimate(fx.world(), wood) == est.estimate(fx.world(), wood));
  CHECK(back.buffer_size() == est.buffer_size());
}
