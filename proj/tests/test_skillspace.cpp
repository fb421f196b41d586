#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "craftrl/skillspace.hpp"

using namespace craftrl;

namespace {

struct Fixture {
  GoalCatalog catalog = GoalCatalog::builtin();
  Lexicon lex = Lexicon::builtin();
  Vocabulary vocab = Vocabulary::builtin(catalog, lex);
  Featurizer featurizer{&catalog, &vocab, 5};

  WorldState world() const {
    WorldState w;
    w.side = 7;
    w.grid.assign(49, Tile::grass);
    w.ax = 3;
    w.ay = 3;
    w.set(3, 2, Tile::tree);
    return w;
  }
};

CompetenceConfig small_comp() {
  CompetenceConfig c;
  c.hidden1 = 16;
  c.hidden2 = 16;
  c.lr = 1e-2;
  return c;
}

}  // namespace

TEST_CASE("inclusion probability follows max(estimate, capped epsilon)") {
  CHECK(inclusion_probability(0.9, 1, 0.1) == doctest::Approx(0.9));
  CHECK(inclusion_probability(0.0, 3, 0.1) == doctest::Approx(0.1));  // min(3, 0.1)
  CHECK(inclusion_probability(0.0, 0, 0.1) == doctest::Approx(0.0));
  CHECK(inclusion_probability(0.3, 0, 0.1) == doctest::Approx(0.3));
  CHECK(inclusion_probability(0.05, 2, 0.1) == doctest::Approx(0.1));
}

TEST_CASE("empirical inclusion rate tracks p over ten thousand draws") {
  // Monte-Carlo fidelity across the estimate x epsilon grid
  Rng rng(123);
  for (double est : {0.0, 0.3, 0.9}) {
    for (int updates : {0, 3}) {
      double p = inclusion_probability(est, updates, 0.1);
      int64_t hits = 0;
      const int n = 10000;
      for (int i = 0; i < n; ++i) hits += rng.uniform() < p;
      CHECK(std::abs(static_cast<double>(hits) / n - p) <= 0.02);
    }
  }
}

TEST_CASE("update tracker counts within a sliding five-cycle window") {
  UpdateFrequencyTracker t(5);
  t.record_update(1);
  t.record_update(1);
  CHECK(t.count_in_window(1) == 2);
  CHECK(t.count_in_window(2) == 0);
  for (int c = 0; c < 4; ++c) t.on_cycle_end();
  CHECK(t.count_in_window(1) == 2);  // still inside the window
  t.on_cycle_end();
  CHECK(t.count_in_window(1) == 0);  // rotated out
}

TEST_CASE("admissible sets always contain the elementary skills") {
  Fixture fx;
  CompetenceEstimator est(&fx.featurizer, &fx.catalog, small_comp(), 1);
  UpdateFrequencyTracker tracker(5);
  SkillSpaceConfig cfg;
  Rng rng(7);
  WorldState w = fx.world();
  for (int i = 0; i < 50; ++i) {
    AdmissibleSet adm = build_admissible(w, fx.catalog, fx.catalog.achievement_ids(), est.view(),
                                         tracker, cfg, rng);
    for (GoalId id : fx.catalog.elementary_ids()) CHECK(adm.contains(id));
    // no duplicates
    std::set<GoalId> uniq(adm.skills.begin(), adm.skills.end());
    CHECK(uniq.size() == adm.skills.size());
    // recorded draws cover exactly the candidates
    CHECK(adm.draws.size() == fx.catalog.achievement_ids().size());
  }
}

TEST_CASE("determinism given state, snapshot, tracker and rng seed") {
  Fixture fx;
  CompetenceEstimator est(&fx.featurizer, &fx.catalog, small_comp(), 1);
  UpdateFrequencyTracker tracker(5);
  SkillSpaceConfig cfg;
  WorldState w = fx.world();
  Rng r1(42), r2(42);
  for (int i = 0; i < 20; ++i) {
    AdmissibleSet a = build_admissible(w, fx.catalog, fx.catalog.achievement_ids(), est.view(),
                                       tracker, cfg, r1);
    AdmissibleSet b = build_admissible(w, fx.catalog, fx.catalog.achievement_ids(), est.view(),
                                       tracker, cfg, r2);
    CHECK(a.skills == b.skills);
  }
}

TEST_CASE("flat baseline restricts the space to elementary actions") {
  Fixture fx;
  CompetenceEstimator est(&fx.featurizer, &fx.catalog, small_comp(), 1);
  UpdateFrequencyTracker tracker(5);
  SkillSpaceConfig cfg;
  cfg.flat_baseline = true;
  Rng rng(7);
  AdmissibleSet adm = build_admissible(fx.world(), fx.catalog, fx.catalog.achievement_ids(),
                                       est.view(), tracker, cfg, rng);
  CHECK(adm.skills.size() == 16);
  CHECK(adm.draws.empty());
  for (GoalId id : adm.skills) CHECK(fx.catalog.is_elementary(id));
}

TEST_CASE("end-to-end inclusion rate matches the recorded probability") {
  // train the estimator toward failure for one skill so its probability is
  // small, then compare the empirical inclusion rate with the recorded p
  Fixture fx;
  CompetenceEstimator est(&fx.featurizer, &fx.catalog, small_comp(), 3);
  GoalId wood = fx.catalog.find_text("collect wood")->id;
  WorldState w = fx.world();
  std::vector<CompactObs> one(1, fx.featurizer.encode(w));
  for (int i = 0; i < 64; ++i) est.record_execution(one, wood, false);
  for (int i = 0; i < 100; ++i) est.force_train();

  UpdateFrequencyTracker tracker(5);
  tracker.record_update(wood);  // epsilon floor 0.1 for this skill
  SkillSpaceConfig cfg;
  Rng rng(99);
  std::vector<GoalId> candidates = {wood};
  int64_t hits = 0;
  double recorded_p = -1;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    AdmissibleSet adm = build_admissible(w, fx.catalog, candidates, est.view(), tracker, cfg, rng);
    REQUIRE(adm.draws.size() == 1);
    recorded_p = adm.draws[0].p;
    hits += adm.draws[0].included;
  }
  CHECK(recorded_p == doctest::Approx(0.1));  // estimate below the epsilon floor
  CHECK(std::abs(static_cast<double>(hits) / n - recorded_p) <= 0.02);
}

TEST_CASE("tracker serialization round-trips") {
  UpdateFrequencyTracker t(5);
  t.record_update(3);
  t.on_cycle_end();
  t.record_update(3);
  t.record_update(7);
  std::ostringstream os;
  t.save(os);
  UpdateFrequencyTracker back(5);
  std::istringstream is(os.str());
  back.load(is);
  CHECK(back.count_in_window(3) == 2);
  CHECK(back.count_in_window(7) == 1);
  CHECK(back.window() == 5);
}
