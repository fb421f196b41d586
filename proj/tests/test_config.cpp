#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "craftrl/config.hpp"

using namespace craftrl;

TEST_CASE("defaults carry the published hyper-parameters") {
  RunConfig c;
  CHECK(c.hl.lr == doctest::Approx(1e-5));
  CHECK(c.ll.lr == doctest::Approx(1e-4));
  CHECK(c.competence.lr == doctest::Approx(1e-4));
  CHECK(c.hl.gamma == doctest::Approx(0.95));
  CHECK(c.hl.lambda == doctest::Approx(0.9));
  CHECK(c.hl.entropy_coef == doctest::Approx(0.01));
  CHECK(c.hl.beta_kl == doctest::Approx(0.1));
  CHECK(c.hl.epochs == 4);
  CHECK(c.budgets.cycle_size == 2496);
  CHECK(c.ll.buffer_capacity == 100000);
  CHECK(c.ll.update_every == 2496);
  CHECK(c.budgets.n_hl == 64);
  CHECK(c.budgets.n_ll == 128);
  CHECK(c.budgets.episode_cap == 155);
  CHECK(c.competence.update_every == 256);
  CHECK(c.competence.samples_per_execution == 12);
  CHECK(c.sampler.update_every == 128);
  CHECK(c.sampler.entries_per_trajectory == 6);
  CHECK(c.sampler.eps_decay_rate == doctest::Approx(3.34));
  CHECK(c.sampler.ring_size == 3);
  CHECK(c.skillspace.eps_cap == doctest::Approx(0.1));
  CHECK(c.tracker_window == 5);
  CHECK(c.eval.seeds == 40);
}

TEST_CASE("config round-trips through its canonical json") {
  RunConfig c;
  c.master_seed = 1234;
  c.goal_subset = {"go to tree", "collect wood", "place table"};
  c.apply_desk_scale();
  std::string text = c.to_json_text();
  RunConfig back = RunConfig::from_json_text(text);
  CHECK(back.to_json_text() == text);
  CHECK(back.hash() == c.hash());
  CHECK(back.env.side == c.env.side);
  CHECK(back.ll.conv_channels == c.ll.conv_channels);
}

TEST_CASE("unknown keys are rejected with a path diagnostic") {
  std::string bad = R"({"hl": {"lr": 1e-4, "warmup": 10}})";
  try {
    RunConfig::from_json_text(bad);
    FAIL("expected rejection");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("hl.warmup") != std::string::npos);
  }
  CHECK_THROWS_AS(RunConfig::from_json_text(R"({"mystery": 1})"), std::invalid_argument);
}

TEST_CASE("range violations name the offending field") {
  try {
    RunConfig::from_json_text(R"({"env": {"side": 3}})");
    FAIL("expected rejection");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("env.side") != std::string::npos);
  }
  CHECK_THROWS(RunConfig::from_json_text(R"({"hl": {"clip": 1.5}})"));
  CHECK_THROWS(RunConfig::from_json_text(R"({"ll": {"conv_channels": [1, 2]}})"));
  CHECK_THROWS(RunConfig::from_json_text(R"({"goal_subset": ["fly to moon"]})"));
  CHECK_THROWS(RunConfig::from_json_text(R"({"goal_subset": ["noop"]})"));
  CHECK_THROWS(RunConfig::from_json_text("not json"));
}

TEST_CASE("config file loading") {
  RunConfig c;
  c.master_seed = 7;
  std::string path = (std::filesystem::temp_directory_path() / "craftrl_cfg.json").string();
  {
    std::ofstream out(path);
    out << c.to_json_text();
  }
  RunConfig back = RunConfig::load_file(path);
  CHECK(back.hash() == c.hash());
  CHECK_THROWS(RunConfig::load_file("/nonexistent/path.json"));
}
