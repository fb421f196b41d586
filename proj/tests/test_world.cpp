#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "craftrl/world.hpp"
#include "oracle_rules.hpp"

using namespace craftrl;

namespace {

// small hand-built world for rule and caption tests
WorldState fixture_world() {
  WorldState w;
  w.side = 7;
  w.grid.assign(49, Tile::grass);
  w.ax = 3;
  w.ay = 3;
  w.facing = Dir::up;
  w.set(3, 2, Tile::tree);   // north of agent
  w.set(5, 3, Tile::stone);
  w.set(5, 2, Tile::coal);
  w.set(1, 5, Tile::water);
  w.set(0, 0, Tile::tree);
  w.set(2, 3, Tile::sand);
  return w;
}

WorldState random_world(uint64_t seed) {
  WorldGenParams p;
  p.min_stones = 2;
  return generate_world(seed, 7, p);
}

}  // namespace

TEST_CASE("generation is deterministic and seed-sensitive") {
  WorldState a = generate_world(0, 32);
  WorldState b = generate_world(0, 32);
  CHECK(a == b);
  WorldState c = generate_world(1, 32);
  CHECK_FALSE(a.grid == c.grid);
}

TEST_CASE("generation guarantees resources on small worlds") {
  WorldState w = generate_world(5, 7, WorldGenParams{});
  int trees = 0;
  for (Tile t : w.grid) trees += t == Tile::tree;
  CHECK(trees >= 1);
  CHECK(tile_walkable(w.at(w.ax, w.ay)));
  CHECK_THROWS_AS(generate_world(0, 6), std::invalid_argument);
}

TEST_CASE("generation never spawns crafted tiles") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    WorldState w = generate_world(seed, 16);
    for (Tile t : w.grid) {
      CHECK(t != Tile::table);
      CHECK(t != Tile::furnace);
      CHECK(t != Tile::plant);
      CHECK(t != Tile::placed_stone);
    }
    CHECK(w.placements.empty());
  }
}

TEST_CASE("chop tree adds wood and fires collect wood") {
  WorldState w = fixture_world();
  auto ev = step(w, Action::chop_tree);
  CHECK(w.item(Item::wood) == 1);
  auto& f = ev.fired;
  CHECK(std::count(f.begin(), f.end(), static_cast<int>(Achievement::collect_wood)) == 1);
  // still facing the tree afterwards: go to tree fires as well
  CHECK(std::count(f.begin(), f.end(), static_cast<int>(Achievement::go_to_tree)) == 1);
  CHECK(w.at(3, 2) == Tile::tree);  // tree is a renewable source
}

TEST_CASE("place table consumes two wood and fires place table") {
  WorldState w = fixture_world();
  w.inventory[static_cast<size_t>(Item::wood)] = 2;
  w.facing = Dir::down;  // grass in front
  auto ev = step(w, Action::place_table);
  CHECK(w.item(Item::wood) == 0);
  CHECK(w.at(3, 4) == Tile::table);
  REQUIRE(w.placements.size() == 1);
  CHECK(w.placements[0].kind == Tile::table);
  auto& f = ev.fired;
  CHECK(std::count(f.begin(), f.end(), static_cast<int>(Achievement::place_table)) == 1);
  CHECK(std::count(f.begin(), f.end(), static_cast<int>(Achievement::go_to_table)) == 1);
}

TEST_CASE("unmet preconditions are no-ops apart from step counters") {
  WorldState w = fixture_world();
  w.inventory[static_cast<size_t>(Item::wood)] = 1;
  w.facing = Dir::down;
  WorldState before = w;
  auto ev = step(w, Action::place_table);
  CHECK(ev.fired.empty());
  CHECK(w.item(Item::wood) == 1);
  CHECK(w.grid == before.grid);
  CHECK(w.ll_step_count == before.ll_step_count + 1);

  // facing stone without a pickaxe
  w = fixture_world();
  w.facing = Dir::right;
  step(w, Action::move_right);  // walk next to the stone? stone blocks, so just face it
  w = fixture_world();
  w.ax = 4;
  w.facing = Dir::right;  // stone at (5,3)
  auto ev2 = step(w, Action::extract_stone);
  CHECK(w.item(Item::stone) == 0);
  CHECK(std::none_of(ev2.fired.begin(), ev2.fired.end(), [](int g) {
    return g == static_cast<int>(Achievement::collect_stone);
  }));
}

TEST_CASE("movement blocked by non-walkable tiles but turning succeeds") {
  WorldState w = fixture_world();
  w.facing = Dir::down;
  step(w, Action::move_up);  // tree at (3,2) blocks
  CHECK(w.ax == 3);
  CHECK(w.ay == 3);
  CHECK(w.facing == Dir::up);
  step(w, Action::move_left);  // sand at (2,3) is walkable
  CHECK(w.ax == 2);
  CHECK(w.facing == Dir::left);
}

TEST_CASE("crafting chain up to pickaxe and furnace") {
  WorldState w = fixture_world();
  w.inventory[static_cast<size_t>(Item::wood)] = 3;
  w.facing = Dir::down;
  step(w, Action::place_table);
  auto ev = step(w, Action::craft_wood_pickaxe);
  CHECK(w.item(Item::wood_pickaxe) == 1);
  CHECK(w.item(Item::wood) == 0);
  CHECK(std::count(ev.fired.begin(), ev.fired.end(),
                   static_cast<int>(Achievement::make_wood_pickaxe)) == 1);

  // extraction consumes the stone tile into path
  w.ax = 4;
  w.ay = 3;
  w.facing = Dir::right;
  step(w, Action::extract_stone);
  CHECK(w.item(Item::stone) == 1);
  CHECK(w.at(5, 3) == Tile::path);

  w.inventory[static_cast<size_t>(Item::stone)] = 4;
  w.facing = Dir::down;
  auto ev2 = step(w, Action::place_furnace);
  CHECK(w.item(Item::stone) == 0);
  CHECK(std::count(ev2.fired.begin(), ev2.fired.end(),
                   static_cast<int>(Achievement::place_furnace)) == 1);
  CHECK(std::count(ev2.fired.begin(), ev2.fired.end(),
                   static_cast<int>(Achievement::go_to_furnace)) == 1);
}

TEST_CASE("determinism: same seed and action sequence, same trajectory") {
  Rng action_rng(99);
  std::vector<Action> seq;
  for (int i = 0; i < 300; ++i)
    seq.push_back(static_cast<Action>(action_rng.uniform_int(kActionCount)));
  WorldState a = random_world(3);
  WorldState b = random_world(3);
  for (Action act : seq) {
    auto ea = step(a, act);
    auto eb = step(b, act);
    CHECK(ea.fired == eb.fired);
  }
  CHECK(a == b);
}

TEST_CASE("conservation: wood collected minus consumed equals inventory") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    WorldState w = random_world(seed);
    Rng rng(seed + 1000);
    int64_t collected = 0, consumed = 0;
    for (int i = 0; i < 500; ++i) {
      int before = w.item(Item::wood);
      step(w, static_cast<Action>(rng.uniform_int(kActionCount)));
      int after = w.item(Item::wood);
      if (after > before) collected += after - before;
      if (after < before) consumed += before - after;
    }
    CHECK(collected - consumed == w.item(Item::wood));
  }
}

TEST_CASE("verifier bank agrees with the independent rule interpreter") {
  // reduced version of the acceptance run: random rollouts on 7x7 worlds
  WorldGenParams p;
  p.min_stones = 2;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    WorldState w = generate_world(seed, 7, p);
    // seed some inventory occasionally so craft/place preconditions trigger
    Rng rng(seed * 31 + 7);
    if (seed % 3 == 0) {
      w.inventory[static_cast<size_t>(Item::wood)] = 3;
      w.inventory[static_cast<size_t>(Item::wood_pickaxe)] = 1;
      w.inventory[static_cast<size_t>(Item::stone)] = 5;
      w.inventory[static_cast<size_t>(Item::sapling)] = 2;
    }
    for (int i = 0; i < 200; ++i) {
      Action a = static_cast<Action>(rng.uniform_int(kActionCount));
      std::vector<int> expected = testing::oracle_fired(w, a);
      PrevSummary prev = summarize(w);
      step(w, a);
      std::vector<int> got = fired_achievements(prev, a, w);
      std::sort(got.begin(), got.end());
      REQUIRE(got == expected);
    }
  }
}

TEST_CASE("difficulty reproduces every catalog row") {
  CHECK(difficulty("go to tree") == doctest::Approx(0.5));
  CHECK(difficulty("go to stone") == doctest::Approx(0.5));
  CHECK(difficulty("go to coal") == doctest::Approx(0.5));
  CHECK(difficulty("collect wood") == doctest::Approx(0.5));
  CHECK(difficulty("place table") == doctest::Approx(2.5));
  CHECK(difficulty("go to table") == doctest::Approx(2.5));
  CHECK(difficulty("make wood pickaxe") == doctest::Approx(4.0));
  CHECK(difficulty("collect stone") == doctest::Approx(5.0));
  CHECK(difficulty("collect coal") == doctest::Approx(5.0));
  CHECK(difficulty("place furnace") == doctest::Approx(8.5));
  CHECK(difficulty("go to furnace") == doctest::Approx(8.5));
  CHECK_THROWS_AS(difficulty("make wood sword"), std::out_of_range);
  // decomposition columns
  const DifficultyRow& r = difficulty_row("place furnace");
  CHECK(r.collect == 7);
  CHECK(r.place == 2);
  CHECK(r.make == 1);
}

TEST_CASE("caption structure") {
  WorldState w = fixture_world();
  w.inventory[static_cast<size_t>(Item::wood)] = 2;
  w.set(4, 3, Tile::table);
  w.placements.push_back({Tile::table, 4, 3});

  CaptionContext ctx;
  ctx.goal_text = "place table";
  ctx.hl_budget = 64;
  ctx.hl_steps_done = 1;
  ctx.admissible_skills = {"go to tree", "collect wood"};
  ctx.last_action = "chop tree";
  ctx.view = 7;

  std::string text = caption(w, ctx);
  CHECK(text.find("Your task: place table in 64 steps.") != std::string::npos);
  CHECK(text.find("You have already done 1 step.") != std::string::npos);
  CHECK(text.find("You face tree at your front.") != std::string::npos);
  CHECK(text.find("- wood: 2") != std::string::npos);
  CHECK(text.find("You placed table at (4,3)") != std::string::npos);
  CHECK(text.find("Low-level policies you can call:") != std::string::npos);
  CHECK(text.find("The last action you took: chop tree") != std::string::npos);
  // two trees visible but only one tree line
  size_t first = text.find("- tree ");
  REQUIRE(first != std::string::npos);
  CHECK(text.find("- tree ", first + 1) == std::string::npos);
  // nearest tree is one step north
  CHECK(text.find("- tree 1 step to your north") != std::string::npos);

  // faced block consistent with grid and empty sections handled
  WorldState plain = fixture_world();
  plain.facing = Dir::down;
  CaptionContext c2;
  c2.goal_text = "collect wood";
  c2.view = 7;
  std::string t2 = caption(plain, c2);
  CHECK(t2.find("You face grass at your front.") != std::string::npos);
  CHECK(t2.find("Low-level policies") == std::string::npos);  // omitted when empty
  CHECK(t2.find("Your inventory:\n\n") != std::string::npos);  // nothing listed
  CHECK(t2.find("The last action you took: none") != std::string::npos);

  // determinism
  CHECK(caption(w, ctx) == caption(w, ctx));
}

TEST_CASE("caption matches the golden file") {
  WorldState w = fixture_world();
  w.inventory[static_cast<size_t>(Item::wood)] = 2;
  w.inventory[static_cast<size_t>(Item::sapling)] = 1;
  w.set(4, 3, Tile::table);
  w.placements.push_back({Tile::table, 4, 3});
  CaptionContext ctx;
  ctx.goal_text = "make wood pickaxe";
  ctx.hl_budget = 64;
  ctx.hl_steps_done = 2;
  ctx.admissible_skills = {"go to tree", "collect wood", "place table"};
  ctx.last_action = "move up";
  ctx.view = 7;
  std::string got = caption(w, ctx);

  std::ifstream in(std::string(GOLDEN_DIR) + "/caption_basic.txt");
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(got == ss.str());
}
