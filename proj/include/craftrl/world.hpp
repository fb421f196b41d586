#pragma once
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "craftrl/rng.hpp"

namespace craftrl {

enum class Tile : uint8_t {
  grass,
  sand,
  path,
  water,
  tree,
  bush,
  stone,
  coal,
  iron,
  table,
  furnace,
  plant,
  placed_stone,
};
constexpr int kTileCount = 13;
const char* tile_name(Tile t);

enum class Action : uint8_t {
  move_up,
  move_down,
  move_left,
  move_right,
  chop_tree,
  chop_bush,
  chop_grass,
  extract_stone,
  extract_coal,
  place_table,
  place_furnace,
  place_stone,
  place_plant,
  craft_wood_pickaxe,
  craft_wood_sword,
  noop,
};
constexpr int kActionCount = 16;
// canonical action texts match the elementary-goal texts ("build table", ...)
const char* action_text(Action a);
std::optional<Action> action_from_text(const std::string& s);

enum class Item : uint8_t { sapling, wood, stone, coal, wood_pickaxe, wood_sword };
constexpr int kItemCount = 6;
const char* item_name(Item it);

enum class Dir : uint8_t { up, down, left, right };
const char* dir_name(Dir d);

struct Placement {
  Tile kind;
  int x, y;
  bool operator==(const Placement&) const = default;
};

struct WorldState {
  int side = 0;
  std::vector<Tile> grid;  // row-major, side*side
  int ax = 0, ay = 0;
  Dir facing = Dir::down;
  std::array<int, kItemCount> inventory{};
  std::vector<Placement> placements;
  int64_t ll_step_count = 0;
  int64_t hl_step_count = 0;
  int64_t episode_step_count = 0;
  Rng rng;  // per-world stream, advanced only by generation today

  Tile at(int x, int y) const { return grid[static_cast<size_t>(y) * side + x]; }
  void set(int x, int y, Tile t) { grid[static_cast<size_t>(y) * side + x] = t; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < side && y >= 0 && y < side; }
  // cell in front of the agent; nullopt at the map edge
  std::optional<std::pair<int, int>> faced_cell() const;
  std::optional<Tile> faced_tile() const;
  int item(Item it) const { return inventory[static_cast<size_t>(it)]; }

  bool operator==(const WorldState& o) const;
};

bool tile_walkable(Tile t);

struct WorldGenParams {
  double tree_density = 0.11;
  double water_density = 0.03;
  double sand_density = 0.06;
  double bush_density = 0.015;
  double path_density = 0.01;
  double stone_density = 0.045;
  double coal_fraction = 0.25;  // of stone-cluster cells converted to coal
  double iron_fraction = 0.06;
  int min_trees = 1;
  int min_stones = 4;
  int min_coals = 1;
};

// Deterministic seeded generation. Guarantees at least one tree, stone and
// coal reachable from the agent spawn; throws std::invalid_argument for
// side < 7 and std::runtime_error if constraints cannot be met.
WorldState generate_world(uint64_t seed, int side, const WorldGenParams& params = {});

// pre-step facts the verifiers need
struct PrevSummary {
  std::array<int, kItemCount> inventory{};
  size_t placements_size = 0;
  std::optional<Tile> faced;
};
PrevSummary summarize(const WorldState& s);

struct StepEvents {
  std::vector<int> fired;  // achievement goal ids (see goals.hpp ordering)
};

// Applies one elementary action in place. Unmet preconditions leave everything
// but the step counters unchanged. Returns the achievement goals whose
// verifier fired on this transition.
StepEvents step(WorldState& s, Action a);

// --------------------------------------------------------------- verifiers

// Achievement goals, in tree order. Ids below are also the goal ids used by
// the goal catalog for achievements.
enum class Achievement : int {
  go_to_tree = 0,
  collect_wood,
  place_table,
  go_to_table,
  make_wood_pickaxe,
  go_to_stone,
  collect_stone,
  go_to_coal,
  collect_coal,
  place_furnace,
  go_to_furnace,
};
constexpr int kAchievementCount = 11;
const char* achievement_text(Achievement a);
std::optional<Achievement> achievement_from_text(const std::string& s);

// Event-based verifier: fires on the transition that completes the goal.
bool achievement_fired(Achievement g, const PrevSummary& prev, Action a, const WorldState& next);

// all achievements fired on this transition
std::vector<int> fired_achievements(const PrevSummary& prev, Action a, const WorldState& next);

// --------------------------------------------------------------- difficulty

struct DifficultyRow {
  int go_to = 0, collect = 0, place = 0, make = 0;
  double score = 0.0;
};
// throws std::out_of_range for goals outside the 11-achievement catalog
const DifficultyRow& difficulty_row(const std::string& goal_text);
double difficulty(const std::string& goal_text);

// --------------------------------------------------------------- captions

struct CaptionContext {
  std::string goal_text;
  int hl_budget = 64;
  int hl_steps_done = 0;
  std::vector<std::string> admissible_skills;  // section omitted when empty
  std::string last_action;                     // empty -> "none"
  int view = 9;                                // odd window side
};

std::string caption(const WorldState& s, const CaptionContext& ctx);

}  // namespace craftrl
