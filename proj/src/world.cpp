#include "craftrl/world.hpp"

#include <algorithm>
#include <cassert>
#include <deque>
#include <sstream>
#include <stdexcept>

namespace craftrl {

const char* tile_name(Tile t) {
  switch (t) {
    case Tile::grass: return "grass";
    case Tile::sand: return "sand";
    case Tile::path: return "path";
    case Tile::water: return "water";
    case Tile::tree: return "tree";
    case Tile::bush: return "bush";
    case Tile::stone: return "stone";
    case Tile::coal: return "coal";
    case Tile::iron: return "iron";
    case Tile::table: return "table";
    case Tile::furnace: return "furnace";
    case Tile::plant: return "plant";
    case Tile::placed_stone: return "placed stone";
  }
  return "?";
}

const char* action_text(Action a) {
  switch (a) {
    case Action::move_up: return "move up";
    case Action::move_down: return "move down";
    case Action::move_left: return "move left";
    case Action::move_right: return "move right";
    case Action::chop_tree: return "chop tree";
    case Action::chop_bush: return "chop bush";
    case Action::chop_grass: return "chop grass";
    case Action::extract_stone: return "extract stone";
    case Action::extract_coal: return "extract coal";
    case Action::place_table: return "build table";
    case Action::place_furnace: return "build furnace";
    case Action::place_stone: return "put stone";
    case Action::place_plant: return "put plant";
    case Action::craft_wood_pickaxe: return "craft wood pickaxe";
    case Action::craft_wood_sword: return "craft wood sword";
    case Action::noop: return "noop";
  }
  return "?";
}

std::optional<Action> action_from_text(const std::string& s) {
  for (int i = 0; i < kActionCount; ++i) {
    Action a = static_cast<Action>(i);
    if (s == action_text(a)) return a;
  }
  return std::nullopt;
}

const char* item_name(Item it) {
  switch (it) {
    case Item::sapling: return "sapling";
    case Item::wood: return "wood";
    case Item::stone: return "stone";
    case Item::coal: return "coal";
    case Item::wood_pickaxe: return "wood pickaxe";
    case Item::wood_sword: return "wood sword";
  }
  return "?";
}

const char* dir_name(Dir d) {
  switch (d) {
    case Dir::up: return "up";
    case Dir::down: return "down";
    case Dir::left: return "left";
    case Dir::right: return "right";
  }
  return "?";
}

static std::pair<int, int> dir_offset(Dir d) {
  switch (d) {
    case Dir::up: return {0, -1};
    case Dir::down: return {0, 1};
    case Dir::left: return {-1, 0};
    case Dir::right: return {1, 0};
  }
  return {0, 0};
}

std::optional<std::pair<int, int>> WorldState::faced_cell() const {
  auto [dx, dy] = dir_offset(facing);
  int fx = ax + dx, fy = ay + dy;
  if (!in_bounds(fx, fy)) return std::nullopt;
  return std::make_pair(fx, fy);
}

std::optional<Tile> WorldState::faced_tile() const {
  auto cell = faced_cell();
  if (!cell) return std::nullopt;
  return at(cell->first, cell->second);
}

bool WorldState::operator==(const WorldState& o) const {
  return side == o.side && grid == o.grid && ax == o.ax && ay == o.ay && facing == o.facing &&
         inventory == o.inventory && placements == o.placements &&
         ll_step_count == o.ll_step_count && hl_step_count == o.hl_step_count &&
         episode_step_count == o.episode_step_count && rng == o.rng;
}

bool tile_walkable(Tile t) { return t == Tile::grass || t == Tile::sand || t == Tile::path; }

// ------------------------------------------------------------- generation

namespace {

void blob(WorldState& w, Rng& rng, int cx, int cy, int size, Tile t) {
  int x = cx, y = cy;
  for (int i = 0; i < size; ++i) {
    if (w.in_bounds(x, y)) w.set(x, y, t);
    int d = static_cast<int>(rng.uniform_int(4));
    x += (d == 0) - (d == 1);
    y += (d == 2) - (d == 3);
  }
}

bool resources_reachable(const WorldState& w) {
  // BFS over walkable cells from the agent; a resource counts as reachable
  // when some reached cell is 4-adjacent to it.
  std::vector<char> seen(w.grid.size(), 0);
  std::deque<std::pair<int, int>> q;
  q.push_back({w.ax, w.ay});
  seen[static_cast<size_t>(w.ay) * w.side + w.ax] = 1;
  int trees = 0, stones = 0, coals = 0;
  auto visit_neighbors = [&](int x, int y) {
    static const int dx[4] = {0, 0, -1, 1};
    static const int dy[4] = {-1, 1, 0, 0};
    for (int k = 0; k < 4; ++k) {
      int nx = x + dx[k], ny = y + dy[k];
      if (!w.in_bounds(nx, ny)) continue;
      size_t idx = static_cast<size_t>(ny) * w.side + nx;
      if (seen[idx]) continue;
      Tile t = w.at(nx, ny);
      if (t == Tile::tree) ++trees;
      if (t == Tile::stone) ++stones;
      if (t == Tile::coal) ++coals;
      seen[idx] = 1;  // counted once
      if (tile_walkable(t)) q.push_back({nx, ny});
    }
  };
  while (!q.empty()) {
    auto [x, y] = q.front();
    q.pop_front();
    visit_neighbors(x, y);
  }
  return trees >= 1 && stones >= 1 && coals >= 1;
}

bool try_generate(WorldState& w, uint64_t seed, int side, const WorldGenParams& p) {
  w.side = side;
  w.grid.assign(static_cast<size_t>(side) * side, Tile::grass);
  w.ax = w.ay = side / 2;
  w.facing = Dir::down;
  w.inventory.fill(0);
  w.placements.clear();
  w.ll_step_count = w.hl_step_count = w.episode_step_count = 0;
  w.rng = Rng(seed);
  Rng& rng = w.rng;

  const int area = side * side;
  auto count_of = [&](double density, int minimum) {
    return std::max(minimum, static_cast<int>(density * area));
  };

  // water and sand blobs
  int n_water = static_cast<int>(p.water_density * area);
  for (int i = 0; i < std::max(0, n_water / 4); ++i)
    blob(w, rng, static_cast<int>(rng.uniform_int(side)), static_cast<int>(rng.uniform_int(side)),
         4 + static_cast<int>(rng.uniform_int(5)), Tile::water);
  int n_sand = static_cast<int>(p.sand_density * area);
  for (int i = 0; i < std::max(0, n_sand / 5); ++i)
    blob(w, rng, static_cast<int>(rng.uniform_int(side)), static_cast<int>(rng.uniform_int(side)),
         5 + static_cast<int>(rng.uniform_int(4)), Tile::sand);

  // stone cluster with embedded coal / iron
  int n_stone = count_of(p.stone_density, p.min_stones + p.min_coals + 1);
  {
    int cx = static_cast<int>(rng.uniform_int(side));
    int cy = static_cast<int>(rng.uniform_int(side));
    int placed = 0, guard = 0;
    int x = cx, y = cy;
    while (placed < n_stone && guard++ < n_stone * 20) {
      if (w.in_bounds(x, y) && w.at(x, y) != Tile::stone) {
        w.set(x, y, Tile::stone);
        ++placed;
      }
      int d = static_cast<int>(rng.uniform_int(4));
      x += (d == 0) - (d == 1);
      y += (d == 2) - (d == 3);
      if (!w.in_bounds(x, y)) {
        x = cx;
        y = cy;
      }
    }
  }
  // convert a fraction of stone cells to coal / iron
  {
    std::vector<size_t> stone_cells;
    for (size_t i = 0; i < w.grid.size(); ++i)
      if (w.grid[i] == Tile::stone) stone_cells.push_back(i);
    rng.shuffle(stone_cells);
    int n_coal = std::max(p.min_coals, static_cast<int>(p.coal_fraction * stone_cells.size()));
    int n_iron = static_cast<int>(p.iron_fraction * stone_cells.size());
    size_t k = 0;
    for (int i = 0; i < n_coal && k < stone_cells.size(); ++i, ++k)
      w.grid[stone_cells[k]] = Tile::coal;
    for (int i = 0; i < n_iron && k < stone_cells.size(); ++i, ++k)
      w.grid[stone_cells[k]] = Tile::iron;
  }

  // trees scattered on grass
  {
    int n_tree = count_of(p.tree_density, p.min_trees);
    int placed = 0, guard = 0;
    while (placed < n_tree && guard++ < area * 20) {
      int x = static_cast<int>(rng.uniform_int(side));
      int y = static_cast<int>(rng.uniform_int(side));
      if (w.at(x, y) == Tile::grass) {
        w.set(x, y, Tile::tree);
        ++placed;
      }
    }
  }
  // sparse bushes and path cells
  for (Tile t : {Tile::bush, Tile::path}) {
    double d = (t == Tile::bush) ? p.bush_density : p.path_density;
    int n = static_cast<int>(d * area);
    int guard = 0;
    while (n > 0 && guard++ < area * 20) {
      int x = static_cast<int>(rng.uniform_int(side));
      int y = static_cast<int>(rng.uniform_int(side));
      if (w.at(x, y) == Tile::grass) {
        w.set(x, y, t);
        --n;
      }
    }
  }

  // agent spawn on a walkable cell
  {
    int guard = 0;
    while (guard++ < area * 20) {
      int x = static_cast<int>(rng.uniform_int(side));
      int y = static_cast<int>(rng.uniform_int(side));
      if (tile_walkable(w.at(x, y))) {
        w.ax = x;
        w.ay = y;
        break;
      }
    }
    if (!tile_walkable(w.at(w.ax, w.ay))) return false;
  }

  // minimum resource presence
  int trees = 0, stones = 0, coals = 0;
  for (Tile t : w.grid) {
    trees += t == Tile::tree;
    stones += t == Tile::stone;
    coals += t == Tile::coal;
  }
  if (trees < p.min_trees || stones < p.min_stones || coals < p.min_coals) return false;
  return resources_reachable(w);
}

}  // namespace

WorldState generate_world(uint64_t seed, int side, const WorldGenParams& params) {
  if (side < 7) throw std::invalid_argument("generate_world: side must be >= 7");
  WorldState w;
  for (int attempt = 0; attempt < 200; ++attempt) {
    uint64_t s = derive_seed(seed, "worldgen", static_cast<uint64_t>(attempt));
    if (try_generate(w, s, side, params)) return w;
  }
  throw std::runtime_error("generate_world: constraints unsatisfiable for given parameters");
}

// ------------------------------------------------------------------ step

PrevSummary summarize(const WorldState& s) {
  PrevSummary p;
  p.inventory = s.inventory;
  p.placements_size = s.placements.size();
  p.faced = s.faced_tile();
  return p;
}

static bool placeable_ground(Tile t) {
  return t == Tile::grass || t == Tile::sand || t == Tile::path;
}

StepEvents step(WorldState& s, Action a) {
  PrevSummary prev = summarize(s);
  auto inv = [&s](Item it) -> int& { return s.inventory[static_cast<size_t>(it)]; };

  switch (a) {
    case Action::move_up:
    case Action::move_down:
    case Action::move_left:
    case Action::move_right: {
      Dir d = a == Action::move_up     ? Dir::up
              : a == Action::move_down ? Dir::down
              : a == Action::move_left ? Dir::left
                                       : Dir::right;
      s.facing = d;  // turning always succeeds
      auto [dx, dy] = dir_offset(d);
      int nx = s.ax + dx, ny = s.ay + dy;
      if (s.in_bounds(nx, ny) && tile_walkable(s.at(nx, ny))) {
        s.ax = nx;
        s.ay = ny;
      }
      break;
    }
    case Action::chop_tree:
      if (prev.faced == Tile::tree) ++inv(Item::wood);
      break;
    case Action::chop_bush:
      if (prev.faced == Tile::bush) {
        ++inv(Item::sapling);
        auto c = *s.faced_cell();
        s.set(c.first, c.second, Tile::grass);
      }
      break;
    case Action::chop_grass:
      if (prev.faced == Tile::grass) ++inv(Item::sapling);
      break;
    case Action::extract_stone:
      if (prev.faced == Tile::stone && inv(Item::wood_pickaxe) >= 1) {
        ++inv(Item::stone);
        auto c = *s.faced_cell();
        s.set(c.first, c.second, Tile::path);
      }
      break;
    case Action::extract_coal:
      if (prev.faced == Tile::coal && inv(Item::wood_pickaxe) >= 1) {
        ++inv(Item::coal);
        auto c = *s.faced_cell();
        s.set(c.first, c.second, Tile::path);
      }
      break;
    case Action::place_table:
      if (prev.faced && placeable_ground(*prev.faced) && inv(Item::wood) >= 2) {
        inv(Item::wood) -= 2;
        auto c = *s.faced_cell();
        s.set(c.first, c.second, Tile::table);
        s.placements.push_back({Tile::table, c.first, c.second});
      }
      break;
    case Action::place_furnace:
      if (prev.faced && placeable_ground(*prev.faced) && inv(Item::stone) >= 4) {
        inv(Item::stone) -= 4;
        auto c = *s.faced_cell();
        s.set(c.first, c.second, Tile::furnace);
        s.placements.push_back({Tile::furnace, c.first, c.second});
      }
      break;
    case Action::place_stone:
      if (prev.faced && (placeable_ground(*prev.faced) || *prev.faced == Tile::water) &&
          inv(Item::stone) >= 1) {
        inv(Item::stone) -= 1;
        auto c = *s.faced_cell();
        s.set(c.first, c.second, Tile::placed_stone);
        s.placements.push_back({Tile::placed_stone, c.first, c.second});
      }
      break;
    case Action::place_plant:
      if (prev.faced == Tile::grass && inv(Item::sapling) >= 1) {
        inv(Item::sapling) -= 1;
        auto c = *s.faced_cell();
        s.set(c.first, c.second, Tile::plant);
        s.placements.push_back({Tile::plant, c.first, c.second});
      }
      break;
    case Action::craft_wood_pickaxe:
      if (prev.faced == Tile::table && inv(Item::wood) >= 1) {
        inv(Item::wood) -= 1;
        ++inv(Item::wood_pickaxe);
      }
      break;
    case Action::craft_wood_sword:
      if (prev.faced == Tile::table && inv(Item::wood) >= 1) {
        inv(Item::wood) -= 1;
        ++inv(Item::wood_sword);
      }
      break;
    case Action::noop: break;
  }

  ++s.ll_step_count;
  ++s.episode_step_count;
  return StepEvents{fired_achievements(prev, a, s)};
}

// -------------------------------------------------------------- verifiers

const char* achievement_text(Achievement a) {
  switch (a) {
    case Achievement::go_to_tree: return "go to tree";
    case Achievement::collect_wood: return "collect wood";
    case Achievement::place_table: return "place table";
    case Achievement::go_to_table: return "go to table";
    case Achievement::make_wood_pickaxe: return "make wood pickaxe";
    case Achievement::go_to_stone: return "go to stone";
    case Achievement::collect_stone: return "collect stone";
    case Achievement::go_to_coal: return "go to coal";
    case Achievement::collect_coal: return "collect coal";
    case Achievement::place_furnace: return "place furnace";
    case Achievement::go_to_furnace: return "go to furnace";
  }
  return "?";
}

std::optional<Achievement> achievement_from_text(const std::string& s) {
  for (int i = 0; i < kAchievementCount; ++i) {
    Achievement a = static_cast<Achievement>(i);
    if (s == achievement_text(a)) return a;
  }
  return std::nullopt;
}

static bool placement_added(const PrevSummary& prev, const WorldState& next, Tile kind) {
  return next.placements.size() == prev.placements_size + 1 &&
         next.placements.back().kind == kind;
}

static bool item_gained(const PrevSummary& prev, const WorldState& next, Item it) {
  return next.inventory[static_cast<size_t>(it)] > prev.inventory[static_cast<size_t>(it)];
}

bool achievement_fired(Achievement g, const PrevSummary& prev, Action a, const WorldState& next) {
  (void)a;
  switch (g) {
    case Achievement::go_to_tree: return next.faced_tile() == Tile::tree;
    case Achievement::go_to_table: return next.faced_tile() == Tile::table;
    case Achievement::go_to_stone: return next.faced_tile() == Tile::stone;
    case Achievement::go_to_coal: return next.faced_tile() == Tile::coal;
    case Achievement::go_to_furnace: return next.faced_tile() == Tile::furnace;
    case Achievement::collect_wood: return item_gained(prev, next, Item::wood);
    case Achievement::collect_stone: return item_gained(prev, next, Item::stone);
    case Achievement::collect_coal: return item_gained(prev, next, Item::coal);
    case Achievement::make_wood_pickaxe: return item_gained(prev, next, Item::wood_pickaxe);
    case Achievement::place_table: return placement_added(prev, next, Tile::table);
    case Achievement::place_furnace: return placement_added(prev, next, Tile::furnace);
  }
  return false;
}

std::vector<int> fired_achievements(const PrevSummary& prev, Action a, const WorldState& next) {
  std::vector<int> out;
  for (int i = 0; i < kAchievementCount; ++i)
    if (achievement_fired(static_cast<Achievement>(i), prev, a, next)) out.push_back(i);
  return out;
}

// -------------------------------------------------------------- difficulty

const DifficultyRow& difficulty_row(const std::string& goal_text) {
  // decomposition rows and scores; "collect wood" is rated like "go to tree"
  // (no tool needed), and "go to table/furnace" inherit the place scores.
  static const std::unordered_map<std::string, DifficultyRow> rows = {
      {"go to tree", {1, 0, 0, 0, 0.5}},
      {"go to stone", {1, 0, 0, 0, 0.5}},
      {"go to coal", {1, 0, 0, 0, 0.5}},
      {"collect wood", {0, 1, 0, 0, 0.5}},
      {"place table", {0, 2, 1, 0, 2.5}},
      {"go to table", {0, 2, 1, 0, 2.5}},
      {"make wood pickaxe", {0, 3, 1, 1, 4.0}},
      {"collect stone", {0, 4, 1, 1, 5.0}},
      {"collect coal", {0, 4, 1, 1, 5.0}},
      {"place furnace", {0, 7, 2, 1, 8.5}},
      {"go to furnace", {0, 7, 2, 1, 8.5}},
  };
  auto it = rows.find(goal_text);
  if (it == rows.end()) throw std::out_of_range("difficulty: unknown goal '" + goal_text + "'");
  return it->second;
}

double difficulty(const std::string& goal_text) { return difficulty_row(goal_text).score; }

// ---------------------------------------------------------------- caption

namespace {

std::string direction_label(int dx, int dy) {
  std::string ns = dy < 0 ? "north" : (dy > 0 ? "south" : "");
  std::string ew = dx < 0 ? "west" : (dx > 0 ? "east" : "");
  if (!ns.empty() && !ew.empty()) return ns + "-" + ew;
  return ns.empty() ? ew : ns;
}

std::string steps_phrase(int n) {
  return std::to_string(n) + (n == 1 ? " step" : " steps");
}

}  // namespace

std::string caption(const WorldState& s, const CaptionContext& ctx) {
  std::ostringstream os;
  os << "You are playing a Minecraft like game. You can use elementary actions or, if "
        "available, more efficient low-level policies.\n\n";
  os << "Your task: " << ctx.goal_text << " in " << ctx.hl_budget << " steps.\n";
  os << "You have already done " << steps_phrase(ctx.hl_steps_done) << ".\n\n";
  os << "Your coordinates: (" << s.ax << "," << s.ay << ")\n\n";

  // nearest instance of each visible kind, Chebyshev distance, 8-way label
  os << "You see:\n";
  const int half = ctx.view / 2;
  struct Seen {
    int dist;
    int dx, dy;
  };
  std::array<std::optional<Seen>, kTileCount> seen;
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      if (dx == 0 && dy == 0) continue;
      int x = s.ax + dx, y = s.ay + dy;
      if (!s.in_bounds(x, y)) continue;
      int d = std::max(std::abs(dx), std::abs(dy));
      auto& slot = seen[static_cast<size_t>(s.at(x, y))];
      if (!slot || d < slot->dist) slot = Seen{d, dx, dy};
    }
  }
  for (int k = 0; k < kTileCount; ++k) {
    if (!seen[k]) continue;
    const Seen& e = *seen[k];
    os << "- " << tile_name(static_cast<Tile>(k)) << " " << steps_phrase(e.dist) << " to your "
       << direction_label(e.dx, e.dy) << "\n";
  }
  os << "\n";

  auto faced = s.faced_tile();
  if (faced)
    os << "You face " << tile_name(*faced) << " at your front.\n\n";
  else
    os << "You face nothing at your front.\n\n";

  os << "Your inventory:\n";
  for (int i = 0; i < kItemCount; ++i)
    if (s.inventory[i] > 0)
      os << "- " << item_name(static_cast<Item>(i)) << ": " << s.inventory[i] << "\n";
  os << "\n";

  for (const auto& p : s.placements)
    os << "You placed " << tile_name(p.kind) << " at (" << p.x << "," << p.y << ")\n";
  if (!s.placements.empty()) os << "\n";

  os << "Elementary actions you can take:\n";
  for (int i = 0; i < kActionCount; ++i)
    os << "- " << action_text(static_cast<Action>(i)) << "\n";

  if (!ctx.admissible_skills.empty()) {
    os << "\nLow-level policies you can call:\n";
    for (const auto& sk : ctx.admissible_skills) os << "- " << sk << "\n";
  }

  os << "\nThe last action you took: " << (ctx.last_action.empty() ? "none" : ctx.last_action)
     << "\n";
  return os.str();
}

}  // namespace craftrl
