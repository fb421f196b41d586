#include "craftrl/goals.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace craftrl {

// ------------------------------------------------------------------ catalog

static const char* kind_name(GoalKind k) {
  switch (k) {
    case GoalKind::elementary: return "elementary";
    case GoalKind::achievement: return "achievement";
    case GoalKind::compositional: return "compositional";
  }
  return "?";
}

static GoalKind kind_from(const std::string& s) {
  if (s == "elementary") return GoalKind::elementary;
  if (s == "achievement") return GoalKind::achievement;
  if (s == "compositional") return GoalKind::compositional;
  throw std::invalid_argument("unknown goal kind: " + s);
}

GoalCatalog GoalCatalog::builtin() {
  GoalCatalog c;
  auto verb_of = [](const std::string& text) { return text.substr(0, text.find(' ')); };
  for (int i = 0; i < kAchievementCount; ++i) {
    Goal g;
    g.id = i;
    g.text = achievement_text(static_cast<Achievement>(i));
    g.kind = GoalKind::achievement;
    g.binding = i;
    g.verb = verb_of(g.text);
    c.goals_.push_back(std::move(g));
  }
  for (int i = 0; i < kActionCount; ++i) {
    Goal g;
    g.id = kAchievementCount + i;
    g.text = action_text(static_cast<Action>(i));
    g.kind = GoalKind::elementary;
    g.binding = i;
    c.goals_.push_back(std::move(g));
  }
  // prerequisite edges of the achievement tree
  auto id_of = [&c](Achievement a) { return static_cast<GoalId>(a); };
  c.precedence_ = {
      {id_of(Achievement::go_to_tree), id_of(Achievement::collect_wood)},
      {id_of(Achievement::collect_wood), id_of(Achievement::place_table)},
      {id_of(Achievement::place_table), id_of(Achievement::go_to_table)},
      {id_of(Achievement::place_table), id_of(Achievement::make_wood_pickaxe)},
      {id_of(Achievement::collect_wood), id_of(Achievement::make_wood_pickaxe)},
      {id_of(Achievement::make_wood_pickaxe), id_of(Achievement::collect_stone)},
      {id_of(Achievement::make_wood_pickaxe), id_of(Achievement::collect_coal)},
      {id_of(Achievement::go_to_stone), id_of(Achievement::collect_stone)},
      {id_of(Achievement::go_to_coal), id_of(Achievement::collect_coal)},
      {id_of(Achievement::collect_stone), id_of(Achievement::place_furnace)},
      {id_of(Achievement::place_furnace), id_of(Achievement::go_to_furnace)},
  };
  c.rebuild_index();
  c.check_acyclic();
  return c;
}

GoalCatalog GoalCatalog::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open goal catalog: " + path);
  GoalCatalog c;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("prec|", 0) == 0) {
      std::istringstream ls(line.substr(5));
      std::string a, b;
      std::getline(ls, a, '|');
      std::getline(ls, b, '|');
      c.precedence_.push_back({std::stoi(a), std::stoi(b)});
      continue;
    }
    std::istringstream ls(line);
    std::string id, text, kind, binding, verb;
    std::getline(ls, id, '|');
    std::getline(ls, text, '|');
    std::getline(ls, kind, '|');
    std::getline(ls, binding, '|');
    std::getline(ls, verb, '|');
    Goal g;
    g.id = std::stoi(id);
    g.text = text;
    g.kind = kind_from(kind);
    g.binding = std::stoi(binding);
    g.verb = verb;
    if (static_cast<size_t>(g.id) != c.goals_.size())
      throw std::runtime_error("goal catalog ids must be dense and ordered");
    c.goals_.push_back(std::move(g));
  }
  c.rebuild_index();
  c.check_acyclic();
  return c;
}

void GoalCatalog::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write goal catalog: " + path);
  out << "# goal catalog: id|text|kind|binding|verb\n";
  for (const auto& g : goals_)
    out << g.id << "|" << g.text << "|" << kind_name(g.kind) << "|" << g.binding << "|" << g.verb
        << "\n";
  for (const auto& [a, b] : precedence_) out << "prec|" << a << "|" << b << "\n";
}

void GoalCatalog::rebuild_index() {
  by_text_.clear();
  for (const auto& g : goals_) {
    if (by_text_.count(g.text)) throw std::runtime_error("duplicate goal text: " + g.text);
    by_text_[g.text] = g.id;
  }
}

void GoalCatalog::check_acyclic() const {
  // DFS cycle check over precedence edges
  std::unordered_map<GoalId, std::vector<GoalId>> adj;
  for (const auto& [a, b] : precedence_) adj[a].push_back(b);
  std::unordered_map<GoalId, int> state;  // 0 unseen, 1 open, 2 done
  std::function<void(GoalId)> dfs = [&](GoalId u) {
    state[u] = 1;
    for (GoalId v : adj[u]) {
      if (state[v] == 1) throw std::runtime_error("precedence relation has a cycle");
      if (state[v] == 0) dfs(v);
    }
    state[u] = 2;
  };
  for (const auto& [a, b] : precedence_) {
    (void)b;
    if (state[a] == 0) dfs(a);
  }
}

const Goal& GoalCatalog::goal(GoalId id) const {
  if (id < 0 || static_cast<size_t>(id) >= goals_.size())
    throw std::out_of_range("unknown goal id " + std::to_string(id));
  return goals_[static_cast<size_t>(id)];
}

const Goal* GoalCatalog::find_text(const std::string& text) const {
  auto it = by_text_.find(text);
  return it == by_text_.end() ? nullptr : &goals_[static_cast<size_t>(it->second)];
}

std::vector<GoalId> GoalCatalog::achievement_ids() const {
  std::vector<GoalId> out;
  for (const auto& g : goals_)
    if (g.kind == GoalKind::achievement) out.push_back(g.id);
  return out;
}

std::vector<GoalId> GoalCatalog::elementary_ids() const {
  std::vector<GoalId> out;
  for (const auto& g : goals_)
    if (g.kind == GoalKind::elementary) out.push_back(g.id);
  return out;
}

GoalId GoalCatalog::goal_of_action(Action a) const {
  return kAchievementCount + static_cast<GoalId>(a);
}

std::optional<Action> GoalCatalog::action_of_goal(GoalId id) const {
  const Goal& g = goal(id);
  if (g.kind != GoalKind::elementary) return std::nullopt;
  return static_cast<Action>(g.binding);
}

GoalId GoalCatalog::add_goal(Goal g) {
  g.id = static_cast<GoalId>(goals_.size());
  if (by_text_.count(g.text)) throw std::runtime_error("duplicate goal text: " + g.text);
  by_text_[g.text] = g.id;
  goals_.push_back(std::move(g));
  return goals_.back().id;
}

// ------------------------------------------------------------------ lexicon

Lexicon Lexicon::builtin() {
  Lexicon lex;
  lex.verbs["collect"] = {"gather", "acquire", "procure", "harvest", "amass"};
  lex.verbs["make"] = {"craft", "construct", "build", "acquire", "create"};
  lex.verbs["place"] = {"put", "putdown", "install", "deploy", "position"};
  lex.verbs["go"] = {"move", "walk", "proceed", "travel", "run"};
  return lex;
}

std::vector<std::string> expand_synonyms(const Goal& g, const Lexicon& lex) {
  auto it = lex.verbs.find(g.verb);
  if (g.kind != GoalKind::achievement || it == lex.verbs.end()) return {};
  std::string rest = g.text.substr(g.verb.size());
  std::vector<std::string> out;
  out.reserve(it->second.size());
  for (const auto& syn : it->second) out.push_back(syn + rest);
  return out;
}

Goal make_n_compositional(const GoalCatalog& catalog, const Goal& g, int n) {
  if (n < 2 || n > 4) throw std::invalid_argument("n-compositional: n must be in [2,4]");
  if (g.kind != GoalKind::achievement)
    throw std::invalid_argument("n-compositional: base must be an achievement goal");
  if (g.verb == "go")
    throw std::invalid_argument("n-compositional: \"go to\" goals are excluded");
  (void)catalog;
  std::string rest = g.text.substr(g.verb.size() + 1);
  Goal out;
  out.text = g.verb + " " + std::to_string(n) + " " + rest + "s";
  out.kind = GoalKind::compositional;
  out.binding = g.id;
  out.repeat = n;
  out.verb = g.verb;
  return out;
}

// ---------------------------------------------------------------- tokenizer

static std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

Vocabulary Vocabulary::builtin(const GoalCatalog& catalog, const Lexicon& lex) {
  Vocabulary v;
  v.words_.push_back("<eos>");
  v.index_["<eos>"] = kEosToken;
  auto add = [&v](const std::string& w) {
    if (!v.index_.count(w)) {
      v.index_[w] = static_cast<int>(v.words_.size());
      v.words_.push_back(w);
    }
  };
  auto add_text = [&](const std::string& t) {
    for (const auto& w : split_words(t)) add(w);
  };
  for (const auto& g : catalog.goals()) add_text(g.text);
  for (const auto& [verb, syns] : lex.verbs) {
    add(verb);
    for (const auto& s : syns) add(s);
  }
  // compositional forms: digits and pluralized objects
  for (int n = 2; n <= 4; ++n) add(std::to_string(n));
  for (const auto& g : catalog.goals()) {
    if (g.kind != GoalKind::achievement || g.verb == "go") continue;
    std::string rest = g.text.substr(g.verb.size() + 1);
    add_text(rest + "s");
  }
  return v;
}

std::optional<int> Vocabulary::id(const std::string& w) const {
  auto it = index_.find(w);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<int> Vocabulary::tokenize(const std::string& text) const {
  std::vector<int> out;
  for (const auto& w : split_words(text)) {
    auto t = id(w);
    if (!t) throw std::invalid_argument("out-of-vocabulary word: '" + w + "'");
    out.push_back(*t);
  }
  out.push_back(kEosToken);
  return out;
}

std::string Vocabulary::detokenize(const std::vector<int>& tokens) const {
  std::string out;
  for (int t : tokens) {
    if (t == kEosToken) break;
    if (t < 0 || t >= size()) throw std::invalid_argument("bad token id");
    if (!out.empty()) out += ' ';
    out += word(t);
  }
  return out;
}

// ------------------------------------------------------------ verifier bank

void VerifierBank::reset_episode() { counters_.clear(); }

bool VerifierBank::goal_fired(GoalId id, const PrevSummary& prev, Action a,
                              const WorldState& next) {
  const Goal& g = catalog_->goal(id);
  switch (g.kind) {
    case GoalKind::achievement:
      return achievement_fired(static_cast<Achievement>(g.binding), prev, a, next);
    case GoalKind::elementary:
      return static_cast<Action>(g.binding) == a;
    case GoalKind::compositional:
      throw std::logic_error("compositional goals are evaluated via fired()");
  }
  return false;
}

std::vector<GoalId> VerifierBank::fired(const PrevSummary& prev, Action a,
                                        const WorldState& next) {
  std::vector<GoalId> out;
  std::vector<int> base = fired_achievements(prev, a, next);
  for (const auto& g : catalog_->goals()) {
    switch (g.kind) {
      case GoalKind::achievement:
        if (std::find(base.begin(), base.end(), g.binding) != base.end()) out.push_back(g.id);
        break;
      case GoalKind::elementary:
        if (static_cast<Action>(g.binding) == a) out.push_back(g.id);
        break;
      case GoalKind::compositional: {
        const Goal& base_goal = catalog_->goal(g.binding);
        if (std::find(base.begin(), base.end(), base_goal.binding) != base.end()) {
          int c = ++counters_[g.id];
          if (c == g.repeat) out.push_back(g.id);
        }
        break;
      }
    }
  }
  return out;
}

}  // namespace craftrl
