#pragma once
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "craftrl/world.hpp"

namespace craftrl {

using GoalId = int;

enum class GoalKind { elementary, achievement, compositional };

struct Goal {
  GoalId id = -1;
  std::string text;
  GoalKind kind = GoalKind::achievement;
  // achievement: index into Achievement; elementary: index into Action;
  // compositional: id of the base achievement goal
  int binding = -1;
  int repeat = 1;  // >1 for compositional goals
  std::string verb;
};

// 11 achievements (ids 0..10, matching Achievement) + 16 elementary goals
// (ids 11..26, matching Action order). Compositional goals get ids >= 27.
class GoalCatalog {
 public:
  static GoalCatalog builtin();
  // one record per line: id|text|kind|binding|verb  ('#' comments allowed)
  static GoalCatalog load_file(const std::string& path);
  void save_file(const std::string& path) const;

  const Goal& goal(GoalId id) const;
  const Goal* find_text(const std::string& text) const;
  const std::vector<Goal>& goals() const { return goals_; }
  std::vector<GoalId> achievement_ids() const;
  std::vector<GoalId> elementary_ids() const;
  size_t size() const { return goals_.size(); }

  bool is_elementary(GoalId id) const { return goal(id).kind == GoalKind::elementary; }
  // elementary goal id <-> Action
  GoalId goal_of_action(Action a) const;
  std::optional<Action> action_of_goal(GoalId id) const;

  // precedence pairs (prerequisite, goal); asserted acyclic at construction
  const std::vector<std::pair<GoalId, GoalId>>& precedence() const { return precedence_; }

  // registers a compositional goal (see make_n_compositional); returns its id
  GoalId add_goal(Goal g);

 private:
  void rebuild_index();
  void check_acyclic() const;
  std::vector<Goal> goals_;
  std::unordered_map<std::string, GoalId> by_text_;
  std::vector<std::pair<GoalId, GoalId>> precedence_;
};

// ------------------------------------------------------------------ lexicon

struct Lexicon {
  // verb -> exactly five synonyms
  std::map<std::string, std::vector<std::string>> verbs;
  static Lexicon builtin();
};

// five verb-substituted reformulations; empty when the goal's verb has no
// lexicon entry
std::vector<std::string> expand_synonyms(const Goal& g, const Lexicon& lex);

// "<verb> n <object>s"; throws std::invalid_argument for "go to" goals,
// non-achievements, or n outside [2,4]
Goal make_n_compositional(const GoalCatalog& catalog, const Goal& g, int n);

// ---------------------------------------------------------------- tokenizer

constexpr int kEosToken = 0;

class Vocabulary {
 public:
  // covers every word of every canonical, synonym and compositional goal text
  static Vocabulary builtin(const GoalCatalog& catalog, const Lexicon& lex);

  int size() const { return static_cast<int>(words_.size()); }
  const std::string& word(int id) const { return words_[static_cast<size_t>(id)]; }
  std::optional<int> id(const std::string& w) const;

  // appends EOS; throws std::invalid_argument on out-of-vocabulary words
  std::vector<int> tokenize(const std::string& text) const;
  std::string detokenize(const std::vector<int>& tokens) const;

 private:
  std::vector<std::string> words_;  // words_[0] == "<eos>"
  std::unordered_map<std::string, int> index_;
};

// ------------------------------------------------------------ verifier bank

// Per-environment verifier state: achievement verifiers are stateless, the
// counting verifiers of compositional goals hold per-episode counters.
class VerifierBank {
 public:
  explicit VerifierBank(const GoalCatalog* catalog) : catalog_(catalog) {}

  void reset_episode();
  // all catalog goals fired by this transition (elementary goals fire on
  // their action; compositional fire on the n-th base completion)
  std::vector<GoalId> fired(const PrevSummary& prev, Action a, const WorldState& next);
  bool goal_fired(GoalId id, const PrevSummary& prev, Action a, const WorldState& next);

 private:
  const GoalCatalog* catalog_;
  std::unordered_map<GoalId, int> counters_;
};

}  // namespace craftrl
