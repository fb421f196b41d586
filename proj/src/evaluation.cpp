#include "craftrl/evaluation.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include "craftrl/world.hpp"

namespace craftrl {

double crafter_score(const std::vector<double>& sr_percent) {
  if (sr_percent.empty()) throw std::invalid_argument("crafter_score: empty input");
  double acc = 0.0;
  for (double sr : sr_percent) {
    if (sr < 0.0 || sr > 100.0)
      throw std::invalid_argument("crafter_score: success rate outside [0,100]");
    acc += std::log1p(sr);
  }
  return std::expm1(acc / static_cast<double>(sr_percent.size()));
}

double synonym_score(const std::vector<std::vector<double>>& groups) {
  if (groups.empty()) throw std::invalid_argument("synonym_score: empty input");
  double acc = 0.0;
  for (const auto& g : groups) {
    if (g.empty()) throw std::invalid_argument("synonym_score: empty synonym group");
    double inner = 0.0;
    for (double sr : g) {
      if (sr < 0.0 || sr > 100.0)
        throw std::invalid_argument("synonym_score: success rate outside [0,100]");
      inner += std::log1p(sr);
    }
    acc += inner / static_cast<double>(g.size());
  }
  return std::expm1(acc / static_cast<double>(groups.size()));
}

std::optional<int64_t> steps_to_mastery(const std::vector<std::pair<int64_t, double>>& series,
                                        double threshold) {
  for (const auto& [step, sr] : series)
    if (sr > threshold) return step;
  return std::nullopt;
}

SkillCallHistogram skill_call_histogram(const std::vector<std::vector<std::string>>& per_traj,
                                        const GoalCatalog& catalog,
                                        const std::vector<std::string>& tracked) {
  SkillCallHistogram h;
  h.trajectories = static_cast<int64_t>(per_traj.size());
  if (per_traj.empty()) return h;
  std::map<std::string, int64_t> counts;
  for (const auto& traj : per_traj) {
    for (const auto& raw : traj) {
      std::string name = raw;
      if (name.rfind("move ", 0) == 0) name = "move";
      bool is_tracked = name == "move";
      for (const auto& t : tracked)
        if (t == name) is_tracked = true;
      if (!is_tracked) {
        const Goal* g = catalog.find_text(raw);
        bool elementary = g && g->kind == GoalKind::elementary;
        name = elementary ? "untracked_ea" : "untracked_sg";
      }
      ++counts[name];
      h.total_calls += 1.0;
    }
  }
  for (const auto& [k, v] : counts)
    h.mean_calls[k] = static_cast<double>(v) / static_cast<double>(h.trajectories);
  return h;
}

void export_plot_tables(const std::string& metrics_path, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<nlohmann::json> records;
  if (std::filesystem::exists(metrics_path)) records = read_metrics(metrics_path);
  std::vector<nlohmann::json> evals = filter_kind(records, "eval");

  {
    std::ofstream f(out_dir + "/success_rates.tsv");
    f << "step\tgoal\tsuccess_rate\n";
    for (const auto& r : evals)
      for (const auto& [goal, sr] : r.at("success_rate").items())
        f << r.at("step").get<int64_t>() << "\t" << goal << "\t" << sr.get<double>() << "\n";
  }
  {
    std::ofstream f(out_dir + "/crafter_score.tsv");
    f << "step\tcrafter_score\n";
    for (const auto& r : evals)
      f << r.at("step").get<int64_t>() << "\t" << r.at("crafter_score").get<double>() << "\n";
  }
  {
    std::map<std::string, std::vector<std::pair<int64_t, double>>> series;
    for (const auto& r : evals)
      for (const auto& [goal, sr] : r.at("success_rate").items())
        series[goal].push_back({r.at("step").get<int64_t>(), sr.get<double>()});
    std::ofstream f(out_dir + "/difficulty_vs_mastery.tsv");
    f << "goal\tdifficulty\tsteps_to_mastery\n";
    for (const auto& [goal, pts] : series) {
      auto m = steps_to_mastery(pts, 0.8);
      f << goal << "\t" << difficulty(goal) << "\t" << (m ? std::to_string(*m) : "none")
        << "\n";
    }
  }
  {
    std::ofstream f(out_dir + "/skill_calls.tsv");
    f << "step\tgoal\tmean_hl_calls_success\n";
    for (const auto& r : evals)
      if (r.contains("mean_hl_calls_success"))
        for (const auto& [goal, v] : r.at("mean_hl_calls_success").items())
          f << r.at("step").get<int64_t>() << "\t" << goal << "\t" << v.get<double>() << "\n";
  }
}

nlohmann::ordered_json EvalReport::to_json(const GoalCatalog& catalog) const {
  nlohmann::ordered_json j;
  j["env_steps"] = env_steps;
  j["cycle"] = cycle;
  nlohmann::ordered_json per_goal = nlohmann::ordered_json::object();
  nlohmann::ordered_json calls = nlohmann::ordered_json::object();
  for (size_t i = 0; i < goals.size(); ++i) {
    per_goal[catalog.goal(goals[i]).text] = success_rate[i];
    calls[catalog.goal(goals[i]).text] = mean_hl_calls_success[i];
  }
  j["success_rate"] = per_goal;
  j["mean_hl_calls_success"] = calls;
  j["crafter_score"] = crafter;
  return j;
}

}  // namespace craftrl
