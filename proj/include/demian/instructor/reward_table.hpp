#pragma once

// Per-task success rates under each ground-truth aspect, plus the
// no-annotation baseline.

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "demian/aggregation/matrix.hpp"
#include "demian/aspect.hpp"
#include "demian/error.hpp"

namespace demian {

using AspectScores = std::array<double, kNumAspects>;

class RewardTable {
 public:
  RewardTable() = default;

  void add_task(const std::string& task, const AspectScores& w, double baseline) {
    for (double v : w) check_sr(task, v);
    check_sr(task, baseline);
    if (!index_.emplace(task, tasks_.size()).second) throw ValidationError("duplicate task '" + task + "'");
    tasks_.push_back(task);
    w_.push_back(w);
    baseline_.push_back(baseline);
  }

  const std::vector<std::string>& tasks() const { return tasks_; }
  bool contains(const std::string& task) const { return index_.count(task) > 0; }
  const AspectScores& w(const std::string& task) const { return w_[lookup(task)]; }
  double w(const std::string& task, AspectKind a) const { return w(task)[index_of(a)]; }
  double baseline(const std::string& task) const { return baseline_[lookup(task)]; }

 private:
  static void check_sr(const std::string& task, double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("task '" + task + "': success rate outside [0, 1]");
  }

  std::size_t lookup(const std::string& task) const {
    auto it = index_.find(task);
    if (it == index_.end()) throw LookupError("unknown task '" + task + "'");
    return it->second;
  }

  std::vector<std::string> tasks_;
  std::vector<AspectScores> w_;
  std::vector<double> baseline_;
  std::map<std::string, std::size_t> index_;
};

// Rows of `m` are conditions (the baseline row plus one per aspect, named by
// aspect), columns are tasks. Values are copied unchanged.
inline RewardTable build_reward_table(const ResultsMatrix& m, const std::string& baseline_row = "baseline") {
  std::vector<std::string> conditions{baseline_row};
  for (AspectKind a : kAllAspects) conditions.emplace_back(to_string(a));
  for (const auto& c : conditions) {
    if (!m.has_row(c)) throw ValidationError("reward table: condition '" + c + "' is missing");
  }
  RewardTable rt;
  for (const auto& task : m.cols()) {
    auto value = [&](const std::string& cond) {
      const auto& v = m.cell(cond, task);
      if (!v) throw ValidationError("reward table: missing cell (" + task + ", " + cond + ")");
      return *v;
    };
    AspectScores w{};
    for (AspectKind a : kAllAspects) w[index_of(a)] = value(std::string(to_string(a)));
    rt.add_task(task, w, value(baseline_row));
  }
  return rt;
}

// {"tasks": [...], "aspects": [...], "w": [[...], ...], "baseline": [...]}
inline nlohmann::json reward_table_to_json(const RewardTable& rt) {
  nlohmann::json aspects = nlohmann::json::array();
  for (AspectKind a : kAllAspects) aspects.push_back(std::string(to_string(a)));
  nlohmann::json w = nlohmann::json::array();
  nlohmann::json baseline = nlohmann::json::array();
  for (const auto& t : rt.tasks()) {
    w.push_back(rt.w(t));
    baseline.push_back(rt.baseline(t));
  }
  return {{"tasks", rt.tasks()}, {"aspects", aspects}, {"w", w}, {"baseline", baseline}};
}

inline RewardTable reward_table_from_json(const nlohmann::json& j) {
  const auto tasks = j.at("tasks").get<std::vector<std::string>>();
  const auto aspect_names = j.at("aspects").get<std::vector<std::string>>();
  const auto w = j.at("w").get<std::vector<std::vector<double>>>();
  const auto baseline = j.at("baseline").get<std::vector<double>>();
  if (aspect_names.size() != kNumAspects) throw ValidationError("reward table must list all 4 aspects");
  AspectSet seen;
  std::vector<AspectKind> order;
  for (const auto& name : aspect_names) {
    const auto a = parse_aspect(name);
    if (seen.contains(a)) throw ValidationError("reward table lists aspect '" + name + "' twice");
    seen.insert(a);
    order.push_back(a);
  }
  if (w.size() != tasks.size() || baseline.size() != tasks.size()) {
    throw ValidationError("reward table: w and baseline must have one entry per task");
  }
  RewardTable rt;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (w[t].size() != kNumAspects) {
      throw ValidationError("reward table: task '" + tasks[t] + "' needs 4 aspect entries");
    }
    AspectScores row{};
    for (std::size_t k = 0; k < kNumAspects; ++k) row[index_of(order[k])] = w[t][k];
    rt.add_task(tasks[t], row, baseline[t]);
  }
  return rt;
}

inline RewardTable load_reward_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open reward table " + path.string());
  try {
    return reward_table_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("reward table " + path.string() + ": " + e.what());
  }
}

}  // namespace demian
