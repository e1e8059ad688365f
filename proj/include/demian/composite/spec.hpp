#pragma once

// Composite task specs and the scripted environment / done-flag stubs that
// drive them.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "demian/error.hpp"
#include "demian/rng.hpp"

namespace demian {

enum class PromptMode { fix, dynamic_gt, dynamic_instructor };

constexpr std::string_view to_string(PromptMode m) {
  switch (m) {
    case PromptMode::fix: return "fix";
    case PromptMode::dynamic_gt: return "dynamic-gt";
    case PromptMode::dynamic_instructor: return "dynamic-instructor";
  }
  return "?";
}

inline constexpr PromptMode kAllPromptModes[] = {PromptMode::fix, PromptMode::dynamic_gt,
                                                 PromptMode::dynamic_instructor};

inline PromptMode parse_prompt_mode(std::string_view s) {
  for (auto m : kAllPromptModes) {
    if (to_string(m) == s) return m;
  }
  if (s == "dynamic_gt") return PromptMode::dynamic_gt;
  if (s == "dynamic_instructor") return PromptMode::dynamic_instructor;
  throw ValidationError("unknown prompt mode '" + std::string(s) + "'");
}

struct Phase {
  std::string atomic_instruction;
  std::string lenient_trigger;
  std::string strict_checker;
};

struct CompositeTaskSpec {
  std::string task_id;
  std::string composite_description;
  std::vector<Phase> phases;
  // Task-level strict success predicate; defaults to the last phase's checker.
  std::string success_checker;

  const std::string& success_predicate() const {
    return success_checker.empty() ? phases.back().strict_checker : success_checker;
  }
};

// A latching predicate: once it fires at some step it holds from then on.
// `episodes` limits firing to the first n episode indices of a suite run,
// `probability` to a seeded coin flip; both may be keyed by prompt mode.
struct PredicateScript {
  int at_step = 1;
  int jitter = 0;
  std::string after;  // fires strictly after this predicate, and only if it fires
  std::map<std::string, long> episodes;     // mode name or "*" -> count
  std::map<std::string, double> probability;  // mode name or "*" -> p
};

class EnvStub {
 public:
  virtual ~EnvStub() = default;
  virtual bool has_predicate(const std::string& id) const = 0;
  virtual void reset(long episode_index, PromptMode mode, std::uint64_t seed) = 0;
  virtual bool holds(const std::string& id, int step) const = 0;
};

class ScriptedEnv final : public EnvStub {
 public:
  explicit ScriptedEnv(std::map<std::string, PredicateScript> predicates) : scripts_(std::move(predicates)) {
    for (const auto& [id, p] : scripts_) {
      if (!p.after.empty() && !scripts_.count(p.after)) {
        throw ValidationError("predicate '" + id + "' waits on unknown predicate '" + p.after + "'");
      }
    }
  }

  bool has_predicate(const std::string& id) const override { return scripts_.count(id) > 0; }

  void reset(long episode_index, PromptMode mode, std::uint64_t seed) override {
    fire_step_.clear();
    for (const auto& [id, _] : scripts_) resolve(id, episode_index, mode, seed, 0);
  }

  bool holds(const std::string& id, int step) const override {
    auto it = fire_step_.find(id);
    if (it == fire_step_.end()) throw LookupError("unknown predicate '" + id + "'");
    return it->second && step >= *it->second;
  }

  std::optional<int> fire_step(const std::string& id) const { return fire_step_.at(id); }

 private:
  template <class T>
  static const T* for_mode(const std::map<std::string, T>& m, PromptMode mode) {
    if (auto it = m.find(std::string(to_string(mode))); it != m.end()) return &it->second;
    if (auto it = m.find("*"); it != m.end()) return &it->second;
    return nullptr;
  }

  std::optional<int> resolve(const std::string& id, long episode, PromptMode mode, std::uint64_t seed, int depth) {
    if (auto it = fire_step_.find(id); it != fire_step_.end()) return it->second;
    if (depth > static_cast<int>(scripts_.size())) throw ValidationError("predicate cycle through '" + id + "'");
    const auto& p = scripts_.at(id);
    Rng rng(derive_seed(seed, fnv1a(id)));
    std::optional<int> step = p.at_step;
    if (p.jitter > 0) *step += static_cast<int>(rng.below(2 * static_cast<std::uint64_t>(p.jitter) + 1)) - p.jitter;
    *step = std::max(*step, 1);
    if (const long* n = for_mode(p.episodes, mode); n && episode >= *n) step.reset();
    if (const double* pr = for_mode(p.probability, mode); pr && step && !(rng.uniform() < *pr)) step.reset();
    if (step && !p.after.empty()) {
      const auto before = resolve(p.after, episode, mode, seed, depth + 1);
      if (!before) {
        step.reset();
      } else {
        step = std::max(*step, *before + 1);
      }
    }
    fire_step_[id] = step;
    return step;
  }

  std::map<std::string, PredicateScript> scripts_;
  std::map<std::string, std::optional<int>> fire_step_;
};

// The policy's done-flag: a scalar per step given how long the current
// phase prompt has been active.
class DonePolicy {
 public:
  virtual ~DonePolicy() = default;
  virtual double done(int step, int steps_in_phase) const = 0;
};

class ConstantDone final : public DonePolicy {
 public:
  explicit ConstantDone(double v) : v_(v) {}
  double done(int, int) const override { return v_; }

 private:
  double v_;
};

// Rises linearly from 0 to 1 over `steps` steps after each phase prompt.
class RampDone final : public DonePolicy {
 public:
  explicit RampDone(int steps) : steps_(std::max(steps, 1)) {}
  double done(int, int steps_in_phase) const override {
    return std::min(1.0, static_cast<double>(steps_in_phase) / steps_);
  }

 private:
  int steps_;
};

// Explicit per-step values (index = step - 1); the last value repeats.
class StreamDone final : public DonePolicy {
 public:
  explicit StreamDone(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw ValidationError("done stream is empty");
  }
  double done(int step, int) const override {
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(std::max(step, 1) - 1), values_.size() - 1);
    return values_[i];
  }

 private:
  std::vector<double> values_;
};

struct CompositeTask {
  CompositeTaskSpec spec;
  std::shared_ptr<EnvStub> env;
  std::shared_ptr<DonePolicy> done;
};

inline void validate(const CompositeTaskSpec& spec, const EnvStub& env) {
  if (spec.phases.size() < 2) throw ValidationError("task '" + spec.task_id + "' needs at least 2 phases");
  auto need = [&](const std::string& id) {
    if (!env.has_predicate(id)) {
      throw ValidationError("task '" + spec.task_id + "': predicate '" + id + "' is not registered");
    }
  };
  for (const auto& ph : spec.phases) {
    need(ph.lenient_trigger);
    need(ph.strict_checker);
  }
  need(spec.success_predicate());
}

inline std::shared_ptr<DonePolicy> done_policy_from_json(const nlohmann::json& j) {
  const auto kind = j.value("kind", std::string("constant"));
  if (kind == "constant") return std::make_shared<ConstantDone>(j.value("value", 1.0));
  if (kind == "ramp") return std::make_shared<RampDone>(j.value("steps", 20));
  if (kind == "stream") return std::make_shared<StreamDone>(j.at("values").get<std::vector<double>>());
  throw ValidationError("unknown done-flag kind '" + kind + "'");
}

inline PredicateScript predicate_from_json(const nlohmann::json& j) {
  static const std::set<std::string> keys = {"at_step", "jitter", "after", "episodes", "probability"};
  for (const auto& [k, _] : j.items()) {
    if (!keys.count(k)) throw ValidationError("unknown predicate key '" + k + "'");
  }
  PredicateScript p;
  p.at_step = j.value("at_step", 1);
  p.jitter = j.value("jitter", 0);
  p.after = j.value("after", std::string());
  auto keyed = [&](const char* key, auto& out) {
    if (!j.contains(key)) return;
    using V = typename std::decay_t<decltype(out)>::mapped_type;
    if (j[key].is_object()) {
      for (const auto& [mode, v] : j[key].items()) {
        if (mode != "*") parse_prompt_mode(mode);
        out[mode == "*" ? mode : std::string(to_string(parse_prompt_mode(mode)))] = v.template get<V>();
      }
    } else {
      out["*"] = j[key].template get<V>();
    }
  };
  keyed("episodes", p.episodes);
  keyed("probability", p.probability);
  return p;
}

// {"tasks": [{"task_id", "composite_description", "phases": [{"atomic_instruction",
//   "lenient_trigger", "strict_checker"}], "success_checker"?, "predicates": {id: {...}},
//   "done": {"kind": "constant"|"ramp"|"stream", ...}}]}
inline std::vector<CompositeTask> composite_suite_from_json(const nlohmann::json& j) {
  std::vector<CompositeTask> out;
  std::set<std::string> ids;
  for (const auto& t : j.at("tasks")) {
    CompositeTask task;
    task.spec.task_id = t.at("task_id").get<std::string>();
    if (!ids.insert(task.spec.task_id).second) throw ValidationError("duplicate task '" + task.spec.task_id + "'");
    task.spec.composite_description = t.at("composite_description").get<std::string>();
    for (const auto& ph : t.at("phases")) {
      task.spec.phases.push_back({ph.at("atomic_instruction").get<std::string>(),
                                  ph.at("lenient_trigger").get<std::string>(),
                                  ph.at("strict_checker").get<std::string>()});
    }
    task.spec.success_checker = t.value("success_checker", std::string());
    std::map<std::string, PredicateScript> predicates;
    for (const auto& [id, p] : t.at("predicates").items()) predicates[id] = predicate_from_json(p);
    task.env = std::make_shared<ScriptedEnv>(std::move(predicates));
    task.done = done_policy_from_json(t.value("done", nlohmann::json::object()));
    if (task.spec.phases.empty()) throw ValidationError("task '" + task.spec.task_id + "' has no phases");
    validate(task.spec, *task.env);
    out.push_back(std::move(task));
  }
  if (out.empty()) throw ValidationError("composite suite has no tasks");
  return out;
}

inline std::vector<CompositeTask> load_composite_suite(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open composite suite " + path.string());
  try {
    return composite_suite_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("composite suite " + path.string() + ": " + e.what());
  }
}

}  // namespace demian
