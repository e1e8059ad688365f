#pragma once

// Phase state machine for composite tasks and suite-level aggregation.

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "demian/composite/spec.hpp"
#include "demian/runtime/stubs.hpp"

namespace demian {

struct PhaseOutcome {
  int phase_index = 0;  // 1-based
  bool reached = false;
  std::optional<int> reached_step;
};

struct PromptEntry {
  int step = 1;   // first step executed under this prompt
  int phase = 1;  // 1-based phase index the prompt belongs to (0 in fix mode)
  std::string prompt;
};

struct CompositeEpisode {
  std::string task_id;
  PromptMode mode = PromptMode::fix;
  long episode_index = 0;
  std::vector<PhaseOutcome> phase_outcomes;
  bool full_success = false;
  std::optional<int> success_step;
  int steps_run = 0;
  std::vector<PromptEntry> prompt_history;
};

struct CompositeOptions {
  double done_threshold = 0.5;
  int max_steps = 1200;
  int chunk_horizon = 8;
};

inline CompositeEpisode run_composite_episode(const CompositeTaskSpec& spec, PromptMode mode, EnvStub& env,
                                              const DonePolicy& done, const CompositeOptions& opts,
                                              long episode_index, std::uint64_t seed,
                                              InstructorStub* instructor = nullptr) {
  if (!(opts.done_threshold > 0.0 && opts.done_threshold < 1.0)) {
    throw ConfigError("done threshold must be in (0, 1)");
  }
  if (opts.max_steps < 1 || opts.chunk_horizon < 1) throw ConfigError("max_steps and chunk horizon must be >= 1");
  if (mode == PromptMode::dynamic_instructor && !instructor) {
    throw ConfigError("dynamic-instructor mode needs an instructor");
  }
  validate(spec, env);
  env.reset(episode_index, mode, seed);

  CompositeEpisode ep;
  ep.task_id = spec.task_id;
  ep.mode = mode;
  ep.episode_index = episode_index;
  const int n_phases = static_cast<int>(spec.phases.size());
  for (int k = 1; k <= n_phases; ++k) ep.phase_outcomes.push_back({k, false, std::nullopt});

  auto phase_prompt = [&](int phase) {
    const auto& atomic = spec.phases[static_cast<std::size_t>(phase - 1)].atomic_instruction;
    if (mode == PromptMode::dynamic_instructor) return compose_prompt(atomic, instructor->instruct(atomic));
    return atomic;
  };

  const bool dynamic = mode != PromptMode::fix;
  int phase = 1;            // phase the state machine is in
  int prompt_phase = 1;     // phase whose prompt the policy currently sees
  int prompt_since = 1;     // step the active prompt took effect
  std::optional<std::string> pending;
  ep.prompt_history.push_back({1, dynamic ? 1 : 0, dynamic ? phase_prompt(1) : spec.composite_description});

  int next_milestone = 0;
  for (int step = 1; step <= opts.max_steps; ++step) {
    ep.steps_run = step;
    // A swap decided during the previous chunk lands on this chunk's first step.
    if (pending && (step - 1) % opts.chunk_horizon == 0) {
      prompt_phase = phase;
      prompt_since = step;
      ep.prompt_history.push_back({step, prompt_phase, *pending});
      pending.reset();
    }

    while (next_milestone < n_phases &&
           env.holds(spec.phases[static_cast<std::size_t>(next_milestone)].strict_checker, step)) {
      ep.phase_outcomes[static_cast<std::size_t>(next_milestone)].reached = true;
      ep.phase_outcomes[static_cast<std::size_t>(next_milestone)].reached_step = step;
      ++next_milestone;
    }
    if (env.holds(spec.success_predicate(), step)) {
      ep.full_success = true;
      ep.success_step = step;
      break;
    }

    if (dynamic && phase < n_phases) {
      const double flag = done.done(step, step - prompt_since + 1);
      const auto& trigger = spec.phases[static_cast<std::size_t>(phase - 1)].lenient_trigger;
      if (flag > opts.done_threshold && env.holds(trigger, step)) {
        ++phase;
        pending = phase_prompt(phase);
      }
    }
  }
  return ep;
}

// Episode seeds depend only on (seed, task, episode index), so every prompt
// mode sees the same environments.
inline std::uint64_t composite_episode_seed(std::uint64_t seed, const std::string& task_id, long episode) {
  return derive_seed(derive_seed(seed, fnv1a(task_id)), static_cast<std::uint64_t>(episode));
}

inline std::vector<CompositeEpisode> run_composite_suite(const std::vector<CompositeTask>& suite, PromptMode mode,
                                                         long episodes, const CompositeOptions& opts,
                                                         std::uint64_t seed, InstructorStub* instructor = nullptr) {
  if (episodes < 1) throw ValidationError("episodes must be >= 1");
  std::vector<CompositeEpisode> out;
  for (const auto& task : suite) {
    for (long e = 0; e < episodes; ++e) {
      out.push_back(run_composite_episode(task.spec, mode, *task.env, *task.done, opts, e,
                                          composite_episode_seed(seed, task.spec.task_id, e), instructor));
    }
  }
  return out;
}

struct CompositeRow {
  PromptMode mode = PromptMode::fix;
  double phase1 = 0.0;
  double phase2 = 0.0;
  double full = 0.0;
  long tasks = 0;
};

// Unweighted mean over tasks of per-task episode fractions, per mode.
inline std::vector<CompositeRow> aggregate_composite(
    const std::map<std::pair<std::string, PromptMode>, std::vector<CompositeEpisode>>& cells) {
  std::map<PromptMode, CompositeRow> rows;
  for (const auto& [key, eps] : cells) {
    const auto& [task, mode] = key;
    if (eps.empty()) {
      throw ValidationError("empty cell (" + task + ", " + std::string(to_string(mode)) + ")");
    }
    double p1 = 0, p2 = 0, full = 0;
    for (const auto& e : eps) {
      p1 += e.phase_outcomes.size() > 0 && e.phase_outcomes[0].reached;
      p2 += e.phase_outcomes.size() > 1 && e.phase_outcomes[1].reached;
      full += e.full_success;
    }
    const double n = static_cast<double>(eps.size());
    auto& row = rows[mode];
    row.mode = mode;
    row.phase1 += p1 / n;
    row.phase2 += p2 / n;
    row.full += full / n;
    ++row.tasks;
  }
  std::vector<CompositeRow> out;
  for (auto& [_, row] : rows) {
    row.phase1 /= static_cast<double>(row.tasks);
    row.phase2 /= static_cast<double>(row.tasks);
    row.full /= static_cast<double>(row.tasks);
    out.push_back(row);
  }
  return out;
}

inline std::map<std::pair<std::string, PromptMode>, std::vector<CompositeEpisode>> group_episodes(
    const std::vector<CompositeEpisode>& episodes) {
  std::map<std::pair<std::string, PromptMode>, std::vector<CompositeEpisode>> out;
  for (const auto& e : episodes) out[{e.task_id, e.mode}].push_back(e);
  return out;
}

inline nlohmann::json to_json(const CompositeEpisode& e) {
  nlohmann::json phases = nlohmann::json::array();
  for (const auto& p : e.phase_outcomes) {
    phases.push_back({{"phase", p.phase_index},
                      {"reached", p.reached},
                      {"reached_step", p.reached_step ? nlohmann::json(*p.reached_step) : nlohmann::json(nullptr)}});
  }
  nlohmann::json prompts = nlohmann::json::array();
  for (const auto& p : e.prompt_history) prompts.push_back({{"step", p.step}, {"phase", p.phase}, {"prompt", p.prompt}});
  return {{"task_id", e.task_id},
          {"mode", std::string(to_string(e.mode))},
          {"episode", e.episode_index},
          {"phases", phases},
          {"full_success", e.full_success},
          {"steps_run", e.steps_run},
          {"prompts", prompts}};
}

}  // namespace demian
