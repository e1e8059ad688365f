#pragma once

// Discrete-event simulation of instruction delivery. The policy emits H-step
// chunks just in time on a fixed cadence; the instructor answers after a
// sampled latency; in async mode the answer is spliced in at the next chunk
// boundary, in sync mode the first chunk waits for it.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <ostream>
#include <queue>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "demian/error.hpp"
#include "demian/rng.hpp"
#include "demian/runtime/latency.hpp"
#include "demian/runtime/stubs.hpp"

namespace demian {

enum class DeliveryMode { baseline, sync, async };

constexpr std::string_view to_string(DeliveryMode m) {
  switch (m) {
    case DeliveryMode::baseline: return "baseline";
    case DeliveryMode::sync: return "sync";
    case DeliveryMode::async: return "async";
  }
  return "?";
}

inline DeliveryMode parse_delivery_mode(std::string_view s) {
  for (auto m : {DeliveryMode::baseline, DeliveryMode::sync, DeliveryMode::async}) {
    if (to_string(m) == s) return m;
  }
  throw ValidationError("unknown mode '" + std::string(s) + "'");
}

// Default step duration; a calibration choice, not a measured value.
inline constexpr Nanos kDefaultStepDuration{85'000'000};

struct RolloutConfig {
  int chunk_horizon = 8;
  Nanos step_duration = kDefaultStepDuration;
  int max_steps = 400;
  DeliveryMode mode = DeliveryMode::async;
  LatencyModel latency = ConstantLatency{0.0};
  std::uint64_t seed = 0;

  void validate() const {
    if (chunk_horizon < 1) throw ConfigError("chunk horizon must be >= 1");
    if (step_duration.count() <= 0) throw ConfigError("step duration must be > 0");
    if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
  }
};

enum class EventKind {
  instruction_requested,
  instruction_ready,
  chunk_generated,
  instruction_injected,
  step_executed,
  rollout_end,
};

constexpr std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::instruction_requested: return "instruction_requested";
    case EventKind::instruction_ready: return "instruction_ready";
    case EventKind::chunk_generated: return "chunk_generated";
    case EventKind::instruction_injected: return "instruction_injected";
    case EventKind::step_executed: return "step_executed";
    case EventKind::rollout_end: return "rollout_end";
  }
  return "?";
}

struct TraceEvent {
  Nanos time{0};
  EventKind kind = EventKind::rollout_end;
  nlohmann::json payload = nlohmann::json::object();
};

struct PromptChange {
  Nanos time{0};
  std::string prompt;
};

struct RolloutTrace {
  DeliveryMode mode = DeliveryMode::baseline;
  std::vector<TraceEvent> events;
  std::optional<int> injected_step;
  std::optional<Nanos> injected_time;
  std::optional<Nanos> latency;  // sampled instructor latency (absent in baseline)
  Nanos wall_clock{0};
  std::vector<PromptChange> prompt_history;
  std::optional<bool> success;

  std::vector<Nanos> step_times() const {
    std::vector<Nanos> out;
    for (const auto& e : events) {
      if (e.kind == EventKind::step_executed) out.push_back(e.time);
    }
    return out;
  }
};

inline nlohmann::json to_json(const TraceEvent& e) {
  return {{"t_ns", e.time.count()},
          {"t", nanos_to_seconds(e.time)},
          {"kind", std::string(to_string(e.kind))},
          {"payload", e.payload}};
}

inline void write_trace_jsonl(std::ostream& out, const RolloutTrace& trace, long episode = -1) {
  for (const auto& e : trace.events) {
    auto j = to_json(e);
    if (episode >= 0) j["episode"] = episode;
    out << j.dump() << '\n';
  }
}

inline RolloutTrace run_rollout(const RolloutConfig& cfg, PolicyStub& policy, const std::string& task_prompt,
                                InstructorStub& instructor) {
  cfg.validate();
  enum Rank { kRequested, kReady, kChunk, kStep, kEnd };
  struct Pending {
    Nanos time;
    int rank;
    int index;
    bool operator>(const Pending& o) const {
      return std::tie(time, rank, index) > std::tie(o.time, o.rank, o.index);
    }
  };
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> queue;

  Rng rng(derive_seed(cfg.seed, 0));
  Rng outcome_rng(derive_seed(cfg.seed, 1));
  // Drawn in every mode so one seed gives one latency across modes.
  const Nanos latency = cfg.latency.sample(rng);
  const bool instructed = cfg.mode != DeliveryMode::baseline;
  const Nanos offset = cfg.mode == DeliveryMode::sync ? latency : Nanos(0);
  const Nanos dt = cfg.step_duration;
  const int h = cfg.chunk_horizon;
  const int n_chunks = (cfg.max_steps + h - 1) / h;

  if (instructed) {
    queue.push({Nanos(0), kRequested, 0});
    queue.push({latency, kReady, 0});
  }
  for (int k = 0; k < n_chunks; ++k) queue.push({offset + dt * (static_cast<long long>(k) * h), kChunk, k});
  for (int s = 1; s <= cfg.max_steps; ++s) queue.push({offset + dt * (s - 1), kStep, s});
  const Nanos end = offset + dt * cfg.max_steps;
  queue.push({end, kEnd, 0});

  RolloutTrace trace;
  trace.mode = cfg.mode;
  if (instructed) trace.latency = latency;
  std::string prompt = task_prompt;
  std::string instruction;
  bool ready = false;
  bool ended = false;
  trace.prompt_history.push_back({Nanos(0), prompt});

  while (!queue.empty()) {
    const Pending ev = queue.top();
    queue.pop();
    switch (ev.rank) {
      case kRequested:
        trace.events.push_back({ev.time, EventKind::instruction_requested, {{"task_prompt", task_prompt}}});
        break;
      case kReady:
        instruction = instructor.instruct(task_prompt);
        ready = true;
        trace.events.push_back({ev.time,
                                EventKind::instruction_ready,
                                {{"latency", nanos_to_seconds(latency)}, {"instruction", instruction},
                                 {"after_end", ended}}});
        break;
      case kChunk: {
        const int first_step = ev.index * h + 1;
        if (ready && !trace.injected_step) {
          prompt = compose_prompt(task_prompt, instruction);
          trace.injected_step = first_step;
          trace.injected_time = cfg.mode == DeliveryMode::sync ? Nanos(0) : latency;
          trace.prompt_history.push_back({ev.time, prompt});
          trace.events.push_back({ev.time, EventKind::instruction_injected,
                                  {{"step", first_step}, {"prompt", prompt}}});
        }
        policy.on_chunk(ev.index, first_step, prompt);
        trace.events.push_back({ev.time,
                                EventKind::chunk_generated,
                                {{"chunk", ev.index},
                                 {"first_step", first_step},
                                 {"steps", std::min(h, cfg.max_steps - first_step + 1)},
                                 {"instructed", trace.injected_step.has_value()}}});
        break;
      }
      case kStep:
        trace.events.push_back({ev.time, EventKind::step_executed, {{"step", ev.index}}});
        break;
      case kEnd:
        ended = true;
        trace.wall_clock = ev.time;
        trace.events.push_back({ev.time, EventKind::rollout_end, {{"steps", cfg.max_steps}}});
        break;
    }
  }

  trace.success = policy.finish({cfg.max_steps, trace.injected_step}, outcome_rng);
  return trace;
}

struct TraceSummary {
  long traces = 0;
  long injected = 0;
  long never_injected = 0;
  std::optional<double> mean_injected_step;
  std::optional<double> median_injected_step;
  std::optional<double> mean_injected_time;  // seconds
  std::optional<double> median_injected_time;
  double mean_wall_clock = 0.0;
  std::optional<double> success_rate;  // only when every trace reports success
};

namespace detail {

inline double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double median_of(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const auto n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace detail

inline TraceSummary summarize_traces(const std::vector<RolloutTrace>& traces) {
  if (traces.empty()) throw ValidationError("summarize_traces: no traces");
  TraceSummary s;
  s.traces = static_cast<long>(traces.size());
  std::vector<double> steps, times;
  double wall = 0.0;
  long successes = 0;
  bool all_report = true;
  for (const auto& t : traces) {
    wall += nanos_to_seconds(t.wall_clock);
    if (t.injected_step) {
      steps.push_back(*t.injected_step);
      times.push_back(nanos_to_seconds(t.injected_time.value_or(Nanos(0))));
    } else if (t.mode != DeliveryMode::baseline) {
      ++s.never_injected;
    }
    if (t.success) {
      successes += *t.success ? 1 : 0;
    } else {
      all_report = false;
    }
  }
  s.injected = static_cast<long>(steps.size());
  s.mean_wall_clock = wall / static_cast<double>(traces.size());
  if (!steps.empty()) {
    s.mean_injected_step = detail::mean_of(steps);
    s.median_injected_step = detail::median_of(steps);
    s.mean_injected_time = detail::mean_of(times);
    s.median_injected_time = detail::median_of(times);
  }
  if (all_report) s.success_rate = static_cast<double>(successes) / static_cast<double>(traces.size());
  return s;
}

inline nlohmann::json to_json(const TraceSummary& s) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"traces", s.traces},
          {"injected", s.injected},
          {"never_injected", s.never_injected},
          {"mean_injected_step", opt(s.mean_injected_step)},
          {"median_injected_step", opt(s.median_injected_step)},
          {"mean_injected_time", opt(s.mean_injected_time)},
          {"median_injected_time", opt(s.median_injected_time)},
          {"mean_wall_clock", s.mean_wall_clock},
          {"success_rate", opt(s.success_rate)}};
}

}  // namespace demian
