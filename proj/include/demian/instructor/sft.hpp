#pragma once

// Instructor SFT dataset: one example per drawn episode, target caption chosen
// by reward-weighted aspect sampling (or top-1), empty target on abstention.

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "demian/annotation/record.hpp"
#include "demian/ingestion.hpp"
#include "demian/instructor/sampling.hpp"
#include "demian/jsonl.hpp"

namespace demian {

inline constexpr int kNumCameraViews = 3;
inline constexpr std::array<const char*, kNumCameraViews> kCameraViews = {"left", "right", "wrist"};

struct SftExample {
  std::string task_id;
  std::array<std::string, kNumCameraViews> frame_refs;
  std::string task_description;
  std::string target_caption;  // "" encodes abstention
  Target target_aspect;

  friend bool operator==(const SftExample&, const SftExample&) = default;
};

inline void to_json(nlohmann::json& j, const SftExample& e) {
  j = {{"task_id", e.task_id},
       {"frame_refs", e.frame_refs},
       {"task_description", e.task_description},
       {"target_caption", e.target_caption},
       {"target_aspect", e.target_aspect ? nlohmann::json(std::string(to_string(*e.target_aspect)))
                                         : nlohmann::json(nullptr)}};
}

inline void from_json(const nlohmann::json& j, SftExample& e) {
  e.task_id = j.at("task_id").get<std::string>();
  const auto refs = j.at("frame_refs").get<std::vector<std::string>>();
  if (refs.size() != kNumCameraViews) throw ValidationError("frame_refs must have exactly 3 entries");
  std::copy(refs.begin(), refs.end(), e.frame_refs.begin());
  e.task_description = j.at("task_description").get<std::string>();
  e.target_caption = j.at("target_caption").get<std::string>();
  const auto& a = j.at("target_aspect");
  e.target_aspect = a.is_null() ? Target{} : Target{parse_aspect(a.get<std::string>())};
  if (e.target_caption.empty() != !e.target_aspect) {
    throw ValidationError("target_caption must be empty exactly when target_aspect is null");
  }
}

// Initial-observation frame of each camera view.
inline std::array<std::string, kNumCameraViews> initial_frame_refs(const std::string& episode_id) {
  std::array<std::string, kNumCameraViews> out;
  for (int i = 0; i < kNumCameraViews; ++i) out[i] = episode_id + "/" + kCameraViews[i] + "/frame_000000";
  return out;
}

enum class SftStrategy { softmax, top1 };

inline SftStrategy parse_sft_strategy(std::string_view s) {
  if (s == "softmax") return SftStrategy::softmax;
  if (s == "top1") return SftStrategy::top1;
  throw ValidationError("unknown strategy '" + std::string(s) + "'");
}

struct SftOptions {
  std::uint64_t seed = 0;
  long n_examples = 3200;
  SftStrategy strategy = SftStrategy::softmax;
  double temperature = 2.0;
  int top_k = 3;
};

struct SftSkip {
  std::string episode_id;
  AspectKind aspect;
};

struct SftResult {
  std::vector<SftExample> examples;
  std::vector<SftSkip> skipped;
};

// Episodes whose task is not in the reward table are never drawn. For a
// drawn episode the caption comes from its earliest segment annotated with
// the sampled aspect.
inline SftResult sample_sft_dataset(const RewardTable& rt, const AnnotationIndex& annotations,
                                    const std::vector<EpisodeMeta>& episodes, const SftOptions& opts) {
  if (opts.n_examples < 0) throw ValidationError("n_examples must be >= 0");
  struct Candidate {
    const EpisodeMeta* episode;
    std::vector<std::string> segment_ids;
  };
  std::vector<Candidate> pool;
  for (const auto& ep : episodes) {
    if (!rt.contains(ep.task_key())) continue;
    Candidate c{&ep, {}};
    for (const auto& seg : split_episode(ep)) c.segment_ids.push_back(seg.segment_id);
    pool.push_back(std::move(c));
  }
  SftResult result;
  if (opts.n_examples == 0) return result;
  if (pool.empty()) throw ValidationError("no episode belongs to a task in the reward table");

  std::map<std::string, AspectDistribution> dists;
  Rng rng(opts.seed);
  for (long i = 0; i < opts.n_examples; ++i) {
    const auto& c = pool[rng.below(pool.size())];
    const auto& task = c.episode->task_key();
    Target target;
    if (opts.strategy == SftStrategy::top1) {
      target = top1_target(rt, task);
    } else {
      auto it = dists.find(task);
      if (it == dists.end()) it = dists.emplace(task, aspect_distribution(rt, task, opts.temperature, opts.top_k)).first;
      target = it->second.sample(rng);
    }

    SftExample ex;
    ex.task_id = task;
    ex.frame_refs = initial_frame_refs(c.episode->episode_id);
    ex.task_description = c.episode->task_label;
    if (target) {
      const std::string* caption = nullptr;
      for (const auto& sid : c.segment_ids) {
        if ((caption = annotations.find(sid, *target))) break;
      }
      if (!caption || caption->empty()) {
        result.skipped.push_back({c.episode->episode_id, *target});
        continue;
      }
      ex.target_caption = *caption;
      ex.target_aspect = target;
    }
    result.examples.push_back(std::move(ex));
  }
  return result;
}

}  // namespace demian
