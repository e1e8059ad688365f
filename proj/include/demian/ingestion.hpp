#pragma once

// Demonstration-episode metadata, validation, and single-primitive splitting.
// Frames are referenced by index only; no pixel data passes through here.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "demian/error.hpp"
#include "demian/jsonl.hpp"

namespace demian {

using nlohmann::json;

enum class Dataset { robocasa365, molmobot, egoverse };

constexpr std::string_view to_string(Dataset d) {
  switch (d) {
    case Dataset::robocasa365: return "robocasa365";
    case Dataset::molmobot: return "molmobot";
    case Dataset::egoverse: return "egoverse";
  }
  return "?";
}

inline Dataset parse_dataset(std::string_view s) {
  for (Dataset d : {Dataset::robocasa365, Dataset::molmobot, Dataset::egoverse}) {
    if (to_string(d) == s) return d;
  }
  throw ValidationError("unknown dataset '" + std::string(s) + "'");
}

struct PrimitiveSpan {
  std::string label;
  int start_frame = 0;
  int end_frame = 0;

  friend bool operator==(const PrimitiveSpan&, const PrimitiveSpan&) = default;
};

struct EpisodeMeta {
  std::string episode_id;
  Dataset dataset = Dataset::robocasa365;
  int frame_count = 1;
  std::string task_label;
  // Benchmark task key (e.g. "CloseFridge"). Falls back to task_label.
  std::optional<std::string> task_id;
  std::string scene_descriptor;
  std::vector<std::string> object_list;
  std::vector<PrimitiveSpan> primitive_spans;

  const std::string& task_key() const { return task_id ? *task_id : task_label; }

  friend bool operator==(const EpisodeMeta&, const EpisodeMeta&) = default;
};

struct ContextBlock {
  std::string task_description;
  std::string scene_descriptor;
  std::vector<std::string> object_list;
  std::optional<std::string> prev_label;
  std::optional<std::string> next_label;
  // Labels of every primitive in the source episode, in order.
  std::vector<std::string> primitive_sequence;

  friend bool operator==(const ContextBlock&, const ContextBlock&) = default;
};

struct Segment {
  std::string segment_id;
  std::string episode_id;
  Dataset dataset = Dataset::robocasa365;
  int start_frame = 0;
  int end_frame = 1;
  std::string label;
  ContextBlock context;

  int frame_count() const { return end_frame - start_frame; }

  friend bool operator==(const Segment&, const Segment&) = default;
};

// ---- JSON --------------------------------------------------------------

inline void to_json(json& j, Dataset d) { j = std::string(to_string(d)); }
inline void from_json(const json& j, Dataset& d) { d = parse_dataset(j.get<std::string>()); }

inline void to_json(json& j, const PrimitiveSpan& s) {
  j = json{{"label", s.label}, {"start_frame", s.start_frame}, {"end_frame", s.end_frame}};
}

inline void from_json(const json& j, PrimitiveSpan& s) {
  // Accept both {"label":..} objects and [label, start, end] triples.
  if (j.is_array()) {
    if (j.size() != 3) throw ValidationError("primitive span triple must have 3 elements");
    s.label = j.at(0).get<std::string>();
    s.start_frame = j.at(1).get<int>();
    s.end_frame = j.at(2).get<int>();
    return;
  }
  s.label = j.at("label").get<std::string>();
  s.start_frame = j.at("start_frame").get<int>();
  s.end_frame = j.at("end_frame").get<int>();
}

inline void to_json(json& j, const EpisodeMeta& e) {
  j = json{{"episode_id", e.episode_id},
           {"dataset", e.dataset},
           {"frame_count", e.frame_count},
           {"task_label", e.task_label},
           {"scene_descriptor", e.scene_descriptor},
           {"object_list", e.object_list},
           {"primitive_spans", e.primitive_spans}};
  if (e.task_id) j["task_id"] = *e.task_id;
}

inline void from_json(const json& j, EpisodeMeta& e) {
  static const std::set<std::string> kKnown = {
      "episode_id", "dataset", "frame_count", "task_label", "task_id",
      "scene_descriptor", "object_list", "primitive_spans"};
  if (!j.is_object()) throw ValidationError("episode record is not a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!kKnown.count(key)) throw ValidationError("unknown key '" + key + "'");
  }
  e.episode_id = j.at("episode_id").get<std::string>();
  e.dataset = j.at("dataset").get<Dataset>();
  e.frame_count = j.at("frame_count").get<int>();
  e.task_label = j.at("task_label").get<std::string>();
  e.task_id = j.contains("task_id") && !j["task_id"].is_null()
                  ? std::optional<std::string>(j["task_id"].get<std::string>())
                  : std::nullopt;
  e.scene_descriptor = j.value("scene_descriptor", std::string());
  e.object_list = j.value("object_list", std::vector<std::string>{});
  e.primitive_spans = j.value("primitive_spans", std::vector<PrimitiveSpan>{});
}

inline void to_json(json& j, const ContextBlock& c) {
  j = json{{"task_description", c.task_description},
           {"scene_descriptor", c.scene_descriptor},
           {"object_list", c.object_list},
           {"prev_label", c.prev_label ? json(*c.prev_label) : json(nullptr)},
           {"next_label", c.next_label ? json(*c.next_label) : json(nullptr)},
           {"primitive_sequence", c.primitive_sequence}};
}

inline void from_json(const json& j, ContextBlock& c) {
  auto opt = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<std::string>();
  };
  c.task_description = j.at("task_description").get<std::string>();
  c.scene_descriptor = j.value("scene_descriptor", std::string());
  c.object_list = j.value("object_list", std::vector<std::string>{});
  c.prev_label = opt("prev_label");
  c.next_label = opt("next_label");
  c.primitive_sequence = j.value("primitive_sequence", std::vector<std::string>{});
}

inline void to_json(json& j, const Segment& s) {
  j = json{{"segment_id", s.segment_id}, {"episode_id", s.episode_id},
           {"dataset", s.dataset},       {"start_frame", s.start_frame},
           {"end_frame", s.end_frame},   {"label", s.label},
           {"context", s.context}};
}

inline void from_json(const json& j, Segment& s) {
  s.segment_id = j.at("segment_id").get<std::string>();
  s.episode_id = j.at("episode_id").get<std::string>();
  s.dataset = j.at("dataset").get<Dataset>();
  s.start_frame = j.at("start_frame").get<int>();
  s.end_frame = j.at("end_frame").get<int>();
  s.label = j.at("label").get<std::string>();
  s.context = j.at("context").get<ContextBlock>();
}

// ---- validation and splitting ------------------------------------------

inline void validate(const EpisodeMeta& e) {
  auto fail = [&](const std::string& what) {
    throw ValidationError("episode '" + e.episode_id + "': " + what);
  };
  if (e.episode_id.empty()) throw ValidationError("episode_id is empty");
  if (e.frame_count < 1) fail("frame_count must be >= 1");
  int prev_end = 0;
  for (std::size_t i = 0; i < e.primitive_spans.size(); ++i) {
    const auto& s = e.primitive_spans[i];
    const std::string where = "span " + std::to_string(i) + " [" + std::to_string(s.start_frame) +
                              ", " + std::to_string(s.end_frame) + ")";
    if (s.start_frame < 0 || s.start_frame >= s.end_frame || s.end_frame > e.frame_count) {
      fail(where + " is outside [0, frame_count) or empty");
    }
    if (s.start_frame < prev_end) fail(where + " overlaps or precedes the previous span");
    prev_end = s.end_frame;
  }
}

inline std::string make_segment_id(std::string_view episode_id, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04zu", index);
  return std::string(episode_id) + "#" + buf;
}

// One segment per primitive span (neighbors from adjacent spans), or a single
// whole-episode segment when the episode has no spans.
inline std::vector<Segment> split_episode(const EpisodeMeta& ep) {
  validate(ep);
  ContextBlock base;
  base.task_description = ep.task_label;
  base.scene_descriptor = ep.scene_descriptor;
  base.object_list = ep.object_list;
  for (const auto& span : ep.primitive_spans) base.primitive_sequence.push_back(span.label);

  std::vector<Segment> out;
  if (ep.primitive_spans.empty()) {
    Segment seg{make_segment_id(ep.episode_id, 0), ep.episode_id, ep.dataset, 0,
                ep.frame_count, ep.task_label, base};
    out.push_back(std::move(seg));
    return out;
  }
  const auto& spans = ep.primitive_spans;
  out.reserve(spans.size());
  for (std::size_t i = 0; i < spans.size(); ++i) {
    Segment seg{make_segment_id(ep.episode_id, i), ep.episode_id, ep.dataset,
                spans[i].start_frame, spans[i].end_frame, spans[i].label, base};
    if (i > 0) seg.context.prev_label = spans[i - 1].label;
    if (i + 1 < spans.size()) seg.context.next_label = spans[i + 1].label;
    out.push_back(std::move(seg));
  }
  return out;
}

inline std::vector<Segment> split_corpus(const std::vector<EpisodeMeta>& episodes) {
  std::vector<Segment> out;
  for (const auto& ep : episodes) {
    auto segs = split_episode(ep);
    out.insert(out.end(), std::make_move_iterator(segs.begin()), std::make_move_iterator(segs.end()));
  }
  return out;
}

// ---- corpus loading -----------------------------------------------------

enum class OnRecordError { skip, abort };

struct RecordError {
  std::size_t line = 0;
  std::string episode_id;  // empty when the record was unreadable
  std::string message;
};

struct LoadResult {
  std::vector<EpisodeMeta> episodes;
  std::vector<RecordError> errors;
};

inline std::filesystem::path corpus_file(const std::filesystem::path& path, Dataset dataset) {
  if (std::filesystem::is_directory(path)) {
    return path / (std::string(to_string(dataset)) + ".jsonl");
  }
  return path;
}

// Loads one JSON-Lines metadata file (or <dir>/<dataset>.jsonl) and returns
// validated episodes sorted by episode_id.
inline LoadResult load_corpus(const std::filesystem::path& path, Dataset dataset,
                              OnRecordError on_error = OnRecordError::abort) {
  if (!std::filesystem::exists(path)) throw IoError("corpus path does not exist: " + path.string());
  LoadResult result;
  const auto file = corpus_file(path, dataset);
  if (std::filesystem::is_directory(path) && !std::filesystem::exists(file)) return result;

  std::set<std::string> seen;
  jsonl::for_each_line(file, [&](std::size_t line_no, const std::string& line) {
    RecordError err{line_no, {}, {}};
    try {
      const json j = json::parse(line);
      if (j.is_object() && j.contains("episode_id") && j["episode_id"].is_string()) {
        err.episode_id = j["episode_id"].get<std::string>();
      }
      auto ep = j.get<EpisodeMeta>();
      if (ep.dataset != dataset) {
        throw ValidationError("dataset '" + std::string(to_string(ep.dataset)) +
                              "' does not match requested '" + std::string(to_string(dataset)) + "'");
      }
      validate(ep);
      if (!seen.insert(ep.episode_id).second) throw ValidationError("duplicate episode_id");
      result.episodes.push_back(std::move(ep));
      return;
    } catch (const json::exception& e) {
      err.message = e.what();
    } catch (const ValidationError& e) {
      err.message = e.what();
    }
    if (on_error == OnRecordError::abort) {
      throw ValidationError(file.string() + ":" + std::to_string(line_no) + " (episode '" +
                            err.episode_id + "'): " + err.message);
    }
    result.errors.push_back(std::move(err));
  });
  std::sort(result.episodes.begin(), result.episodes.end(),
            [](const EpisodeMeta& a, const EpisodeMeta& b) { return a.episode_id < b.episode_id; });
  return result;
}

}  // namespace demian
