#pragma once

// AnnotationRecord, the JSON-Lines record sink, the checkpoint file of
// completed (segment_id, aspect) pairs, and the failure ledger.

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "demian/aspect.hpp"
#include "demian/error.hpp"
#include "demian/jsonl.hpp"
#include "demian/vlm/clock.hpp"

namespace demian {

struct AnnotationRecord {
  std::string segment_id;
  AspectKind aspect = AspectKind::physical_motion;
  std::string caption;
  std::string model_id;
  int input_tokens = 0;
  int output_tokens = 0;
  std::string created_at;  // ISO-8601 UTC

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

struct FailureEntry {
  std::string segment_id;
  AspectKind aspect = AspectKind::physical_motion;
  std::string error_kind;
  std::string message;
};

using PairKey = std::pair<std::string, AspectKind>;

inline void to_json(nlohmann::json& j, const AnnotationRecord& r) {
  j = nlohmann::json{{"segment_id", r.segment_id},       {"aspect", std::string(to_string(r.aspect))},
                     {"caption", r.caption},             {"model_id", r.model_id},
                     {"input_tokens", r.input_tokens},   {"output_tokens", r.output_tokens},
                     {"created_at", r.created_at}};
}

inline void from_json(const nlohmann::json& j, AnnotationRecord& r) {
  r.segment_id = j.at("segment_id").get<std::string>();
  r.aspect = parse_aspect(j.at("aspect").get<std::string>());
  r.caption = j.at("caption").get<std::string>();
  r.model_id = j.value("model_id", std::string());
  r.input_tokens = j.value("input_tokens", 0);
  r.output_tokens = j.value("output_tokens", 0);
  r.created_at = j.value("created_at", std::string());
  if (r.input_tokens < 0 || r.output_tokens < 0) throw ValidationError("token counts must be >= 0");
}

inline void to_json(nlohmann::json& j, const FailureEntry& f) {
  j = nlohmann::json{{"segment_id", f.segment_id},
                     {"aspect", std::string(to_string(f.aspect))},
                     {"error_kind", f.error_kind},
                     {"message", f.message}};
}

inline void from_json(const nlohmann::json& j, FailureEntry& f) {
  f.segment_id = j.at("segment_id").get<std::string>();
  f.aspect = parse_aspect(j.at("aspect").get<std::string>());
  f.error_kind = j.at("error_kind").get<std::string>();
  f.message = j.value("message", std::string());
}

// Reads a record file written by JsonlRecordSink. A torn final line (writer
// killed mid-append) is ignored.
inline std::vector<AnnotationRecord> load_records(const std::filesystem::path& path) {
  std::vector<AnnotationRecord> out;
  if (!std::filesystem::exists(path)) return out;
  jsonl::for_each_line(
      path,
      [&](std::size_t line_no, const std::string& line) {
        try {
          out.push_back(nlohmann::json::parse(line).get<AnnotationRecord>());
        } catch (const nlohmann::json::exception& e) {
          throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
      },
      /*drop_unterminated_tail=*/true);
  return out;
}

// Checkpoint lines are "<segment_id>\t<aspect>\n".
inline std::set<PairKey> load_checkpoint(const std::filesystem::path& path) {
  std::set<PairKey> out;
  if (!std::filesystem::exists(path)) return out;
  jsonl::for_each_line(
      path,
      [&](std::size_t line_no, const std::string& line) {
        const auto tab = line.rfind('\t');
        const auto aspect = tab == std::string::npos ? std::nullopt : try_parse_aspect(line.substr(tab + 1));
        if (!aspect) {
          throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": bad checkpoint line");
        }
        out.emplace(line.substr(0, tab), *aspect);
      },
      /*drop_unterminated_tail=*/true);
  return out;
}

inline std::vector<FailureEntry> load_failures(const std::filesystem::path& path) {
  std::vector<FailureEntry> out;
  if (!std::filesystem::exists(path)) return out;
  for (const auto& j : jsonl::read_all(path)) out.push_back(j.get<FailureEntry>());
  return out;
}

// Destination for finished records. Implementations need not be thread-safe;
// the batch runner serializes all calls.
class RecordSink {
 public:
  virtual ~RecordSink() = default;
  virtual std::set<PairKey> existing_pairs() = 0;
  virtual void append(const AnnotationRecord& record) = 0;
};

class JsonlRecordSink final : public RecordSink {
 public:
  explicit JsonlRecordSink(std::filesystem::path path) : path_(std::move(path)) {}

  std::set<PairKey> existing_pairs() override {
    std::set<PairKey> out;
    for (const auto& r : load_records(path_)) out.emplace(r.segment_id, r.aspect);
    return out;
  }

  void append(const AnnotationRecord& record) override {
    if (!out_.is_open()) {
      jsonl::repair_unterminated_tail(path_);
      out_.open(path_, std::ios::binary | std::ios::app);
      if (!out_) throw IoError("cannot open record sink " + path_.string());
    }
    out_ << nlohmann::json(record).dump() << '\n';
    out_.flush();
    if (!out_) throw IoError("write to record sink failed: " + path_.string());
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

// Append-only line writer with crash repair on open; used for the checkpoint
// and the failure ledger.
class AppendLog {
 public:
  AppendLog() = default;
  explicit AppendLog(std::filesystem::path path) : path_(std::move(path)) {}

  void append_line(const std::string& line) {
    if (path_.empty()) return;
    if (!out_.is_open()) {
      jsonl::repair_unterminated_tail(path_);
      out_.open(path_, std::ios::binary | std::ios::app);
      if (!out_) throw IoError("cannot open " + path_.string());
    }
    out_ << line << '\n';
    out_.flush();
    if (!out_) throw IoError("write failed: " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

// Caption lookup by (segment_id, aspect). If a pair was annotated more than
// once the first record wins.
class AnnotationIndex {
 public:
  AnnotationIndex() = default;
  explicit AnnotationIndex(const std::vector<AnnotationRecord>& records) {
    for (const auto& r : records) add(r);
  }

  void add(const AnnotationRecord& r) { captions_.emplace(PairKey{r.segment_id, r.aspect}, r.caption); }

  const std::string* find(const std::string& segment_id, AspectKind aspect) const {
    auto it = captions_.find({segment_id, aspect});
    return it == captions_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return captions_.size(); }

 private:
  std::map<PairKey, std::string> captions_;
};

}  // namespace demian
