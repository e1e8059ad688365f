#pragma once

// Deterministic stand-in for a VLM endpoint. Scripted (segment, aspect) keys
// replay a sequence of outcomes; anything unscripted gets a valid caption
// derived from a seeded hash of the key.

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "demian/annotation/schema.hpp"
#include "demian/aspect.hpp"
#include "demian/rng.hpp"
#include "demian/vlm/client.hpp"

namespace demian {

struct MockOutcome {
  enum class Kind { caption, raw, error };

  Kind kind = Kind::caption;
  std::string text;  // caption (wrapped in the schema) or raw completion text
  TransportErrorKind error = TransportErrorKind::server;
  int status = 0;
  std::optional<double> latency;  // seconds of (virtual) service time

  static MockOutcome caption(std::string c) {
    MockOutcome o;
    o.text = std::move(c);
    return o;
  }
  static MockOutcome raw(std::string r) {
    MockOutcome o;
    o.kind = Kind::raw;
    o.text = std::move(r);
    return o;
  }
  static MockOutcome failure(TransportErrorKind k, int status = 0) {
    MockOutcome o;
    o.kind = Kind::error;
    o.error = k;
    o.status = status;
    return o;
  }
};

struct MockScript {
  using Key = std::pair<std::string, AspectKind>;

  std::uint64_t seed = 0;
  int input_tokens = 8200;
  double default_latency = 0.0;
  // Outcomes are consumed one per call; the last one repeats.
  std::map<Key, std::vector<MockOutcome>> entries;

  void add(const std::string& segment_id, AspectKind aspect, std::vector<MockOutcome> outcomes) {
    entries[{segment_id, aspect}] = std::move(outcomes);
  }
};

namespace detail {

inline TransportErrorKind parse_error_kind(const std::string& s) {
  for (auto k : {TransportErrorKind::rate_limited, TransportErrorKind::server,
                 TransportErrorKind::client, TransportErrorKind::timeout,
                 TransportErrorKind::network}) {
    if (to_string(k) == s) return k;
  }
  throw ValidationError("unknown mock error kind '" + s + "'");
}

}  // namespace detail

// {"seed": 1, "input_tokens": 8200, "entries": [{"segment_id": "ep#0000",
//   "aspect": "arm_pose", "outcomes": [{"error": "server_error", "status": 503},
//   {"caption": "..."}, {"raw": "..."}]}]}
inline MockScript load_mock_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mock script " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("mock script " + path.string() + ": " + e.what());
  }
  MockScript script;
  script.seed = j.value("seed", std::uint64_t{0});
  script.input_tokens = j.value("input_tokens", 8200);
  script.default_latency = j.value("latency", 0.0);
  for (const auto& e : j.value("entries", nlohmann::json::array())) {
    std::vector<MockOutcome> outcomes;
    for (const auto& o : e.at("outcomes")) {
      MockOutcome m;
      if (o.contains("caption")) {
        m = MockOutcome::caption(o["caption"].get<std::string>());
      } else if (o.contains("raw")) {
        m = MockOutcome::raw(o["raw"].get<std::string>());
      } else if (o.contains("error")) {
        m = MockOutcome::failure(detail::parse_error_kind(o["error"].get<std::string>()),
                                 o.value("status", 0));
      } else {
        throw ValidationError("mock outcome needs one of caption/raw/error");
      }
      if (o.contains("latency")) m.latency = o["latency"].get<double>();
      outcomes.push_back(std::move(m));
    }
    script.add(e.at("segment_id").get<std::string>(), parse_aspect(e.at("aspect").get<std::string>()),
               std::move(outcomes));
  }
  return script;
}

// Hash-derived, always schema-valid caption (1-2 sentences).
inline std::string default_mock_caption(std::uint64_t seed, std::string_view segment_id, AspectKind aspect) {
  static const std::array<std::array<const char*, 4>, kNumAspects> kOpeners = {{
      {"The gripper reaches toward", "The arm moves steadily toward", "The gripper lowers onto",
       "The hand pulls on"},
      {"The counter holds", "A cabinet sits beside", "The workspace contains", "The sink is next to"},
      {"The arm starts raised above", "The gripper is open and level with", "The wrist is angled toward",
       "The elbow is bent beside"},
      {"The agent prepares to use", "This step sets up the next action on", "The goal here is to free",
       "The agent finishes with"},
  }};
  static const std::array<const char*, 6> kObjects = {"the handle", "the door", "the mug",
                                                      "the drawer", "the knob", "the lid"};
  static const std::array<const char*, 4> kFollowUps = {
      "It then closes around it.", "It keeps a steady pace.", "Nothing else moves.", ""};

  const std::uint64_t h = mix64(fnv1a(segment_id, mix64(seed)) ^ (index_of(aspect) + 1));
  std::string caption = kOpeners[index_of(aspect)][h % 4];
  caption += " ";
  caption += kObjects[(h >> 8) % kObjects.size()];
  caption += ".";
  if (const char* tail = kFollowUps[(h >> 16) % kFollowUps.size()]; *tail) {
    caption += " ";
    caption += tail;
  }
  return caption;
}

class MockTransport final : public Transport {
 public:
  MockTransport(MockScript script, Clock& clock) : script_(std::move(script)), clock_(clock) {}

  VlmResponse send(const VlmRequest& req) override {
    const AspectKind aspect = req.aspect.value_or(AspectKind::physical_motion);
    const MockScript::Key key{req.segment_id, aspect};
    std::optional<MockOutcome> outcome;
    {
      std::lock_guard lock(mu_);
      ++total_calls_;
      const long n = calls_[key]++;
      if (auto it = script_.entries.find(key); it != script_.entries.end() && !it->second.empty()) {
        const auto& seq = it->second;
        outcome = seq[std::min<std::size_t>(static_cast<std::size_t>(n), seq.size() - 1)];
      }
    }
    if (!outcome) outcome = MockOutcome::caption(default_mock_caption(script_.seed, req.segment_id, aspect));

    clock_.sleep_for(outcome->latency.value_or(script_.default_latency));
    if (outcome->kind == MockOutcome::Kind::error) {
      throw TransportError(outcome->error, outcome->status, "scripted mock failure");
    }
    VlmResponse resp;
    resp.raw_text = outcome->kind == MockOutcome::Kind::caption ? render_response(aspect, outcome->text)
                                                                : outcome->text;
    resp.input_tokens = script_.input_tokens;
    resp.output_tokens = estimate_tokens(resp.raw_text);
    return resp;
  }

  long calls(const std::string& segment_id, AspectKind aspect) const {
    std::lock_guard lock(mu_);
    auto it = calls_.find({segment_id, aspect});
    return it == calls_.end() ? 0 : it->second;
  }

  long total_calls() const {
    std::lock_guard lock(mu_);
    return total_calls_;
  }

 private:
  MockScript script_;
  Clock& clock_;
  mutable std::mutex mu_;
  std::map<MockScript::Key, long> calls_;
  long total_calls_ = 0;
};

}  // namespace demian
