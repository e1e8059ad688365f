#pragma once

// Per-segment annotation (one VLM call per aspect, schema-checked, retried
// with a corrective suffix) and the resumable, parallel batch runner.

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <set>
#include <span>
#include <stop_token>
#include <thread>
#include <vector>

#include "demian/annotation/frames.hpp"
#include "demian/annotation/prompts.hpp"
#include "demian/annotation/record.hpp"
#include "demian/annotation/schema.hpp"
#include "demian/ingestion.hpp"
#include "demian/vlm/client.hpp"

namespace demian {

struct PipelineOptions {
  int max_frames = kDefaultMaxFrames;
  int max_output_tokens = kDefaultMaxOutputTokens;
  int max_sentences = kDefaultMaxSentences;
  // Extra attempts after a completion fails the schema or the length cap.
  int caption_retries = 3;
};

struct AnnotateResult {
  std::vector<AnnotationRecord> records;
  std::vector<FailureEntry> failures;
};

inline AnnotateResult annotate_segment(const Segment& seg, const AspectSet& aspects, VlmClient& client,
                                       const FrameSource& frames, const Clock& clock,
                                       const PipelineOptions& opts = {}) {
  if (aspects.empty()) throw ValidationError("annotate_segment: aspect set is empty");
  const PromptSet prompt_set = prompt_set_for(seg.dataset);
  const auto indices = sample_frames(seg.frame_count(), opts.max_frames);

  VlmRequest req;
  req.frames = frames.resolve(seg, indices);
  req.system_text = std::string(kSystemPrompt);
  req.max_output_tokens = opts.max_output_tokens;
  req.segment_id = seg.segment_id;

  AnnotateResult result;
  for (AspectKind aspect : aspects.to_vector()) {
    req.aspect = aspect;
    const std::string base_prompt = build_prompt(seg, aspect, prompt_set, opts.max_sentences);
    std::optional<FailureEntry> failure;
    std::optional<CaptionErrorKind> last_rejection;
    for (int attempt = 0; attempt <= opts.caption_retries; ++attempt) {
      req.user_text = base_prompt;
      if (last_rejection) req.user_text += corrective_suffix(*last_rejection, opts.max_sentences);
      try {
        const VlmResponse resp = client.complete(req);
        AnnotationRecord rec;
        rec.segment_id = seg.segment_id;
        rec.aspect = aspect;
        rec.caption = parse_response(resp.raw_text, aspect, opts.max_sentences);
        rec.model_id = client.model_id();
        rec.input_tokens = resp.input_tokens;
        rec.output_tokens = resp.output_tokens;
        rec.created_at = format_utc(clock.now());
        result.records.push_back(std::move(rec));
        failure.reset();
        break;
      } catch (const CaptionError& e) {
        last_rejection = e.kind();
        failure = FailureEntry{seg.segment_id, aspect, std::string(to_string(e.kind())), e.what()};
      } catch (const TransportError& e) {
        // The client already spent its retry budget (or the error is permanent).
        failure = FailureEntry{seg.segment_id, aspect, std::string(to_string(e.kind())), e.what()};
        break;
      }
    }
    if (failure) result.failures.push_back(std::move(*failure));
  }
  return result;
}

struct BatchOptions {
  int workers = 4;
  PipelineOptions pipeline;
  std::filesystem::path checkpoint;      // required
  std::filesystem::path failure_ledger;  // optional
  std::stop_token stop;                  // checked between segments
};

struct BatchReport {
  long completed = 0;  // records written by this run
  long failed = 0;     // pairs ledgered after retry exhaustion
  long skipped = 0;    // pairs already present in the sink or checkpoint
  bool interrupted = false;

  friend bool operator==(const BatchReport&, const BatchReport&) = default;
};

// Annotates every (segment, aspect) pair not yet in the sink or checkpoint.
// Each record is flushed to the sink before its checkpoint line, so a crash
// at any point loses at most the calls in flight.
inline BatchReport run_batch(std::span<const Segment> segments, const AspectSet& aspects, VlmClient& client,
                             const FrameSource& frames, const Clock& clock, RecordSink& sink,
                             const BatchOptions& opts) {
  if (aspects.empty()) throw ValidationError("run_batch: aspect set is empty");
  if (opts.checkpoint.empty()) throw ConfigError("run_batch: checkpoint path is required");
  if (opts.workers < 1) throw ConfigError("run_batch: workers must be >= 1");
  {
    std::ofstream probe(opts.checkpoint, std::ios::app);
    if (!probe) throw IoError("checkpoint path is not writable: " + opts.checkpoint.string());
  }

  std::set<PairKey> done = load_checkpoint(opts.checkpoint);
  for (auto& key : sink.existing_pairs()) done.insert(key);

  struct Job {
    const Segment* segment;
    AspectSet aspects;
  };
  BatchReport report;
  std::vector<Job> jobs;
  std::set<std::string> seen_ids;
  for (const auto& seg : segments) {
    if (!seen_ids.insert(seg.segment_id).second) {
      throw ValidationError("duplicate segment_id '" + seg.segment_id + "'");
    }
    AspectSet missing;
    for (AspectKind a : aspects.to_vector()) {
      if (done.count({seg.segment_id, a})) {
        ++report.skipped;
      } else {
        missing.insert(a);
      }
    }
    if (!missing.empty()) jobs.push_back({&seg, missing});
  }

  AppendLog checkpoint(opts.checkpoint);
  AppendLog ledger(opts.failure_ledger);
  std::mutex writer_mu;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr first_error;

  auto commit = [&](const AnnotateResult& res) {
    std::lock_guard lock(writer_mu);
    for (const auto& rec : res.records) {
      sink.append(rec);
      checkpoint.append_line(rec.segment_id + "\t" + std::string(to_string(rec.aspect)));
      ++report.completed;
    }
    for (const auto& f : res.failures) {
      ledger.append_line(nlohmann::json(f).dump());
      ++report.failed;
    }
  };

  auto worker = [&] {
    while (!abort.load()) {
      if (opts.stop.stop_requested()) {
        std::lock_guard lock(writer_mu);
        report.interrupted = true;
        return;
      }
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        commit(annotate_segment(*jobs[i].segment, jobs[i].aspects, client, frames, clock, opts.pipeline));
      } catch (...) {
        std::lock_guard lock(writer_mu);
        if (!first_error) first_error = std::current_exception();
        abort.store(true);
      }
    }
  };

  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(opts.workers), jobs.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
  return report;
}

}  // namespace demian
