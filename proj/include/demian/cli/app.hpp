#pragma once

// Subcommand wiring for the `demian` binary. dispatch() is the whole program
// minus main(), so tests can drive it with string streams.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "demian/accounting.hpp"
#include "demian/aggregation/ops.hpp"
#include "demian/annotation/pipeline.hpp"
#include "demian/composite/runner.hpp"
#include "demian/error.hpp"
#include "demian/ingestion.hpp"
#include "demian/instructor/sft.hpp"
#include "demian/runtime/rollout.hpp"
#include "demian/vlm/mock.hpp"
#include "demian/vlm/openai.hpp"

namespace demian::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2 };

// Virtual start time for --mock runs (2026-01-01T00:00:00Z).
inline constexpr double kMockEpoch = 1767225600.0;

class Log {
 public:
  Log(std::ostream& err, const std::string& subcommand, const std::string& level) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, /*force_flush=*/true);
    logger_ = std::make_shared<spdlog::logger>("demian", sink);
    logger_->set_pattern(R"({"ts":"%Y-%m-%dT%H:%M:%S.%eZ","level":"%l","subcommand":)" +
                             nlohmann::json(subcommand).dump() + R"(,"message":%v})",
                         spdlog::pattern_time_type::utc);
    logger_->set_level(spdlog::level::from_str(level));
  }

  void info(const std::string& msg) { logger_->info("{}", nlohmann::json(msg).dump()); }
  void warn(const std::string& msg) { logger_->warn("{}", nlohmann::json(msg).dump()); }
  void error(const std::string& msg) { logger_->error("{}", nlohmann::json(msg).dump()); }

 private:
  std::shared_ptr<spdlog::logger> logger_;
};

inline std::string fmt_g(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
  return buf;
}

inline std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  for (auto& f : csv::split_line(s)) {
    auto t = csv::trim(f);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

struct AnnotateArgs {
  std::string corpus, dataset, aspects = "all", out, checkpoint, failures, endpoint, mock_script;
  std::string model = std::string(kDefaultModelId), on_error = "abort";
  bool mock = false;
  int workers = 4, max_retries = 3, caption_retries = 3, max_frames = kDefaultMaxFrames;
  int max_output_tokens = kDefaultMaxOutputTokens;
  double rate_limit = 4.0, timeout = 120.0;
  std::uint64_t seed = 0;
};

inline int run_annotate(const AnnotateArgs& a, std::ostream& out, Log& log) {
  const Dataset dataset = parse_dataset(a.dataset);
  const AspectSet aspects = AspectSet::parse(a.aspects);
  if (a.mock == !a.endpoint.empty()) throw ConfigError("exactly one of --mock or --endpoint is required");
  if (a.on_error != "skip" && a.on_error != "abort") throw ConfigError("--on-error must be skip or abort");

  const auto loaded =
      load_corpus(a.corpus, dataset, a.on_error == "skip" ? OnRecordError::skip : OnRecordError::abort);
  for (const auto& e : loaded.errors) {
    log.warn("skipped record line " + std::to_string(e.line) + " (" + e.episode_id + "): " + e.message);
  }
  const auto segments = split_corpus(loaded.episodes);
  log.info("loaded " + std::to_string(loaded.episodes.size()) + " episodes, " + std::to_string(segments.size()) +
           " segments");

  ClientConfig cc;
  cc.endpoint_url = a.endpoint;
  cc.model_id = a.model;
  cc.max_retries = a.max_retries;
  cc.rate_limit = a.rate_limit;
  cc.timeout = a.timeout;
  cc.jitter_seed = a.seed;
  cc.validate();

  std::unique_ptr<Clock> io_clock;
  std::unique_ptr<Clock> stamp_clock;
  std::unique_ptr<Transport> transport;
  if (a.mock) {
    auto vc = std::make_unique<VirtualClock>(kMockEpoch);
    MockScript script = a.mock_script.empty() ? MockScript{} : load_mock_script(a.mock_script);
    if (a.mock_script.empty()) script.seed = a.seed;
    transport = std::make_unique<MockTransport>(std::move(script), *vc);
    io_clock = std::move(vc);
    stamp_clock = std::make_unique<FrozenClock>(kMockEpoch);
  } else {
    cc.load_api_key_from_env();
    transport = std::make_unique<HttpTransport>(cc);
    io_clock = std::make_unique<SystemClock>();
  }
  RetryingClient client(cc, std::move(transport), *io_clock);
  StubFrameSource frames;
  JsonlRecordSink sink(a.out);

  BatchOptions opts;
  opts.workers = a.workers;
  opts.pipeline.max_frames = a.max_frames;
  opts.pipeline.max_output_tokens = a.max_output_tokens;
  opts.pipeline.caption_retries = a.caption_retries;
  opts.checkpoint = a.checkpoint.empty() ? a.out + ".ckpt" : a.checkpoint;
  opts.failure_ledger = a.failures.empty() ? a.out + ".failures.jsonl" : a.failures;

  const auto report = run_batch(segments, aspects, client, frames, stamp_clock ? *stamp_clock : *io_clock, sink, opts);
  log.info("batch finished after " + std::to_string(client.attempts()) + " VLM attempts");
  if (report.failed > 0) {
    log.warn(std::to_string(report.failed) + " (segment, aspect) pairs failed; see " + opts.failure_ledger.string());
  }
  out << nlohmann::json{{"segments", segments.size()},
                        {"completed", report.completed},
                        {"failed", report.failed},
                        {"skipped", report.skipped},
                        {"interrupted", report.interrupted},
                        {"record_errors", loaded.errors.size()}}
             .dump()
      << '\n';
  return kOk;
}

struct SftArgs {
  std::string reward_table, annotations, episodes, dataset = "robocasa365", strategy = "softmax", out;
  std::uint64_t seed = 0;
  long n = 3200;
  double temperature = 2.0;
  int top_k = 3;
};

inline int run_sft(const SftArgs& a, std::ostream& out, Log& log) {
  const RewardTable rt = std::filesystem::path(a.reward_table).extension() == ".csv"
                             ? build_reward_table(read_matrix_csv(a.reward_table))
                             : load_reward_table(a.reward_table);
  if (!std::filesystem::exists(a.annotations)) throw IoError("annotations not found: " + a.annotations);
  const AnnotationIndex index(load_records(a.annotations));
  const auto episodes = load_corpus(a.episodes, parse_dataset(a.dataset)).episodes;

  SftOptions opts;
  opts.seed = a.seed;
  opts.n_examples = a.n;
  opts.strategy = parse_sft_strategy(a.strategy);
  opts.temperature = a.temperature;
  opts.top_k = a.top_k;
  const auto result = sample_sft_dataset(rt, index, episodes, opts);
  for (const auto& s : result.skipped) {
    log.warn("no " + std::string(to_string(s.aspect)) + " caption for episode " + s.episode_id);
  }
  long abstain = 0;
  for (const auto& e : result.examples) abstain += e.target_aspect ? 0 : 1;
  log.info("wrote " + std::to_string(result.examples.size()) + " examples (" + std::to_string(abstain) +
           " abstain, " + std::to_string(result.skipped.size()) + " skipped)");

  auto emit = [&](std::ostream& o) {
    for (const auto& e : result.examples) o << nlohmann::json(e).dump() << '\n';
  };
  if (a.out.empty() || a.out == "-") {
    emit(out);
  } else {
    std::ofstream f(a.out, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + a.out);
    emit(f);
    out << nlohmann::json{{"examples", result.examples.size()},
                          {"abstain", abstain},
                          {"skipped", result.skipped.size()}}
               .dump()
        << '\n';
  }
  return kOk;
}

struct SimulateArgs {
  std::string mode = "async", latency = "gaussian:1.87,0.05", trace, policy = "none";
  std::string task_prompt = "Open the fridge door.";
  int chunk = 8, steps = 400;
  long episodes = 1;
  double dt = 0.085;
  std::uint64_t seed = 0;
};

inline std::unique_ptr<PolicyStub> make_policy(const std::string& spec) {
  if (spec == "none") return std::make_unique<PolicyStub>();
  const auto colon = spec.find(':');
  const auto kind = spec.substr(0, colon);
  const auto args = colon == std::string::npos ? std::vector<std::string>{} : split_csv(spec.substr(colon + 1));
  try {
    if (kind == "deadline" && args.size() == 1) return std::make_unique<DeadlinePolicy>(std::stoi(args[0]));
    if (kind == "prompt" && args.size() == 2) {
      return std::make_unique<PromptSensitivePolicy>(std::stod(args[0]), std::stod(args[1]));
    }
  } catch (const std::logic_error&) {
  }
  throw ValidationError("bad --policy '" + spec + "' (none | deadline:STEP | prompt:P_TASK,P_INSTRUCTED)");
}

inline int run_simulate(const SimulateArgs& a, std::ostream& out, Log& log) {
  RolloutConfig cfg;
  cfg.mode = parse_delivery_mode(a.mode);
  cfg.latency = parse_latency(a.latency);
  cfg.chunk_horizon = a.chunk;
  if (!(a.dt > 0)) throw ConfigError("--dt must be > 0");
  cfg.step_duration = seconds_to_nanos(a.dt);
  cfg.max_steps = a.steps;
  cfg.validate();
  if (a.episodes < 1) throw ConfigError("--episodes must be >= 1");

  std::ofstream trace_out;
  if (!a.trace.empty()) {
    trace_out.open(a.trace, std::ios::binary | std::ios::trunc);
    if (!trace_out) throw IoError("cannot write " + a.trace);
  }
  TemplateInstructor instructor;
  std::vector<RolloutTrace> traces;
  for (long e = 0; e < a.episodes; ++e) {
    auto policy = make_policy(a.policy);
    cfg.seed = derive_seed(a.seed, static_cast<std::uint64_t>(e));
    traces.push_back(run_rollout(cfg, *policy, a.task_prompt, instructor));
    if (trace_out.is_open()) write_trace_jsonl(trace_out, traces.back(), e);
    traces.back().events.clear();
  }
  const auto summary = summarize_traces(traces);
  if (summary.never_injected > 0) {
    log.warn(std::to_string(summary.never_injected) + " rollouts ended before the instruction arrived");
  }
  auto j = to_json(summary);
  j["mode"] = std::string(to_string(cfg.mode));
  j["latency"] = cfg.latency.describe();
  j["chunk"] = cfg.chunk_horizon;
  j["dt"] = a.dt;
  j["steps"] = cfg.max_steps;
  out << j.dump() << '\n';
  return kOk;
}

struct CompositeArgs {
  std::string suite, mode = "all", episodes_out;
  long episodes = 20;
  int max_steps = 1200, chunk = 8;
  double threshold = 0.5;
  std::uint64_t seed = 0;
};

inline int run_composite(const CompositeArgs& a, std::ostream& out, Log& log) {
  const auto suite = load_composite_suite(a.suite);
  std::vector<PromptMode> modes;
  if (a.mode == "all") {
    modes.assign(std::begin(kAllPromptModes), std::end(kAllPromptModes));
  } else {
    modes.push_back(parse_prompt_mode(a.mode));
  }
  CompositeOptions opts;
  opts.done_threshold = a.threshold;
  opts.max_steps = a.max_steps;
  opts.chunk_horizon = a.chunk;
  TemplateInstructor instructor;

  std::ofstream ep_out;
  if (!a.episodes_out.empty()) {
    ep_out.open(a.episodes_out, std::ios::binary | std::ios::trunc);
    if (!ep_out) throw IoError("cannot write " + a.episodes_out);
  }
  std::vector<CompositeEpisode> all;
  for (auto mode : modes) {
    auto eps = run_composite_suite(suite, mode, a.episodes, opts, a.seed, &instructor);
    for (const auto& e : eps) {
      if (ep_out.is_open()) ep_out << to_json(e).dump() << '\n';
    }
    all.insert(all.end(), eps.begin(), eps.end());
  }
  log.info("ran " + std::to_string(all.size()) + " episodes over " + std::to_string(suite.size()) + " tasks");
  out << "mode,tasks,phase1_sr,phase2_sr,full_sr\n";
  for (const auto& row : aggregate_composite(group_episodes(all))) {
    out << to_string(row.mode) << ',' << row.tasks << ',' << fmt_g(row.phase1) << ',' << fmt_g(row.phase2) << ','
        << fmt_g(row.full) << '\n';
  }
  return kOk;
}

struct CostArgs {
  double clips = 0, aspects = 1;
  CostModel model;
  std::vector<double> train_flops;
  bool annotated = false;
};

inline int run_cost(const CostArgs& a, std::ostream& out, Log&) {
  const double call = flops_per_call(a.model);
  char dollars[64];
  out << "flops_per_call: " << fmt_g(call) << '\n';
  out << "corpus_flops: " << fmt_g(corpus_flops(a.model, a.clips, a.aspects)) << '\n';
  std::snprintf(dollars, sizeof(dollars), "$%.6g", dollars_per_call(a.model));
  out << "dollars_per_call: " << dollars << '\n';
  std::snprintf(dollars, sizeof(dollars), "$%.2f", corpus_dollars(a.model, a.clips, a.aspects));
  out << "corpus_dollars: " << dollars << '\n';
  if (!a.train_flops.empty()) {
    std::vector<ComputePoint> pts;
    for (double f : a.train_flops) pts.push_back({f, a.annotated});
    const auto axis = compute_axis(pts, a.model, a.clips, a.aspects);
    for (std::size_t i = 0; i < axis.size(); ++i) {
      out << "total_flops[" << i << "]: " << fmt_g(axis[i]) << '\n';
    }
  }
  return kOk;
}

struct AggregateArgs {
  std::string matrix, oracle_over, oracle_id = "oracle", families, avg_col, out;
  std::optional<int> digits;
};

inline int run_aggregate(const AggregateArgs& a, std::ostream& out, Log& log) {
  const auto m = read_matrix_csv(a.matrix);
  AggregateRequest req;
  if (!a.families.empty()) req.families = load_family_spec(a.families);
  req.oracle_over = split_csv(a.oracle_over);
  req.oracle_id = a.oracle_id;
  req.avg_column = a.avg_col;
  const auto view = aggregate_view(m, req);
  log.info("summarized " + std::to_string(view.rows().size()) + " rows x " + std::to_string(view.cols().size()) +
           " columns");
  if (a.out.empty() || a.out == "-") {
    write_matrix_csv(out, view, a.digits);
  } else {
    std::ofstream f(a.out, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + a.out);
    write_matrix_csv(f, view, a.digits);
  }
  return kOk;
}

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app("Dense multi-aspect annotation toolkit", "demian");
  app.set_config("--config", "", "TOML config; [section] per subcommand, flags override");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  AnnotateArgs an;
  auto* annotate = app.add_subcommand("annotate", "Caption segments with a VLM, resumable");
  annotate->add_option("--corpus", an.corpus, "Corpus JSONL file or directory")->required();
  annotate->add_option("--dataset", an.dataset, "robocasa365|molmobot|egoverse")->required();
  annotate->add_option("--aspects", an.aspects, "Comma list or 'all'");
  annotate->add_option("--out", an.out, "Record sink (JSONL)")->required();
  annotate->add_option("--checkpoint", an.checkpoint, "Checkpoint file (default <out>.ckpt)");
  annotate->add_option("--failures", an.failures, "Failure ledger (default <out>.failures.jsonl)");
  annotate->add_option("--workers", an.workers)->check(CLI::PositiveNumber);
  annotate->add_flag("--mock", an.mock, "Use the deterministic mock VLM on virtual time");
  annotate->add_option("--mock-script", an.mock_script, "Scripted mock outcomes (JSON)");
  annotate->add_option("--endpoint", an.endpoint, "OpenAI-compatible base URL (key from DEMIAN_API_KEY)");
  annotate->add_option("--model", an.model);
  annotate->add_option("--max-retries", an.max_retries)->check(CLI::NonNegativeNumber);
  annotate->add_option("--caption-retries", an.caption_retries)->check(CLI::NonNegativeNumber);
  annotate->add_option("--rate-limit", an.rate_limit, "Requests per second");
  annotate->add_option("--timeout", an.timeout, "Seconds per request");
  annotate->add_option("--max-frames", an.max_frames)->check(CLI::PositiveNumber);
  annotate->add_option("--max-output-tokens", an.max_output_tokens)->check(CLI::PositiveNumber);
  annotate->add_option("--on-error", an.on_error, "Malformed corpus records: skip|abort");
  annotate->add_option("--seed", an.seed, "Mock caption and backoff jitter seed");

  SftArgs sf;
  auto* sft = app.add_subcommand("sft-gen", "Emit the instructor SFT dataset");
  sft->add_option("--reward-table", sf.reward_table, "Reward table JSON, or a results CSV")->required();
  sft->add_option("--annotations", sf.annotations, "Annotation records (JSONL)")->required();
  sft->add_option("--episodes", sf.episodes, "Corpus JSONL file or directory")->required();
  sft->add_option("--dataset", sf.dataset);
  sft->add_option("--seed", sf.seed);
  sft->add_option("--n", sf.n)->check(CLI::NonNegativeNumber);
  sft->add_option("--strategy", sf.strategy, "softmax|top1");
  sft->add_option("--temperature", sf.temperature);
  sft->add_option("--top-k", sf.top_k)->check(CLI::Range(1, 4));
  sft->add_option("--out", sf.out, "Output JSONL (default stdout)");

  SimulateArgs sm;
  auto* simulate = app.add_subcommand("simulate", "Simulate instruction delivery over rollouts");
  simulate->add_option("--mode", sm.mode, "baseline|sync|async");
  simulate->add_option("--latency", sm.latency, "constant:S | gaussian:MEAN,STD | empirical:S1,S2,...");
  simulate->add_option("--chunk", sm.chunk, "Action chunk horizon H")->check(CLI::PositiveNumber);
  simulate->add_option("--dt", sm.dt, "Step duration in seconds");
  simulate->add_option("--steps", sm.steps, "Max steps per rollout")->check(CLI::PositiveNumber);
  simulate->add_option("--episodes", sm.episodes)->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sm.seed);
  simulate->add_option("--trace", sm.trace, "Write event traces (JSONL)");
  simulate->add_option("--policy", sm.policy, "none | deadline:STEP | prompt:P_TASK,P_INSTRUCTED");
  simulate->add_option("--task-prompt", sm.task_prompt);

  CompositeArgs cp;
  auto* composite = app.add_subcommand("composite", "Run composite tasks under fixed or dynamic prompting");
  composite->add_option("--suite", cp.suite, "Composite suite JSON")->required();
  composite->add_option("--mode", cp.mode, "fix|dynamic-gt|dynamic-instructor|all");
  composite->add_option("--episodes", cp.episodes)->check(CLI::PositiveNumber);
  composite->add_option("--max-steps", cp.max_steps)->check(CLI::PositiveNumber);
  composite->add_option("--threshold", cp.threshold, "Done-flag threshold in (0, 1)");
  composite->add_option("--chunk", cp.chunk)->check(CLI::PositiveNumber);
  composite->add_option("--seed", cp.seed);
  composite->add_option("--episodes-out", cp.episodes_out, "Per-episode outcomes (JSONL)");

  CostArgs co;
  auto* cost = app.add_subcommand("cost", "Annotation FLOPs and dollar cost");
  cost->add_option("--clips", co.clips)->required()->check(CLI::NonNegativeNumber);
  cost->add_option("--aspects", co.aspects)->check(CLI::NonNegativeNumber);
  cost->add_option("--params", co.model.active_params, "Active parameters");
  cost->add_option("--in", co.model.input_tokens, "Input tokens per call");
  cost->add_option("--out", co.model.output_tokens, "Output tokens per call");
  cost->add_option("--price-in", co.model.price_in, "$ per 1e6 input tokens");
  cost->add_option("--price-out", co.model.price_out, "$ per 1e6 output tokens");
  cost->add_option("--train-flops", co.train_flops, "Training FLOPs of compute-axis points");
  cost->add_flag("--annotated", co.annotated, "Charge annotation FLOPs to the --train-flops points");

  AggregateArgs ag;
  auto* aggregate = app.add_subcommand("aggregate", "Oracle rows, family summaries, averages");
  aggregate->add_option("--matrix", ag.matrix, "Results CSV")->required();
  aggregate->add_option("--oracle-over", ag.oracle_over, "Comma list of condition rows");
  aggregate->add_option("--oracle-id", ag.oracle_id);
  aggregate->add_option("--families", ag.families, "Family spec JSON");
  aggregate->add_option("--avg-col", ag.avg_col, "Append a row-mean column with this id");
  aggregate->add_option("--digits", ag.digits, "Round half away from zero for display")->check(CLI::Range(0, 9));
  aggregate->add_option("--out", ag.out, "Output CSV (default stdout)");

  if (argc <= 1) {
    err << app.help();
    return kValidation;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code != 0 && app.get_subcommands().empty()) err << app.help();
    return code == 0 ? kOk : kValidation;
  }

  const auto subs = app.get_subcommands();
  const std::string name = subs.front()->get_name();
  Log log(err, name, log_level);
  try {
    if (name == "annotate") return run_annotate(an, out, log);
    if (name == "sft-gen") return run_sft(sf, out, log);
    if (name == "simulate") return run_simulate(sm, out, log);
    if (name == "composite") return run_composite(cp, out, log);
    if (name == "cost") return run_cost(co, out, log);
    if (name == "aggregate") return run_aggregate(ag, out, log);
  } catch (const ValidationError& e) {
    log.error(e.what());
    return kValidation;
  } catch (const std::exception& e) {
    log.error(e.what());
    return kRuntime;
  }
  return kValidation;
}

}  // namespace demian::cli
