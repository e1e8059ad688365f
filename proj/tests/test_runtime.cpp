#include <gtest/gtest.h>

#include <sstream>

#include "demian/runtime/rollout.hpp"
#include "support.hpp"

using namespace demian;

namespace {

RolloutTrace run(DeliveryMode mode, LatencyModel latency, std::uint64_t seed = 0, int max_steps = 400, int h = 8) {
  RolloutConfig cfg;
  cfg.mode = mode;
  cfg.latency = std::move(latency);
  cfg.seed = seed;
  cfg.max_steps = max_steps;
  cfg.chunk_horizon = h;
  PolicyStub policy;
  TemplateInstructor instructor;
  return run_rollout(cfg, policy, "Open the drawer.", instructor);
}

std::string dump(const RolloutTrace& t) {
  std::ostringstream out;
  write_trace_jsonl(out, t);
  return out.str();
}

std::vector<LatencyModel> latency_models() {
  return {ConstantLatency{1.86}, GaussianLatency{1.87, 0.05}, EmpiricalLatency{{0.4, 1.2, 1.9, 2.5, 3.3}},
          GaussianLatency{0.5, 0.4}};
}

}  // namespace

TEST(Latency, Parsing) {
  EXPECT_EQ(parse_latency("constant:1.86").describe(), "constant:1.86");
  EXPECT_NO_THROW(parse_latency("gaussian:1.87,0.05"));
  EXPECT_NO_THROW(parse_latency("empirical:1,2,3"));
  EXPECT_THROW(parse_latency("constant:-1"), ValidationError);
  EXPECT_THROW(parse_latency("gaussian:1"), ValidationError);
  EXPECT_THROW(parse_latency("uniform:1,2"), ValidationError);
  EXPECT_THROW(parse_latency("empirical:"), ValidationError);
}

TEST(Latency, GaussianIsFlooredAtZero) {
  const LatencyModel m = GaussianLatency{0.0, 5.0};
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) EXPECT_GE(m.sample(rng).count(), 0);
}

TEST(Rollout, AsyncConstantLatencyInjectsAtChunkFour) {
  const auto t = run(DeliveryMode::async, ConstantLatency{1.86});
  ASSERT_TRUE(t.injected_step);
  EXPECT_EQ(*t.injected_step, 25);
  EXPECT_EQ(t.injected_time, seconds_to_nanos(1.86));
  EXPECT_EQ(t.wall_clock, Nanos(400LL * 85'000'000));
  EXPECT_EQ(t.prompt_history.size(), 2u);
  EXPECT_EQ(t.prompt_history[1].time, Nanos(3LL * 8 * 85'000'000));
  EXPECT_EQ(t.prompt_history[1].prompt, "Open the drawer. Move the gripper steadily to open the drawer.");
}

TEST(Rollout, SyncWaitsExactlyTheLatency) {
  const auto base = run(DeliveryMode::baseline, ConstantLatency{1.86});
  const auto sync = run(DeliveryMode::sync, ConstantLatency{1.86});
  EXPECT_EQ(sync.injected_step, 1);
  EXPECT_EQ(sync.injected_time, Nanos(0));
  EXPECT_EQ(sync.wall_clock - base.wall_clock, seconds_to_nanos(1.86));
  EXPECT_FALSE(base.injected_step);
  EXPECT_EQ(base.prompt_history.size(), 1u);
}

TEST(Rollout, ZeroLatencyAsyncInjectsAtStepOne) {
  EXPECT_EQ(run(DeliveryMode::async, ConstantLatency{0.0}).injected_step, 1);
}

TEST(Rollout, LatencyPastEndNeverInjects) {
  const auto t = run(DeliveryMode::async, ConstantLatency{100.0}, 0, 40);
  EXPECT_FALSE(t.injected_step);
  const auto s = summarize_traces({t});
  EXPECT_EQ(s.never_injected, 1);
  EXPECT_FALSE(s.mean_injected_step);
}

TEST(Rollout, EventOrderingAtChunkBoundary) {
  const auto t = run(DeliveryMode::async, ConstantLatency{0.68}, 0, 24);
  std::vector<std::string> at;
  for (const auto& e : t.events) {
    if (e.time == seconds_to_nanos(0.68)) at.emplace_back(to_string(e.kind));
  }
  EXPECT_EQ(at, (std::vector<std::string>{"instruction_ready", "instruction_injected", "chunk_generated",
                                          "step_executed"}));
  EXPECT_EQ(t.injected_step, 9);
}

TEST(Rollout, InvalidConfig) {
  RolloutConfig cfg;
  cfg.chunk_horizon = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.step_duration = Nanos(0);
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(RolloutProperty, AsyncNeverDelaysExecution) {
  for (const auto& model : latency_models()) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const auto base = run(DeliveryMode::baseline, model, seed);
      const auto async = run(DeliveryMode::async, model, seed);
      EXPECT_EQ(async.wall_clock, base.wall_clock);
      EXPECT_EQ(async.step_times(), base.step_times());
    }
  }
}

TEST(RolloutProperty, SyncOverheadEqualsSampledLatency) {
  for (const auto& model : latency_models()) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const auto base = run(DeliveryMode::baseline, model, seed);
      const auto sync = run(DeliveryMode::sync, model, seed);
      ASSERT_TRUE(sync.latency);
      EXPECT_EQ(sync.wall_clock - base.wall_clock, *sync.latency);
      EXPECT_EQ(sync.injected_step, 1);
    }
  }
}

TEST(RolloutProperty, AsyncInjectionIsOnChunkBoundary) {
  Rng rng(9);
  for (const auto& model : latency_models()) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const int h = test::uniform_int(rng, 1, 16);
      const auto t = run(DeliveryMode::async, model, seed, 400, h);
      ASSERT_TRUE(t.injected_step);
      EXPECT_EQ((*t.injected_step - 1) % h, 0);
      const Nanos chunk_start = kDefaultStepDuration * (*t.injected_step - 1);
      EXPECT_GE(chunk_start, *t.latency);
      EXPECT_LT(chunk_start - kDefaultStepDuration * h, *t.latency);
    }
  }
}

TEST(RolloutProperty, MoreLatencyNeverInjectsEarlier) {
  Rng rng(10);
  for (int i = 0; i < 2000; ++i) {
    const double a = rng.uniform() * 5;
    const double b = rng.uniform() * 5;
    const auto ta = run(DeliveryMode::async, ConstantLatency{std::min(a, b)}, 0, 200);
    const auto tb = run(DeliveryMode::async, ConstantLatency{std::max(a, b)}, 0, 200);
    const int sa = ta.injected_step.value_or(INT32_MAX);
    const int sb = tb.injected_step.value_or(INT32_MAX);
    EXPECT_LE(sa, sb);
  }
}

TEST(RolloutProperty, SameSeedSameTrace) {
  for (const auto& model : latency_models()) {
    for (auto mode : {DeliveryMode::baseline, DeliveryMode::sync, DeliveryMode::async}) {
      EXPECT_EQ(dump(run(mode, model, 31)), dump(run(mode, model, 31)));
    }
  }
}

TEST(Summary, GaussianAsyncBand) {
  std::vector<RolloutTrace> async, sync;
  for (std::uint64_t e = 0; e < 1000; ++e) {
    async.push_back(run(DeliveryMode::async, GaussianLatency{1.87, 0.05}, derive_seed(7, e)));
    sync.push_back(run(DeliveryMode::sync, GaussianLatency{1.87, 0.05}, derive_seed(7, e)));
  }
  const auto sa = summarize_traces(async);
  ASSERT_TRUE(sa.mean_injected_step);
  EXPECT_GE(*sa.mean_injected_step, 24.0);
  EXPECT_LE(*sa.mean_injected_step, 26.0);
  const auto ss = summarize_traces(sync);
  EXPECT_DOUBLE_EQ(*ss.mean_injected_step, 1.0);
  EXPECT_DOUBLE_EQ(*ss.mean_injected_time, 0.0);
}

TEST(Summary, SingleTraceMeanEqualsMedian) {
  const auto s = summarize_traces({run(DeliveryMode::async, ConstantLatency{1.86})});
  EXPECT_EQ(s.mean_injected_step, 25.0);
  EXPECT_EQ(s.median_injected_step, 25.0);
  EXPECT_EQ(s.mean_injected_time, s.median_injected_time);
  EXPECT_FALSE(s.success_rate);
  EXPECT_THROW(summarize_traces({}), ValidationError);
}

TEST(Stubs, DeadlinePolicyScoresDelivery) {
  RolloutConfig cfg;
  cfg.latency = ConstantLatency{1.86};
  TemplateInstructor instr;
  DeadlinePolicy early(24), late(25);
  EXPECT_EQ(run_rollout(cfg, early, "t", instr).success, false);
  EXPECT_EQ(run_rollout(cfg, late, "t", instr).success, true);
  cfg.mode = DeliveryMode::sync;
  EXPECT_EQ(run_rollout(cfg, early, "t", instr).success, true);
}

TEST(Stubs, PromptSensitivePolicyRates) {
  PromptSensitivePolicy p(0.2, 0.8);
  Rng rng(3);
  int hits = 0;
  for (int i = 0; i < 20000; ++i) hits += *p.finish({400, 1}, rng);
  EXPECT_NEAR(hits / 20000.0, 0.8, 0.01);
  hits = 0;
  for (int i = 0; i < 20000; ++i) hits += *p.finish({400, std::nullopt}, rng);
  EXPECT_NEAR(hits / 20000.0, 0.2, 0.01);
}
