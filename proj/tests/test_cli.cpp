#include <gtest/gtest.h>

#include <algorithm>
#include <initializer_list>
#include <sstream>

#include "demian/cli/app.hpp"
#include "support.hpp"

using namespace demian;
using demian::test::TempDir;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "demian");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string src(const std::string& rel) { return test::source_path(rel).string(); }

}  // namespace

TEST(Cli, NoArgumentsPrintsUsage) {
  const auto r = invoke({});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST(Cli, UnknownSubcommandIsValidationExit) {
  const auto r = invoke({"frobnicate"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST(Cli, HelpPerSubcommand) {
  for (const std::string sub : {"annotate", "sft-gen", "simulate", "composite", "cost", "aggregate"}) {
    const auto r = invoke({sub, "--help"});
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
  }
}

TEST(Cli, CostGoldenNumbers) {
  const auto r = invoke({"cost", "--clips", "1000000", "--aspects", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("flops_per_call: 5.01e+13"), std::string::npos);
  EXPECT_NE(r.out.find("corpus_flops: 5.01e+19"), std::string::npos);
  EXPECT_NE(r.out.find("corpus_dollars: $1144.00"), std::string::npos);
}

TEST(Cli, CostComputeAxis) {
  const auto r = invoke({"cost", "--clips", "1000000", "--train-flops", "1e20", "--annotated"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("total_flops[0]: 1.501e+20"), std::string::npos);
}

TEST(Cli, NegativeClipsRejected) { EXPECT_EQ(invoke({"cost", "--clips", "-5"}).code, 1); }

TEST(Cli, SimulateZeroLatencyInjectsAtStepOne) {
  const auto r = invoke({"simulate", "--mode", "async", "--latency", "constant:0", "--episodes", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["mean_injected_step"], 1.0);
  EXPECT_EQ(j["mode"], "async");
}

TEST(Cli, SimulateIsDeterministicAndTraces) {
  TempDir dir("cli-sim");
  const std::vector<std::string> args = {"simulate", "--episodes", "20", "--seed", "5", "--policy", "deadline:25",
                                         "--trace", (dir / "t.jsonl").string()};
  const auto a = invoke(args);
  const auto trace_a = test::read_file(dir / "t.jsonl");
  const auto b = invoke(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(trace_a, test::read_file(dir / "t.jsonl"));
  EXPECT_NE(trace_a.find("\"instruction_injected\""), std::string::npos);
  EXPECT_FALSE(nlohmann::json::parse(a.out)["success_rate"].is_null());
}

TEST(Cli, BadLatencySpecIsValidationExit) {
  const auto r = invoke({"simulate", "--latency", "lognormal:1,2"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("\"level\":\"error\""), std::string::npos);
  EXPECT_NE(r.err.find("\"subcommand\":\"simulate\""), std::string::npos);
}

TEST(Cli, MissingFileIsRuntimeExit) {
  EXPECT_EQ(invoke({"aggregate", "--matrix", "/nonexistent.csv"}).code, 2);
}

TEST(Cli, AggregateFamiliesMatchGolden) {
  TempDir dir("cli-agg");
  const auto g = read_matrix_csv(test::source_path("tests/data/golden/molmospaces_detail_vla.csv"));
  {
    std::ofstream f(dir / "in.csv");
    write_matrix_csv(f, g.select_rows({"baseline", "physical_motion", "scene_composition", "arm_pose", "reasoning",
                                       "instructor"}));
  }
  const auto r = invoke({"aggregate", "--matrix", (dir / "in.csv").string(), "--families", src("data/families_summary.json"),
                      "--oracle-over", "baseline,physical_motion,scene_composition,arm_pose,reasoning", "--digits",
                      "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  const auto got = read_matrix_csv(in);
  const auto want = read_matrix_csv(test::source_path("tests/data/golden/molmospaces_summary_vla.csv"));
  ASSERT_EQ(got.rows(), want.rows());
  auto gc = got.cols(), wc = want.cols();
  std::sort(gc.begin(), gc.end());
  std::sort(wc.begin(), wc.end());
  ASSERT_EQ(gc, wc);
  for (const auto& row : want.rows()) {
    for (const auto& col : want.cols()) {
      EXPECT_EQ(format_sr(got.at(row, col)), format_sr(want.at(row, col))) << row << " / " << col;
    }
  }
}

TEST(Cli, AnnotateMockIsResumableAndDeterministic) {
  TempDir a("cli-ann-a"), b("cli-ann-b");
  auto run = [&](const TempDir& d) {
    return invoke({"annotate", "--mock", "--corpus", src("data/corpus/robocasa365.jsonl"), "--dataset", "robocasa365", "--out",
                (d / "rec.jsonl").string(), "--seed", "3", "--workers", "3"});
  };
  const auto first = run(a);
  ASSERT_EQ(first.code, 0) << first.err;
  const auto summary = nlohmann::json::parse(first.out);
  EXPECT_EQ(summary["completed"], 64);
  EXPECT_EQ(summary["skipped"], 0);
  const auto again = nlohmann::json::parse(run(a).out);
  EXPECT_EQ(again["completed"], 0);
  EXPECT_EQ(again["skipped"], 64);

  ASSERT_EQ(run(b).code, 0);
  auto sorted_lines = [](const std::string& s) {
    std::vector<std::string> lines;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    std::sort(lines.begin(), lines.end());
    return lines;
  };
  EXPECT_EQ(sorted_lines(test::read_file(a / "rec.jsonl")), sorted_lines(test::read_file(b / "rec.jsonl")));
}

TEST(Cli, AnnotateNeedsExactlyOneBackend) {
  TempDir d("cli-ann-none");
  EXPECT_EQ(invoke({"annotate", "--corpus", src("data/corpus/robocasa365.jsonl"), "--dataset", "robocasa365", "--out",
                 (d / "r.jsonl").string()})
                .code,
            1);
}

TEST(Cli, SftGenFromMockAnnotations) {
  TempDir d("cli-sft");
  ASSERT_EQ(invoke({"annotate", "--mock", "--corpus", src("data/corpus/robocasa365.jsonl"), "--dataset", "robocasa365", "--out",
                 (d / "rec.jsonl").string()})
                .code,
            0);
  const std::vector<std::string> args = {"sft-gen", "--reward-table", src("data/reward_table_robocasa_vla.json"),
                                         "--annotations", (d / "rec.jsonl").string(), "--episodes",
                                         src("data/corpus/robocasa365.jsonl"), "--n", "300", "--seed", "4"};
  const auto r1 = invoke(args);
  const auto r2 = invoke(args);
  ASSERT_EQ(r1.code, 0) << r1.err;
  EXPECT_EQ(r1.out, r2.out);
  std::istringstream in(r1.out);
  long n = 0;
  for (std::string line; std::getline(in, line);) {
    const auto ex = nlohmann::json::parse(line).get<SftExample>();
    EXPECT_EQ(ex.frame_refs.size(), 3u);
    ++n;
  }
  EXPECT_EQ(n, 300);
}

TEST(Cli, CompositeTable) {
  const auto r = invoke({"composite", "--suite", src("tests/data/composite_rate_suite.json"), "--episodes", "20"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("fix,5,0.5,0.28,0.13"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("dynamic-gt,5,0.65,0.31,0.22"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("dynamic-instructor,5,0.61,0.3,0.18"), std::string::npos) << r.out;
}

TEST(Cli, ConfigFileSuppliesDefaults) {
  TempDir d("cli-config");
  test::write_file(d / "c.toml", "[simulate]\nmode = \"sync\"\nlatency = \"constant:1.86\"\n");
  const auto r = invoke({"--config", (d / "c.toml").string(), "simulate"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["mode"], "sync");
  EXPECT_EQ(j["mean_injected_step"], 1.0);

  const auto flag = invoke({"--config", (d / "c.toml").string(), "simulate", "--mode", "async"});
  EXPECT_EQ(nlohmann::json::parse(flag.out)["mode"], "async");
}

TEST(Cli, ConfigUnknownKeyIsRejected) {
  TempDir d("cli-config-bad");
  test::write_file(d / "c.toml", "[simulate]\nmood = \"sync\"\n");
  EXPECT_EQ(invoke({"--config", (d / "c.toml").string(), "simulate"}).code, 1);
}
