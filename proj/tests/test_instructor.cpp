#include <gtest/gtest.h>

#include <cmath>

#include "demian/aggregation/matrix.hpp"
#include "demian/instructor/sft.hpp"
#include "support.hpp"

using namespace demian;

namespace {

RewardTable one_task(const AspectScores& w, double baseline, const std::string& task = "T") {
  RewardTable rt;
  rt.add_task(task, w, baseline);
  return rt;
}

const AspectScores kAvgRow = {0.46, 0.44, 0.38, 0.37};

ResultsMatrix robocasa_vla() {
  const auto m = read_matrix_csv(test::source_path("tests/data/golden/robocasa_vla.csv"));
  std::vector<std::string> tasks(m.cols().begin(), m.cols().end() - 1);
  return m.select_cols(tasks);
}

EpisodeMeta episode(const std::string& id, const std::string& task, int spans) {
  EpisodeMeta ep;
  ep.episode_id = id;
  ep.frame_count = 100;
  ep.task_label = "Do " + task + ".";
  ep.task_id = task;
  for (int i = 0; i < spans; ++i) ep.primitive_spans.push_back({"p" + std::to_string(i), i * 10, i * 10 + 10});
  return ep;
}

}  // namespace

// ---- reward table ---------------------------------------------------

TEST(RewardTable, BuildsSeventeenTasksFromDevMatrix) {
  const auto rt = build_reward_table(robocasa_vla());
  EXPECT_EQ(rt.tasks().size(), 17u);
  EXPECT_DOUBLE_EQ(rt.w("CloseFridge", AspectKind::arm_pose), robocasa_vla().at("arm_pose", "CloseFridge"));
  EXPECT_DOUBLE_EQ(rt.baseline("CloseFridge"), 0.65);
}

TEST(RewardTable, ShippedJsonMatchesGoldenMatrix) {
  const auto from_json = load_reward_table(test::source_path("data/reward_table_robocasa_vla.json"));
  const auto from_csv = build_reward_table(robocasa_vla());
  ASSERT_EQ(from_json.tasks(), from_csv.tasks());
  for (const auto& t : from_csv.tasks()) {
    EXPECT_EQ(from_json.w(t), from_csv.w(t)) << t;
    EXPECT_EQ(from_json.baseline(t), from_csv.baseline(t)) << t;
  }
}

TEST(RewardTable, AllZeroTaskIsLegal) {
  const auto rt = one_task({0, 0, 0, 0}, 0);
  EXPECT_EQ(rt.tasks().size(), 1u);
}

TEST(RewardTable, MissingAspectRowIsError) {
  auto m = robocasa_vla();
  EXPECT_THROW(build_reward_table(m.select_rows({"baseline", "physical_motion", "scene_composition", "arm_pose"})),
               ValidationError);
}

TEST(RewardTable, MissingCellNamesTheCell) {
  auto m = robocasa_vla();
  m.set("reasoning", "OpenDrawer", std::nullopt);
  try {
    build_reward_table(m);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("(OpenDrawer, reasoning)"), std::string::npos);
  }
}

TEST(RewardTable, OutOfRangeAndUnknownTask) {
  EXPECT_THROW(one_task({0.1, 1.2, 0, 0}, 0.5), ValidationError);
  EXPECT_THROW(one_task({0.1, 0.1, 0, 0}, 0.5).w("nope"), LookupError);
}

TEST(RewardTable, JsonRoundTripAcceptsAnyAspectOrder) {
  const auto rt = build_reward_table(robocasa_vla());
  auto j = reward_table_to_json(rt);
  for (auto& row : j["w"]) std::swap(row[0], row[3]);
  std::swap(j["aspects"][0], j["aspects"][3]);
  const auto back = reward_table_from_json(j);
  for (const auto& t : rt.tasks()) EXPECT_EQ(back.w(t), rt.w(t));
}

// ---- sampling -------------------------------------------------------

TEST(Sampling, AvgRowDistribution) {
  const auto d = aspect_distribution(one_task(kAvgRow, 0.44), "T", 2.0, 3);
  const double z = std::exp(0.23) + std::exp(0.22) + std::exp(0.19);
  EXPECT_NEAR(d.p[0], std::exp(0.23) / z, 1e-12);
  EXPECT_NEAR(d.p[0], 0.3389, 5e-5);
  EXPECT_NEAR(d.p[1], 0.3355, 5e-5);
  EXPECT_NEAR(d.p[2], 0.3256, 5e-5);
  EXPECT_EQ(d.p[3], 0.0);
  EXPECT_EQ(d.abstain, 0.0);
}

TEST(Sampling, AllBelowBaselineAbstains) {
  const auto rt = one_task({0.3, 0.3, 0.3, 0.3}, 0.31);
  EXPECT_TRUE(aspect_distribution(rt, "T").abstains());
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) EXPECT_FALSE(aspect_distribution(rt, "T").sample(rng));
}

TEST(Sampling, EqualScoresAtBaselineAreUniformOverFirstThree) {
  const auto d = aspect_distribution(one_task({0.3, 0.3, 0.3, 0.3}, 0.3), "T");
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(d.p[k], 1.0 / 3.0, 1e-15);
  EXPECT_EQ(d.p[3], 0.0);
}

TEST(Sampling, Top1Targets) {
  EXPECT_EQ(top1_target(one_task(kAvgRow, 0.44), "T"), AspectKind::physical_motion);
  EXPECT_EQ(top1_target(one_task({0.3, 0.3, 0.3, 0.3}, 0.3), "T"), AspectKind::physical_motion);
  EXPECT_FALSE(top1_target(one_task({0.3, 0.3, 0.3, 0.3}, 0.31), "T"));
}

TEST(Sampling, BadParameters) {
  const auto rt = one_task(kAvgRow, 0.44);
  EXPECT_THROW(aspect_distribution(rt, "T", 0.0), ValidationError);
  EXPECT_THROW(aspect_distribution(rt, "T", 2.0, 0), ValidationError);
  EXPECT_THROW(aspect_distribution(rt, "T", 2.0, 5), ValidationError);
}

TEST(SamplingProperty, DistributionIsNormalizedAndNonNegative) {
  Rng rng(100);
  for (int i = 0; i < 5000; ++i) {
    const AspectScores w = {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
    const auto d = aspect_distribution(one_task(w, rng.uniform()), "T", 0.05 + rng.uniform() * 4,
                                       test::uniform_int(rng, 1, 4));
    if (d.abstains()) continue;
    double sum = 0;
    for (double p : d.p) {
      EXPECT_GE(p, 0.0);
      sum += p;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(SamplingProperty, CommonShiftLeavesDistributionUnchanged) {
  Rng rng(101);
  for (int i = 0; i < 5000; ++i) {
    // Scores on a 1/64 grid so shifting is exact in binary.
    auto grid = [&] { return static_cast<double>(rng.below(33)) / 64.0; };
    const AspectScores w = {grid(), grid(), grid(), grid()};
    const double b = grid();
    const double c = static_cast<double>(rng.below(32)) / 64.0;
    const AspectScores ws = {w[0] + c, w[1] + c, w[2] + c, w[3] + c};
    const int k = test::uniform_int(rng, 1, 4);
    const auto d0 = aspect_distribution(one_task(w, b), "T", 2.0, k);
    const auto d1 = aspect_distribution(one_task(ws, b + c), "T", 2.0, k);
    EXPECT_EQ(d0.abstains(), d1.abstains());
    for (std::size_t a = 0; a < kNumAspects; ++a) {
      EXPECT_EQ(d0.p[a] > 0, d1.p[a] > 0);
      EXPECT_NEAR(d0.p[a], d1.p[a], 1e-12);
    }
  }
}

TEST(SamplingProperty, Top1AgreesWithModeWithoutTies) {
  Rng rng(102);
  int checked = 0;
  for (int i = 0; i < 5000; ++i) {
    const AspectScores w = {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
    const auto rt = one_task(w, rng.uniform() * 0.8);
    const auto order = rank_aspects(w);
    if (w[order[0]] == w[order[1]]) continue;
    EXPECT_EQ(top1_target(rt, "T"), aspect_distribution(rt, "T").mode());
    ++checked;
  }
  EXPECT_GT(checked, 4000);
}

TEST(SamplingStatistics, EmpiricalMatchesAnalytic) {
  const auto d = aspect_distribution(one_task(kAvgRow, 0.44), "T");
  Rng rng(2024);
  std::array<long, kNumAspects> counts{};
  const long n = 100000;
  for (long i = 0; i < n; ++i) ++counts[index_of(*d.sample(rng))];
  for (std::size_t k = 0; k < kNumAspects; ++k) {
    EXPECT_NEAR(static_cast<double>(counts[k]) / n, d.p[k], 0.01);
  }
  EXPECT_EQ(counts[3], 0);
}

// ---- SFT dataset ----------------------------------------------------

namespace {

struct SftFixture {
  SftFixture() {
    rt.add_task("Good", kAvgRow, 0.44);
    rt.add_task("Bad", {0.1, 0.1, 0.1, 0.1}, 0.5);
    episodes = {episode("e0", "Good", 2), episode("e1", "Bad", 1), episode("e2", "Unlisted", 1)};
    for (const auto& ep : episodes) {
      for (const auto& seg : split_episode(ep)) {
        for (AspectKind a : kAllAspects) {
          index.add({seg.segment_id, a, std::string(to_string(a)) + " of " + seg.segment_id + ".", "", 0, 0, ""});
        }
      }
    }
  }
  RewardTable rt;
  std::vector<EpisodeMeta> episodes;
  AnnotationIndex index;
};

std::string dump(const SftResult& r) {
  std::string out;
  for (const auto& e : r.examples) out += nlohmann::json(e).dump() + "\n";
  return out;
}

}  // namespace

TEST(Sft, SameSeedIsByteIdentical) {
  SftFixture f;
  SftOptions o;
  o.seed = 77;
  o.n_examples = 500;
  EXPECT_EQ(dump(sample_sft_dataset(f.rt, f.index, f.episodes, o)), dump(sample_sft_dataset(f.rt, f.index, f.episodes, o)));
  auto o2 = o;
  o2.seed = 78;
  EXPECT_NE(dump(sample_sft_dataset(f.rt, f.index, f.episodes, o)), dump(sample_sft_dataset(f.rt, f.index, f.episodes, o2)));
}

TEST(Sft, AbstainingTaskHasEmptyTargets) {
  SftFixture f;
  SftOptions o;
  o.n_examples = 400;
  const auto res = sample_sft_dataset(f.rt, f.index, f.episodes, o);
  int bad = 0;
  for (const auto& e : res.examples) {
    EXPECT_NE(e.task_id, "Unlisted");
    if (e.task_id == "Bad") {
      ++bad;
      EXPECT_TRUE(e.target_caption.empty());
      EXPECT_FALSE(e.target_aspect);
    } else {
      EXPECT_FALSE(e.target_caption.empty());
      EXPECT_NE(e.target_aspect, AspectKind::reasoning);
      EXPECT_EQ(e.target_caption, std::string(to_string(*e.target_aspect)) + " of e0#0000.");
    }
  }
  EXPECT_GT(bad, 0);
}

TEST(Sft, DefaultSizeIs3200) {
  SftFixture f;
  const auto res = sample_sft_dataset(f.rt, f.index, f.episodes, SftOptions{});
  EXPECT_EQ(res.examples.size() + res.skipped.size(), 3200u);
  EXPECT_TRUE(res.skipped.empty());
  EXPECT_EQ(res.examples[0].frame_refs[2].find("/wrist/frame_000000"), 2u);
}

TEST(Sft, MissingCaptionsAreSkipped) {
  SftFixture f;
  SftOptions o;
  o.n_examples = 300;
  const auto res = sample_sft_dataset(f.rt, AnnotationIndex{}, f.episodes, o);
  EXPECT_EQ(res.examples.size() + res.skipped.size(), 300u);
  for (const auto& e : res.examples) EXPECT_EQ(e.task_id, "Bad");
  EXPECT_FALSE(res.skipped.empty());
}

TEST(Sft, Top1StrategyAlwaysPicksArgmax) {
  SftFixture f;
  SftOptions o;
  o.n_examples = 200;
  o.strategy = SftStrategy::top1;
  for (const auto& e : sample_sft_dataset(f.rt, f.index, f.episodes, o).examples) {
    if (e.task_id == "Good") {
      EXPECT_EQ(e.target_aspect, AspectKind::physical_motion);
    }
  }
}

TEST(Sft, ExampleJsonEnforcesAbstentionEncoding) {
  SftExample e;
  e.task_id = "T";
  e.frame_refs = initial_frame_refs("ep");
  e.task_description = "Do T.";
  EXPECT_EQ(nlohmann::json(e).get<SftExample>(), e);
  auto j = nlohmann::json(e);
  j["target_caption"] = "orphan";
  EXPECT_THROW(j.get<SftExample>(), ValidationError);
}

TEST(Sft, EmptyPoolIsError) {
  SftFixture f;
  SftOptions o;
  o.n_examples = 1;
  EXPECT_THROW(sample_sft_dataset(f.rt, f.index, {episode("x", "Unlisted", 1)}, o), ValidationError);
}
