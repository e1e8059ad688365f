#include <gtest/gtest.h>

#include "demian/accounting.hpp"
#include "demian/rng.hpp"

using namespace demian;

TEST(Accounting, DefaultFlopsPerCall) {
  EXPECT_DOUBLE_EQ(flops_per_call(CostModel{}), 2.0 * 3e9 * 8350);
  EXPECT_DOUBLE_EQ(flops_per_call(CostModel{}), 5.01e13);
  EXPECT_NEAR(flops_per_call(CostModel{}) / 5.0e13, 1.0, 0.02);
}

TEST(Accounting, UnitCase) { EXPECT_DOUBLE_EQ(flops_per_call(CostModel{1, 1, 0, 0, 0}), 2.0); }

TEST(Accounting, DoubledOutputTokens) {
  CostModel cm;
  cm.output_tokens = 300;
  EXPECT_DOUBLE_EQ(flops_per_call(cm), 5.1e13);
}

TEST(Accounting, CorpusFlops) {
  EXPECT_NEAR(corpus_flops(CostModel{}, 1e6, 1) / 5.0e19, 1.0, 0.02);
  EXPECT_EQ(corpus_flops(CostModel{}, 0, 1), 0.0);
  EXPECT_NEAR(corpus_flops(CostModel{}, 1e6, 4) / 2.0e20, 1.0, 0.02);
}

TEST(Accounting, CorpusDollars) {
  EXPECT_NEAR(corpus_dollars(CostModel{}, 1e6, 1), 1144.00, 0.005);
  EXPECT_NEAR(dollars_per_call(CostModel{}), 1.144e-3, 1e-12);
  EXPECT_NEAR(dollars_per_call(CostModel{}) / 1.1e-3, 1.0, 0.05);
  CostModel free;
  free.price_in = free.price_out = 0;
  EXPECT_EQ(corpus_dollars(free, 1e6, 4), 0.0);
}

TEST(Accounting, Validation) {
  CostModel cm;
  cm.active_params = 0;
  EXPECT_THROW(flops_per_call(cm), ValidationError);
  EXPECT_THROW(corpus_flops(CostModel{}, -1, 1), ValidationError);
  EXPECT_THROW(corpus_dollars(CostModel{}, 1, -1), ValidationError);
}

TEST(Accounting, ComputeAxis) {
  const auto axis = compute_axis({{1e20, true}, {1e20, false}}, CostModel{}, 1e6, 1);
  EXPECT_NEAR(axis[0], 1.501e20, 1e15);
  EXPECT_EQ(axis[1], 1e20);
}

TEST(Accounting, MatchedPerformanceSavingIsTwoAxisPoints) {
  // A ~62% saving of ~1.3e20 puts the unannotated run near 2.1e20 and the
  // annotated run near 0.8e20, both expressible as axis points.
  const double annotated_train = 0.8e20 - corpus_flops(CostModel{}, 1e6, 1);
  const auto axis = compute_axis({{annotated_train, true}, {2.1e20, false}}, CostModel{}, 1e6, 1);
  EXPECT_NEAR(axis[1] - axis[0], 1.3e20, 1e15);
  EXPECT_NEAR(1.0 - axis[0] / axis[1], 0.62, 0.01);
}

TEST(AccountingProperty, LinearInClipsAndAspects) {
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    const CostModel cm{1e6 + rng.uniform() * 1e10, 1 + rng.uniform() * 1e4, rng.uniform() * 500, rng.uniform(),
                       rng.uniform()};
    const double n = std::floor(rng.uniform() * 1e6);
    const double k = static_cast<double>(rng.below(5));
    const double f = corpus_flops(cm, n, k);
    EXPECT_NEAR(f, n * k * flops_per_call(cm), 1e-9 * std::max(1.0, f));
    EXPECT_NEAR(corpus_flops(cm, 2 * n, k), 2 * f, 1e-9 * std::max(1.0, f));
    EXPECT_NEAR(corpus_dollars(cm, n, 2 * k), 2 * corpus_dollars(cm, n, k), 1e-9 * std::max(1.0, f));
  }
}
