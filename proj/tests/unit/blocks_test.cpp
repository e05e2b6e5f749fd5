#include <gtest/gtest.h>

#include <cmath>

#include "ncsum/blocks.hpp"
#include "ncsum/harness.hpp"
#include "test_util.hpp"

using namespace ncsum;

TEST(Blocks, ScheduleFollowsRecurrence) {
  BlockParams p;
  BlockSchedule s(p, 5000);
  auto fl = [](double j, double e) { return static_cast<std::int64_t>(std::floor(std::pow(j, e) + 1e-9)); };
  std::int64_t a = 0, b = 1;
  EXPECT_EQ(s.a(1), 0);
  EXPECT_EQ(s.b(1), 1);
  for (std::int64_t j = 2; j <= 200; ++j) {
    a = b + fl(j - 1, p.theta);
    b = a + fl(j, p.tau);
    ASSERT_EQ(s.a(j), a) << j;
    ASSERT_EQ(s.b(j), b) << j;
  }
  EXPECT_EQ(s.a(2), 2);
  EXPECT_EQ(s.b(2), 3);
}

TEST(Blocks, NuCountsFinishedBlocks) {
  BlockSchedule s(BlockParams{}, 5000);
  for (std::int64_t t = 0; t <= 5000; t += 7) {
    const std::int64_t n = s.nu(t);
    // a(nu + 1) <= t + 1 < a(nu + 2)
    if (n >= 1) EXPECT_LE(s.a(n + 1), t + 1);
    EXPECT_GT(s.a(n + 2), t + 1);
  }
}

TEST(Blocks, BadParametersRejected) {
  BlockParams p;
  p.tau = 0.6;
  EXPECT_THROW(BlockSchedule(p, 100), ConfigError);
}

TEST(Blocks, TelescopingAndCenteredSteps) {
  Experiment exp(load_named("canonical"));
  BlockSchedule sched = schedule_for_blocks(exp.config().blocks, 60);
  for (int i : exp.components()) {
    MartingaleEngine engine(exp.model(), exp.decomposition(), exp.q_family(), sched, i, 60);
    Path path = sample_sparse(exp.model(), engine.value_positions(), engine.symbol_positions(), 9);
    MartingalePieces p = block_sums(path, sched, exp.model(), exp.decomposition(), exp.q_family(), i, 60);
    martingale_correction(p, engine, path);
    EXPECT_LT(telescoping_residual(p), 1e-10);
    SymbolLookup sym = [&](std::int64_t pos) { return path.symbol(pos); };
    for (std::int64_t m = 2; m <= 60; m += 11) {
      StepLaw law = engine.step_law(m, sym, p.R[m - 1]);
      double mass = 0.0, first = 0.0;
      for (std::size_t k = 0; k < law.values().size(); ++k) {
        mass += law.probs()[k];
        first += law.probs()[k] * law.values()[k];
      }
      EXPECT_NEAR(mass, 1.0, 1e-12);
      EXPECT_NEAR(first, 0.0, 1e-10);
    }
  }
}
