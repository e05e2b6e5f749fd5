#include <gtest/gtest.h>

#include <cmath>

#include "ncsum/skorokhod.hpp"
#include "ncsum/stats.hpp"

using namespace ncsum;

TEST(Skorokhod, TwoPointRuleMoments) {
  TwoPointRule rule({-1.0, 0.0, 2.0}, {0.5, 0.25, 0.25});
  EXPECT_NEAR(rule.zero_mass(), 0.25, 1e-15);
  EXPECT_NEAR(rule.expected_time(), 0.5 + 1.0, 1e-14);
  EXPECT_THROW(TwoPointRule({-1.0, 2.0}, {0.5, 0.5}), Error);
}

TEST(Skorokhod, ExitProbabilityAndMeanTime) {
  // From 0 on (-1, 2): P(exit at 2) = 1/3, E T = 2.
  BrownianMotion bm(1e-4);
  const int n = 3000;
  double high = 0.0;
  std::vector<double> dur;
  for (int k = 0; k < n; ++k) {
    bm.set_position(0.0);
    auto e = bm.exit(-1.0, 2.0, 0, 100 + k);
    high += e.side > 0;
    dur.push_back(e.duration);
    EXPECT_DOUBLE_EQ(bm.position(), e.side > 0 ? 2.0 : -1.0);
  }
  EXPECT_NEAR(high / n, 1.0 / 3.0, 4.0 * std::sqrt(2.0 / 9.0 / n));
  EXPECT_NEAR(mean(dur), 2.0, 4.0 * standard_error(dur));
}

TEST(Skorokhod, EmbeddedLawMatchesTarget) {
  TwoPointRule rule({-1.0, 2.0}, {2.0 / 3.0, 1.0 / 3.0});
  BrownianMotion bm(1e-4);
  Rng rng(4);
  double high = 0.0, total_time = 0.0;
  const int n = 2000;
  for (int k = 0; k < n; ++k) {
    auto [u, v] = rule.sample_pair(rng);
    const double start = bm.position();
    auto e = bm.exit(start + u, start + v, 0, 500 + k);
    high += e.side > 0;
    total_time += e.duration;
  }
  EXPECT_NEAR(high / n, 1.0 / 3.0, 4.0 * std::sqrt(2.0 / 9.0 / n));
  EXPECT_NEAR(bm.time() / n, 2.0, 0.25);
  EXPECT_NEAR(total_time, bm.time(), 1e-9 * bm.time());
}

TEST(Skorokhod, ReplayReproducesExit) {
  BrownianMotion bm(1e-3);
  bm.set_position(0.3);
  const double t0 = bm.time();
  auto e = bm.exit(-0.5, 1.0, +1, 77);
  EXPECT_EQ(e.side, 1);
  EXPECT_DOUBLE_EQ(BrownianMotion(1e-3).replay(-0.5, 1.0, t0, 0.3, e.accepted_seed), e.duration);
}
