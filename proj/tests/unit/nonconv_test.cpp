#include <gtest/gtest.h>

#include <cmath>

#include "ncsum/nonconv.hpp"
#include "test_util.hpp"

using namespace ncsum;

namespace {

Marginal pm_one() {
  Marginal mu;
  mu.points = {1.0, -1.0};
  mu.weights = {0.5, 0.5};
  return mu;
}

}  // namespace

TEST(Nonconv, ProductPlusLinearSplitsByHand) {
  // F = x1 x2 + x1 under symmetric signs: F1 = x1, F2 = x1 x2, no centering.
  ObservableSpec spec = ObservableSpec::polynomial(2, 1, {{1.0, {1, 1}}, {1.0, {1, 0}}});
  Decomposition dec = center_and_decompose(spec, pm_one());
  EXPECT_NEAR(dec.centering(), 0.0, 1e-15);
  for (double x : {1.0, -1.0})
    for (double y : {1.0, -1.0}) {
      const double one[] = {x}, two[] = {x, y};
      EXPECT_NEAR(dec.component(1, one), x, 1e-15);
      EXPECT_NEAR(dec.component(2, two), x * y, 1e-15);
    }
}

TEST(Nonconv, SquareIsCentered) {
  Marginal mu;
  mu.points = {0.0, 1.0, 3.0};
  mu.weights = {0.25, 0.5, 0.25};
  ObservableSpec spec = ObservableSpec::polynomial(1, 1, {{1.0, {2}}});
  Decomposition dec = center_and_decompose(spec, mu);
  EXPECT_NEAR(dec.centering(), 0.5 + 2.25, 1e-14);
  const double at3[] = {3.0};
  EXPECT_NEAR(dec.component(1, at3), 9.0 - 2.75, 1e-14);
}

TEST(Nonconv, IndexFunctions) {
  IndexFunction lin = IndexFunction::linear(3);
  IndexFunction poly = IndexFunction::polynomial({1, 0, 2});
  IndexFunction tab = IndexFunction::tabulated({0, 2, 5, 9});
  EXPECT_EQ(lin(7), 21);
  EXPECT_EQ(poly(4), 33);
  EXPECT_EQ(tab(3), 9);
}

TEST(Nonconv, SquareIndexAccepted) {
  QFamily qf;
  qf.k = 1;
  qf.q = {IndexFunction::linear(1), IndexFunction::polynomial({0, 0, 1})};
  EXPECT_EQ(validate_q_family(qf, 2000).verdict, Verdict::pass);
}

TEST(Nonconv, CollidingNonlinearIndicesRejected) {
  QFamily qf;
  qf.k = 1;
  qf.q = {IndexFunction::linear(1), IndexFunction::linear(2)};
  EXPECT_EQ(validate_q_family(qf, 2000).verdict, Verdict::fail);
}

TEST(Nonconv, RequiredPositionsCoverEveryIndex) {
  QFamily qf;
  qf.k = 1;
  qf.q = {IndexFunction::linear(1), IndexFunction::polynomial({0, 0, 1})};
  auto pos = required_positions(qf, 10);
  for (std::int64_t n = 1; n <= 10; ++n) {
    EXPECT_TRUE(std::binary_search(pos.begin(), pos.end(), n));
    EXPECT_TRUE(std::binary_search(pos.begin(), pos.end(), n * n));
  }
}
