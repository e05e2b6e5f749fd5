#include <gtest/gtest.h>

#include <cmath>

#include "ncsum/mixing.hpp"
#include "test_util.hpp"

using namespace ncsum;

namespace {

// alpha by enumerating every pair of events on a two-point past and future.
double alpha_brute(const ProcessModel& model, std::int64_t n) {
  const auto& pi = model.stationary_law();
  double best = 0.0;
  for (int A = 0; A < 4; ++A)
    for (int B = 0; B < 4; ++B) {
      double pab = 0.0, pa = 0.0, pb = 0.0;
      for (int x = 0; x < 2; ++x) {
        if (A >> x & 1) pa += pi(x);
        if (B >> x & 1) pb += pi(x);
        for (int y = 0; y < 2; ++y)
          if ((A >> x & 1) && (B >> y & 1)) pab += pi(x) * model.power_row(n, x)[y];
      }
      best = std::max(best, std::abs(pab - pa * pb));
    }
  return best;
}

}  // namespace

TEST(Mixing, FlipChainClosedForms) {
  ProcessModel model(flip_chain(0.3));
  MixingReport rep = mixing_report(model, 8, 1);
  for (int n = 1; n <= 8; ++n) {
    const double r = std::pow(0.4, n);
    EXPECT_NEAR(rep.rho[n - 1], r, 1e-12);
    EXPECT_NEAR(rep.alpha[n - 1], 0.25 * r, 1e-12);
    EXPECT_NEAR(rep.alpha[n - 1], alpha_brute(model, n), 1e-12);
    EXPECT_NEAR(rep.phi[n - 1], 0.5 * r, 1e-12);
    EXPECT_NEAR(rep.psi[n - 1], r, 1e-12);
  }
  EXPECT_EQ(check_orderings(rep).verdict, Verdict::pass);
}

TEST(Mixing, IidHasNoDependence) {
  ProcessModel model(rademacher());
  MixingReport rep = mixing_report(model, 4, 1);
  for (int n = 1; n <= 4; ++n) {
    EXPECT_NEAR(rep.alpha[n - 1], 0.0, 1e-15);
    EXPECT_NEAR(rep.rho[n - 1], 0.0, 1e-12);
    EXPECT_NEAR(rep.psi[n - 1], 0.0, 1e-15);
  }
}

TEST(Mixing, OrderingCheckFlagsViolations) {
  ProcessModel model(flip_chain(0.3));
  MixingReport rep = mixing_report(model, 4, 1);
  rep.alpha[2] = rep.alpha[1] * 2.0;
  OrderingCheck ord = check_orderings(rep);
  EXPECT_EQ(ord.verdict, Verdict::fail);
  EXPECT_FALSE(ord.violations.empty());
}
