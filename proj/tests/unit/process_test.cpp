#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ncsum/process.hpp"
#include "test_util.hpp"

using namespace ncsum;

TEST(Process, StationaryLawOfAsymmetricChain) {
  ModelSpec m = flip_chain(0.3);
  m.transition = {{0.9, 0.1}, {0.4, 0.6}};
  ProcessModel model(m);
  // Two-state balance: pi_0 * p01 = pi_1 * p10.
  EXPECT_NEAR(model.stationary_law()(0), 0.8, 1e-12);
  EXPECT_NEAR(model.stationary_law()(1), 0.2, 1e-12);
}

TEST(Process, PowersFollowSecondEigenvalue) {
  ProcessModel model(flip_chain(0.3));
  for (std::int64_t g = 1; g <= 30; ++g) {
    const double lam = std::pow(0.4, static_cast<double>(g));
    EXPECT_NEAR(model.power_row(g, 0)[0], 0.5 + 0.5 * lam, 1e-14);
    EXPECT_NEAR(model.power_row(g, 0)[1], 0.5 - 0.5 * lam, 1e-14);
  }
}

TEST(Process, PathFrequenciesMatchStationaryLaw) {
  ProcessModel model(flip_chain(0.3));
  Trajectory t = sample_path(model, 200000, 7);
  double ones = 0.0;
  for (std::int64_t n = 0; n <= t.length(); ++n) ones += t.value(n)[0] > 0.0;
  EXPECT_NEAR(ones / static_cast<double>(t.length() + 1), 0.5, 0.01);
}

TEST(Process, SameSeedSamePath) {
  ProcessModel model(flip_chain(0.3));
  Trajectory a = sample_path(model, 1000, 11), b = sample_path(model, 1000, 11);
  EXPECT_EQ(a.values, b.values);
}

TEST(Process, BinaryRoundTrip) {
  ProcessModel model(flip_chain(0.3));
  Trajectory a = sample_path(model, 500, 3);
  std::stringstream buf;
  write_binary(a, buf);
  Trajectory b = read_binary(buf);
  EXPECT_EQ(a.values, b.values);
}
