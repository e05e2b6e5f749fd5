#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "ncsum/nonconv.hpp"
#include "ncsum/variance.hpp"
#include "test_util.hpp"

using namespace ncsum;

namespace {

// f' D (2Z - I - Pi) f with Z the fundamental matrix, f centered.
double fundamental_oracle(const Eigen::Matrix2d& P, const Eigen::Vector2d& pi, Eigen::Vector2d f) {
  Eigen::Matrix2d Pi = Eigen::Vector2d::Ones() * pi.transpose();
  Eigen::Matrix2d Z = (Eigen::Matrix2d::Identity() - P + Pi).inverse();
  f.array() -= pi.dot(f);
  return f.transpose() * pi.asDiagonal() * (2.0 * Z - Eigen::Matrix2d::Identity() - Pi) * f;
}

}  // namespace

TEST(Variance, LinearMatchesFundamentalMatrix) {
  for (double flip : {0.1, 0.3, 0.6}) {
    ModelSpec spec = flip_chain(flip);
    spec.transition = {{1.0 - flip, flip}, {0.5 * flip, 1.0 - 0.5 * flip}};
    spec.states = {{2.0}, {-1.0}};
    ProcessModel model(spec);
    ObservableSpec obs = ObservableSpec::polynomial(1, 1, {{1.0, {1}}});
    Decomposition dec = center_and_decompose(obs, model.marginal());
    VarianceResult r = sigma_linear(model, dec, 1);
    Eigen::Matrix2d P;
    P << 1.0 - flip, flip, 0.5 * flip, 1.0 - 0.5 * flip;
    const double oracle = fundamental_oracle(P, model.stationary_law(), Eigen::Vector2d(2.0, -1.0));
    EXPECT_NEAR(r.sigma_sq, oracle, 1e-10) << "flip " << flip;
    EXPECT_LT(r.tail_bound, 1e-8);
  }
}

TEST(Variance, FastComponentIsProductIntegral) {
  ProcessModel model(rademacher());
  ObservableSpec obs = ObservableSpec::polynomial(2, 1, {{3.0, {1, 1}}});
  Decomposition dec = center_and_decompose(obs, model.marginal());
  EXPECT_DOUBLE_EQ(sigma_fast(dec, 2).sigma_sq, 9.0);
}

TEST(Variance, EmpiricalSigmaOfIidSums) {
  // Unit-variance walks: every replicate's variance estimate is near t.
  Rng rng(5);
  std::normal_distribution<double> g;
  std::vector<double> t = {100, 200, 400, 800};
  std::vector<std::vector<double>> sums(1000, std::vector<double>(t.size()));
  for (auto& row : sums) {
    double s = 0.0;
    double prev = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
      s += std::sqrt(t[k] - prev) * g(rng);
      prev = t[k];
      row[k] = s;
    }
  }
  EmpiricalSigma es = empirical_sigma(sums, t, 1, 1.0);
  EXPECT_NEAR(es.extrapolated, 1.0, 0.15);
}
