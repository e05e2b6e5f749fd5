#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncsum/common.hpp"
#include "ncsum/nonconv.hpp"
#include "ncsum/process.hpp"
#include "ncsum/stats.hpp"

namespace ncsum {

struct VarianceResult {
  int i = 1;
  double sigma_sq = 0.0;
  double raw = 0.0;  // before clamping at zero
  std::string method;  // analytic_leq_k | analytic_gt_k | empirical
  std::int64_t truncation = 0;
  double tail_bound = 0.0;
  std::vector<double> a;  // a(l), l = 0..truncation
  double standard_error = 0.0;
  bool exact = true;
  Verdict verdict = Verdict::pass;

  nlohmann::json to_json() const;
};

// Lag series sum_l a_i(l) for a component with linear indices, truncated where the rigorous
// tail bound falls below tail_tolerance.
VarianceResult sigma_linear(const ProcessModel& model, const Decomposition& dec, int i,
                            double tail_tolerance = 1e-12, std::uint64_t seed = 1);

// Product-measure integral of F_i^2, used for components with i > k.
VarianceResult sigma_fast(const Decomposition& dec, int i);

VarianceResult sigma_component(const ProcessModel& model, const Decomposition& dec,
                               const QFamily& qf, int i, double tail_tolerance = 1e-12);

// b_i(n, n') for 1 <= n, n' <= horizon.
struct CovarianceTable {
  std::int64_t horizon = 0;
  std::vector<double> b;               // row-major, (n-1) * horizon + (n'-1)
  std::vector<double> standard_error;  // zero where exact
  bool exact = true;
  double at(std::int64_t n, std::int64_t np) const {
    return b[static_cast<std::size_t>((n - 1) * horizon + (np - 1))];
  }
};

// E of the product of the summands at n and n'. Exact by joint-law enumeration on fully
// observed markov models, Monte Carlo otherwise.
double summand_covariance(const ProcessModel& model, const Decomposition& dec, const QFamily& qf,
                          int i, std::int64_t n, std::int64_t np, double* standard_error = nullptr,
                          std::uint64_t seed = 1);

CovarianceTable covariance_table(const ProcessModel& model, const Decomposition& dec,
                                 const QFamily& qf, int i, std::int64_t horizon,
                                 std::uint64_t seed = 1);

// Exact E Xi_i(t)^2 on a t grid, and the fitted exponent of |E Xi_i(t)^2 - sigma^2 t|.
struct SecondMomentSeries {
  std::vector<std::int64_t> t;
  std::vector<double> second_moment;
  std::vector<double> deviation;
  double exponent = 0.0;
  bool exact_match = false;  // every deviation below 1e-9 t
  Verdict verdict = Verdict::pass;
};

SecondMomentSeries second_moment_series(const ProcessModel& model, const Decomposition& dec,
                                        const QFamily& qf, int i, double sigma_sq,
                                        const std::vector<std::int64_t>& t_grid);

struct EmpiricalSigma {
  VarianceResult result;
  std::vector<double> t;
  std::vector<double> estimate;  // mean Xi_i(t)^2 / t
  std::vector<double> estimate_se;
  double extrapolated = 0.0;
  LineFit extrapolation;  // estimate = A + B / t
  LineFit rate;           // log |mean Xi^2 - sigma^2 t| against log t
  double analytic = 0.0;
  Verdict verdict = Verdict::pass;

  nlohmann::json to_json() const;
};

// rows = replicates, columns = t grid values of Xi_i(t).
EmpiricalSigma empirical_sigma(const std::vector<std::vector<double>>& sums,
                               const std::vector<double>& t_grid, int i, double analytic);

void write_csv(const VarianceResult& r, std::ostream& out);
void write_csv(const CovarianceTable& table, std::ostream& out);

}  // namespace ncsum
