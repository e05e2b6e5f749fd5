#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncsum/common.hpp"
#include "ncsum/process.hpp"

namespace ncsum {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Coefficient { alpha, rho, phi, psi };
std::string_view to_string(Coefficient c);

// Joint law of the symbol patterns on a past window ending at k and a future window
// starting at k + n, each of width W.
struct WindowJoint {
  Eigen::MatrixXd joint;
  Eigen::VectorXd past;
  Eigen::VectorXd future;
};

WindowJoint window_joint(const ProcessModel& model, std::int64_t n, int width,
                         std::size_t budget = 1u << 20);

double coefficient_from_joint(const WindowJoint& wj, Coefficient kind);
double coefficient(const ProcessModel& model, std::int64_t n, Coefficient kind, int width = 1,
                   std::size_t budget = 1u << 20);

struct BetaValue {
  double value = 0.0;
  bool exact = true;
  double standard_error = 0.0;
};

// p = kInf for the sup norm.
BetaValue beta_coefficient(const ProcessModel& model, std::int64_t n, double p,
                           std::uint64_t seed = 1);

struct InterpolationBound {
  double value = 2.0;
  double via_alpha = kInf;
  double via_rho = kInf;
  double via_phi = kInf;
};

InterpolationBound interpolation_bounds(double alpha, double rho, double phi, double psi, double q,
                                        double p);

struct MixingRow {
  std::int64_t n = 0;
  std::string kind;
  double value = 0.0;
  int window = 1;
};

struct MixingReport {
  int window = 1;
  std::int64_t n_max = 0;
  std::string note;
  std::vector<double> alpha, rho, phi, psi;  // index n-1
  std::vector<MixingRow> rows;
  double rate_bound(double q, double p, std::int64_t n) const;
};

MixingReport mixing_report(const ProcessModel& model, std::int64_t n_max, int width,
                           std::size_t budget = 1u << 20);
void write_csv(const MixingReport& report, std::ostream& out);

// Nonnegativity, monotonicity in n, 4 alpha <= psi, 2 phi <= psi and each named coefficient
// below its interpolation bound, all within tol.
struct OrderingCheck {
  Verdict verdict = Verdict::pass;
  std::vector<std::string> violations;
  double worst_excess = 0.0;
};
OrderingCheck check_orderings(const MixingReport& report, double tol = 1e-10);

struct BetaReport {
  double p = 2.0;
  std::vector<double> values;  // index n-1
  bool exact = true;
};

BetaReport beta_report(const ProcessModel& model, double p, std::int64_t n_max,
                       std::uint64_t seed = 1);

struct AssumptionParams {
  double p = 2.0;
  double q = 2.0;
  double delta = 0.5;
  double m = 8.0;
  double iota = 1.0;
  double kappa = 1.0;
  int d = 0;  // (ell - 1) * dimension
};

struct Certificate {
  Verdict verdict = Verdict::pass;
  nlohmann::json record;
};

Certificate verify_assumption(const MixingReport& mixing, const BetaReport& beta,
                              const AssumptionParams& params, const MomentTable& moments);

using ProbeFunction = std::function<double(double past, double future)>;

struct ProbeTable {
  std::vector<std::int64_t> n;
  std::vector<double> value;
  bool monotone = true;
  double fitted_rate = 0.0;
  double rho_rate = 0.0;
  Verdict verdict = Verdict::pass;
};

// ||E(f(X, Y_n) | past) - g(X)||_2 with X the observable at the end of the past and Y_n the
// observable n steps later; g(x) = E f(x, Y).
ProbeTable conditional_bound_probe(const ProcessModel& model, std::int64_t n_max,
                                   const std::vector<ProbeFunction>& family);

}  // namespace ncsum
