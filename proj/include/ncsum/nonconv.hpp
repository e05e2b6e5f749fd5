#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncsum/common.hpp"
#include "ncsum/process.hpp"

namespace ncsum {

// One index map n -> q(n).
class IndexFunction {
 public:
  enum class Type { linear, polynomial, table };

  static IndexFunction linear(std::int64_t multiplier);
  // coefficients[d] multiplies n^d.
  static IndexFunction polynomial(std::vector<std::int64_t> coefficients);
  // values[n] for n = 0..size-1.
  static IndexFunction tabulated(std::vector<std::int64_t> values);

  std::int64_t operator()(std::int64_t n) const;
  Type type() const { return type_; }
  std::int64_t multiplier() const { return multiplier_; }
  std::string describe() const;
  nlohmann::json to_json() const;

 private:
  Type type_ = Type::linear;
  std::int64_t multiplier_ = 1;
  std::vector<std::int64_t> coeffs_;
};

struct QFamily {
  int k = 1;
  std::vector<IndexFunction> q;
  double growth_delta = 1.0;
  int ell() const { return static_cast<int>(q.size()); }
};

struct QCertificate {
  Verdict verdict = Verdict::pass;
  nlohmann::json record;
};

// Finite-horizon check of the structural conditions on the index family. The separation
// condition is asymptotic; it is certified by monotone divergence over the checked range only.
QCertificate validate_q_family(const QFamily& qf, std::int64_t horizon);

struct Monomial {
  double coefficient = 1.0;
  std::vector<int> powers;  // one per flattened coordinate, ell * dimension entries
};

struct ObservableSpec {
  int ell = 1;
  int dimension = 1;
  std::function<double(std::span<const double>)> F;
  double K = 1.0;
  double iota = 1.0;
  double kappa = 1.0;
  std::string description;

  static ObservableSpec polynomial(int ell, int dimension, std::vector<Monomial> terms);
};

// F = F_1(x_1) + ... + F_ell(x_1..x_ell) + centering, each F_i integrating to zero in its
// last argument against the marginal law.
class Decomposition {
 public:
  Decomposition(ObservableSpec spec, Marginal marginal);

  int ell() const { return spec_.ell; }
  int dimension() const { return spec_.dimension; }
  double centering() const { return centering_; }
  const std::string& method() const { return method_; }
  double error_bound() const { return error_bound_; }
  const Marginal& marginal() const { return marginal_; }
  const ObservableSpec& spec() const { return spec_; }
  // Whether exact tables over the atom grid were built.
  bool has_tables() const { return tables_; }

  // i is 1-based; args holds i * dimension values.
  double component(int i, std::span<const double> args) const;
  // Fast path when every argument is a marginal atom.
  double component_atoms(int i, std::span<const int> atoms) const;
  // Atom index of a value, or -1.
  int atom_index(std::span<const double> value) const;
  // max |F_i| over the atom grid (sampled when the grid has no tables).
  double sup_abs(int i) const { return sup_abs_.at(i - 1); }
  // Whether F_i vanishes identically on the atom grid.
  bool vanishes(int i) const { return sup_abs(i) == 0.0; }

 private:
  double partial_mean(int i, std::span<const double> prefix) const;

  ObservableSpec spec_;
  Marginal marginal_;
  double centering_ = 0.0;
  std::string method_;
  double error_bound_ = 0.0;
  bool tables_ = false;
  std::vector<std::vector<double>> mean_table_;  // mean_table_[i] over atoms^i, i = 0..ell
  std::vector<double> sup_abs_;
  std::vector<std::size_t> order_;  // atoms sorted by first coordinate
};

Decomposition center_and_decompose(const ObservableSpec& spec, const Marginal& marginal);

struct RegularityReport {
  Verdict verdict = Verdict::pass;
  double max_holder_quotient = 0.0;
  double max_growth_quotient = 0.0;
  std::int64_t samples = 0;
};

RegularityReport regularity_probe(const ObservableSpec& spec, std::int64_t samples,
                                  std::uint64_t seed = 1, double box = 1.0);

struct NonconvSumSeries {
  std::int64_t horizon = 0;
  int ell = 0;
  std::vector<std::vector<double>> summand;  // summand[i-1][n], n = 0..horizon (n = 0 unused)
  std::vector<std::vector<double>> partial;  // partial[i-1][t]
  std::vector<double> total;                 // total[t]
};

// Positions q_u(n), u <= ell, n <= horizon, at which X must be known.
std::vector<std::int64_t> required_positions(const QFamily& qf, std::int64_t horizon);

NonconvSumSeries evaluate_sums(const Path& path, const QFamily& qf, const Decomposition& dec,
                               std::int64_t horizon);

// Evaluates Y_i(n) = F_i(X(q_1(n)),...,X(q_i(n))).
double summand(const Path& path, const QFamily& qf, const Decomposition& dec, int i,
               std::int64_t n);

void write_csv(const NonconvSumSeries& s, std::ostream& out, std::int64_t stride = 1);

}  // namespace ncsum
