#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ncsum/common.hpp"
#include "ncsum/gauss_transfer.hpp"

namespace ncsum {

enum class ModelKind { iid, markov_chain, smeared_markov, doubling_map, gauss_map };
enum class Observation { orbit, digit };

std::string_view to_string(ModelKind k);
ModelKind model_kind_from_string(std::string_view s);

struct ModelSpec {
  ModelKind kind = ModelKind::markov_chain;
  std::string id;
  // Observable value attached to each state of the driving chain.
  std::vector<std::vector<double>> states;
  std::vector<double> probs;                      // iid
  std::vector<std::vector<double>> transition;    // markov_chain, smeared_markov
  std::vector<double> smear_weights;              // empty: 2^{-j-1}, j < smear_length
  int smear_length = 8;
  Observation observation = Observation::orbit;   // doubling_map, gauss_map
  int digits = 3;                                 // gauss_map quotient size
};

// Stationary one-dimensional law of X(n), either as exact atoms or a quadrature rule.
struct Marginal {
  int dimension = 1;
  std::vector<double> points;  // size() * dimension, row per atom
  std::vector<double> weights;
  bool exact = true;
  std::string method;
  std::size_t size() const { return weights.size(); }
  std::span<const double> point(std::size_t i) const {
    return {points.data() + i * dimension, static_cast<std::size_t>(dimension)};
  }
};

struct MomentTable {
  std::vector<double> theta;
  std::vector<double> gamma;  // (E |X|^theta)^{1/theta}; theta = inf encoded as +infinity
  bool exact = true;
  double at(double th) const;
};

// Stationary process X(n) = sum_j w_j f(xi_{n+j}) driven by a finite Markov chain xi, or a
// Gauss map orbit observed through its continued fraction digits. The filtration is generated
// by the driving symbols.
class ProcessModel {
 public:
  explicit ProcessModel(const ModelSpec& spec);

  ModelKind kind() const { return spec_.kind; }
  const std::string& id() const { return spec_.id; }
  const ModelSpec& spec() const { return spec_; }
  int dimension() const { return dim_; }
  int alphabet_size() const { return alphabet_; }
  bool markov() const { return spec_.kind != ModelKind::gauss_map; }
  bool fully_observed() const;
  // Symbols ahead (including the current one) that determine X(n); 0 when unbounded.
  int lookahead() const;

  const Eigen::MatrixXd& transition() const;
  const Eigen::VectorXd& stationary_law() const { return pi_; }
  std::span<const double> symbol_value(int s) const;
  const std::vector<double>& weights() const { return weights_; }
  const GaussTransfer* gauss() const { return gauss_.get(); }

  // Row s of P^gap; gaps past numerical convergence return the stationary law.
  const double* power_row(std::int64_t gap, int s) const;
  double power_entry(std::int64_t gap, int from, int to) const {
    return power_row(gap, from)[to];
  }
  // max_s ||P^gap(s,.) - pi||_1
  double l1_distance(std::int64_t gap) const;
  // Rigorous bound on sum_{g >= gap} l1_distance(g).
  double l1_tail(std::int64_t gap) const;
  std::int64_t converged_gap() const { return converged_; }

  int quotient_symbol(std::int64_t raw) const;
  // X(n) from the quotient symbols xi_n .. xi_{n+lookahead-1} (markov kinds).
  void value_from_window(std::span<const int> window, std::span<double> out) const;

  Marginal marginal() const;
  // Index of the marginal atom carried by symbol s (fully observed models).
  int atom_of_symbol(int s) const { return atom_of_symbol_.at(s); }

 private:
  void build_markov();
  void build_powers();

  ModelSpec spec_;
  int dim_ = 1;
  int alphabet_ = 0;
  Eigen::MatrixXd P_;
  Eigen::VectorXd pi_;
  std::vector<double> values_;   // alphabet_ x dim_
  std::vector<double> weights_;
  std::vector<int> atom_of_symbol_;
  std::vector<double> powers_;   // row-major (gap, from, to) for gap < converged_
  std::vector<double> l1_;
  std::vector<double> l1_suffix_;
  double tail_after_ = 0.0;
  std::int64_t converged_ = 1;
  std::shared_ptr<GaussTransfer> gauss_;
};

ProcessModel build_process(const ModelSpec& spec);

// Dense sample path X(0..length). For gauss_map, `symbols` holds raw digits.
struct Trajectory {
  std::string model_id;
  std::uint64_t seed = 0;
  int dimension = 1;
  std::vector<std::int64_t> symbols;
  std::vector<double> values;
  std::int64_t length() const {
    return static_cast<std::int64_t>(values.size()) / dimension - 1;
  }
  std::span<const double> value(std::int64_t n) const {
    return {values.data() + n * dimension, static_cast<std::size_t>(dimension)};
  }
};

Trajectory sample_path(const ProcessModel& model, std::int64_t length, std::uint64_t seed);

void write_binary(const Trajectory& path, std::ostream& out);
Trajectory read_binary(std::istream& in);

// Quotient symbols and observable values on an arbitrary sorted position set. Used where
// the indices q_l(n) are too far apart to simulate every intermediate step.
class Path {
 public:
  Path() = default;
  static Path from_trajectory(const ProcessModel& model, const Trajectory& t);

  int dimension() const { return dim_; }
  bool has_symbol(std::int64_t pos) const;
  int symbol(std::int64_t pos) const;
  bool has_value(std::int64_t pos) const;
  std::span<const double> value(std::int64_t pos) const;
  std::int64_t last_symbol_position() const;
  std::int64_t last_value_position() const;

 private:
  friend Path sample_sparse(const ProcessModel&, std::vector<std::int64_t>,
                            std::vector<std::int64_t>, std::uint64_t);
  std::ptrdiff_t symbol_index(std::int64_t pos) const;
  std::ptrdiff_t value_index(std::int64_t pos) const;

  int dim_ = 1;
  bool dense_ = false;
  std::vector<std::int64_t> sym_pos_;
  std::vector<int> syms_;
  std::vector<std::int64_t> val_pos_;
  std::vector<double> vals_;
};

// Samples the stationary process jointly at the requested value positions (and the extra
// symbol positions), reproducibly from the seed.
Path sample_sparse(const ProcessModel& model, std::vector<std::int64_t> value_positions,
                   std::vector<std::int64_t> symbol_positions, std::uint64_t seed);

// Joint law of (xi_0, xi_lag) over quotient symbols.
Eigen::MatrixXd symbol_pair_law(const ProcessModel& model, std::int64_t lag);
// Joint law of (X(0), X(lag)) over state pairs; fully observed models only.
Eigen::MatrixXd pair_distribution(const ProcessModel& model, std::int64_t lag);

// E(X(m) | F_{m-r, m+r}) for a markov-kind model, reading quotient symbols through `symbol`.
template <class SymbolFn>
void windowed_value(const ProcessModel& model, SymbolFn&& symbol, std::int64_t m, std::int64_t r,
                    std::span<double> out);

std::vector<double> conditional_expectation(const ProcessModel& model, const Trajectory& path,
                                            std::int64_t m, std::int64_t r);

MomentTable compute_moments(const ProcessModel& model, const std::vector<double>& thetas);

// ---- implementation of the template ----

template <class SymbolFn>
void windowed_value(const ProcessModel& model, SymbolFn&& symbol, std::int64_t m, std::int64_t r,
                    std::span<double> out) {
  const int dim = model.dimension();
  const auto& w = model.weights();
  const std::int64_t len = static_cast<std::int64_t>(w.size());
  for (int d = 0; d < dim; ++d) out[d] = 0.0;
  const std::int64_t known = std::min(r, len - 1);
  for (std::int64_t j = 0; j <= known; ++j) {
    auto v = model.symbol_value(symbol(m + j));
    for (int d = 0; d < dim; ++d) out[d] += w[j] * v[d];
  }
  if (known == len - 1) return;
  const int last = symbol(m + known);
  for (std::int64_t j = known + 1; j < len; ++j) {
    const double* row = model.power_row(j - known, last);
    for (int s = 0; s < model.alphabet_size(); ++s) {
      if (row[s] == 0.0) continue;
      auto v = model.symbol_value(s);
      for (int d = 0; d < dim; ++d) out[d] += w[j] * row[s] * v[d];
    }
  }
}

}  // namespace ncsum
