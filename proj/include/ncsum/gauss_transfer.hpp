#pragma once

#include <span>
#include <vector>

namespace ncsum {

// Transfer operator of the Gauss map acting on functions of y in [0,1], represented by their
// values at Chebyshev points. Applying the operator for digit k maps a density g of T^n x to
// the (unnormalized) density of T^{n+1} x restricted to the event that the next digit is k.
class GaussTransfer {
 public:
  using Fn = std::vector<double>;

  // digits: top digits kept as separate symbols 0..digits-1; symbol `digits` pools the rest.
  explicit GaussTransfer(int digits, int nodes = 40, int explicit_terms = 256);

  int digits() const { return digits_; }
  int alphabet_size() const { return digits_ + 1; }
  std::span<const double> nodes() const { return nodes_; }

  Fn invariant_density() const;
  // symbol -1 sums over every digit (no information).
  Fn apply(const Fn& g, int symbol) const;
  double integrate(const Fn& g) const;
  double eval(const Fn& g, double y) const;

  // Closed form stationary probability of a quotient symbol.
  double symbol_probability(int symbol) const;
  int symbol_of_digit(long long digit) const;

 private:
  double digit_sum(const Fn& g, double y, long long first) const;

  int digits_;
  int terms_;
  std::vector<double> nodes_;
  std::vector<double> bary_;
  std::vector<double> quad_;
};

}  // namespace ncsum
