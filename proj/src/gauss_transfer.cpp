#include "ncsum/gauss_transfer.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ncsum {

namespace {

// 8-point Gauss-Legendre on [-1,1].
constexpr double kGl8x[] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                            -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                            0.7966664774136267,  0.9602898564975363};
constexpr double kGl8w[] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                            0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                            0.2223810344533745, 0.1012285362903763};

}  // namespace

GaussTransfer::GaussTransfer(int digits, int nodes, int explicit_terms)
    : digits_(digits), terms_(explicit_terms) {
  if (digits < 1) throw std::invalid_argument("gauss quotient needs at least one digit");
  const double pi = std::numbers::pi;
  nodes_.resize(nodes);
  bary_.resize(nodes);
  quad_.resize(nodes);
  for (int k = 0; k < nodes; ++k) {
    double th = (2.0 * k + 1.0) * pi / (2.0 * nodes);
    nodes_[k] = 0.5 * (1.0 - std::cos(th));
    bary_[k] = (k % 2 == 0 ? 1.0 : -1.0) * std::sin(th);
    // Fejer's first rule, mapped to [0,1].
    double s = 0.0;
    for (int j = 1; j <= nodes / 2; ++j) s += std::cos(2.0 * j * th) / (4.0 * j * j - 1.0);
    quad_[k] = (1.0 - 2.0 * s) / nodes;
  }
}

GaussTransfer::Fn GaussTransfer::invariant_density() const {
  Fn g(nodes_.size());
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = 1.0 / ((1.0 + nodes_[k]) * std::numbers::ln2);
  return g;
}

double GaussTransfer::eval(const Fn& g, double y) const {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    double d = y - nodes_[k];
    if (d == 0.0) return g[k];
    double w = bary_[k] / d;
    num += w * g[k];
    den += w;
  }
  return num / den;
}

double GaussTransfer::integrate(const Fn& g) const {
  double s = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) s += quad_[k] * g[k];
  return s;
}

double GaussTransfer::digit_sum(const Fn& g, double y, long long first) const {
  auto term = [&](double k) {
    double z = 1.0 / (k + y);
    return eval(g, z) * z * z;
  };
  double s = 0.0;
  long long last = first + terms_ - 1;
  for (long long k = first; k <= last; ++k) s += term(static_cast<double>(k));
  // Euler-Maclaurin tail from k0 = last + 1: integral + f/2 - f'/12.
  double k0 = static_cast<double>(last + 1);
  double z0 = 1.0 / (k0 + y);
  double integral = 0.0;
  for (int i = 0; i < 8; ++i) {
    double z = 0.5 * z0 * (kGl8x[i] + 1.0);
    integral += 0.5 * z0 * kGl8w[i] * eval(g, z);
  }
  double h = 0.5;
  double deriv = (term(k0 + h) - term(k0 - h)) / (2.0 * h);
  return s + integral + 0.5 * term(k0) - deriv / 12.0;
}

GaussTransfer::Fn GaussTransfer::apply(const Fn& g, int symbol) const {
  Fn out(nodes_.size());
  for (std::size_t j = 0; j < nodes_.size(); ++j) {
    double y = nodes_[j];
    if (symbol >= 0 && symbol < digits_) {
      double k = symbol + 1.0;
      double z = 1.0 / (k + y);
      out[j] = eval(g, z) * z * z;
    } else if (symbol == digits_) {
      out[j] = digit_sum(g, y, digits_ + 1);
    } else if (symbol == -1) {
      out[j] = digit_sum(g, y, 1);
    } else {
      throw std::invalid_argument("gauss quotient symbol out of range");
    }
  }
  return out;
}

double GaussTransfer::symbol_probability(int symbol) const {
  if (symbol < 0 || symbol > digits_) return 0.0;
  if (symbol == digits_) return std::log2((digits_ + 2.0) / (digits_ + 1.0));
  double k = symbol + 1.0;
  return std::log2((k + 1.0) * (k + 1.0) / (k * (k + 2.0)));
}

int GaussTransfer::symbol_of_digit(long long digit) const {
  if (digit <= digits_) return static_cast<int>(digit - 1);
  return digits_;
}

}  // namespace ncsum
