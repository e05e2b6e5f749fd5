#include "ncsum/variance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace ncsum {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// F_i over symbol tuples, row-major with the first argument most significant.
std::vector<double> symbol_tensor(const ProcessModel& model, const Decomposition& dec, int i) {
  const int S = model.alphabet_size();
  std::vector<int> atom(S);
  for (int s = 0; s < S; ++s) {
    atom[s] = dec.atom_index(model.symbol_value(s));
    if (atom[s] < 0) throw Error("symbol value is not an atom of the marginal");
  }
  std::size_t n = 1;
  for (int u = 0; u < i; ++u) n *= S;
  std::vector<double> t(n);
  std::vector<int> args(i);
  for (std::size_t idx = 0; idx < n; ++idx) {
    std::size_t r = idx;
    for (int u = i - 1; u >= 0; --u) {
      args[u] = atom[r % S];
      r /= S;
    }
    t[idx] = dec.component_atoms(i, args);
  }
  return t;
}

// out = (J (x) ... (x) J_i) applied to the tensor, one axis per pair law.
double lag_term(const std::vector<double>& F, const std::vector<Eigen::MatrixXd>& laws, int S) {
  std::vector<double> cur = F, next(F.size());
  const int i = static_cast<int>(laws.size());
  std::size_t inner = F.size();
  for (int u = 0; u < i; ++u) {
    inner /= S;
    std::size_t outer = F.size() / (inner * S);
    const auto& J = laws[u];
    for (std::size_t o = 0; o < outer; ++o)
      for (int a = 0; a < S; ++a)
        for (std::size_t in = 0; in < inner; ++in) {
          double acc = 0.0;
          for (int b = 0; b < S; ++b) acc += J(a, b) * cur[(o * S + b) * inner + in];
          next[(o * S + a) * inner + in] = acc;
        }
    std::swap(cur, next);
  }
  double a = 0.0;
  for (std::size_t k = 0; k < F.size(); ++k) a += F[k] * cur[k];
  return a;
}

double lag_term_mc(const ProcessModel& model, const Decomposition& dec, int i,
                   const std::vector<Eigen::MatrixXd>& laws, int samples, Rng& rng, double* se) {
  const int S = model.alphabet_size();
  std::vector<std::vector<double>> cdf(i);
  for (int u = 0; u < i; ++u) {
    double c = 0.0;
    for (int a = 0; a < S; ++a)
      for (int b = 0; b < S; ++b) cdf[u].push_back(c += laws[u](a, b));
  }
  std::vector<int> x(i), y(i);
  double s1 = 0.0, s2 = 0.0;
  for (int k = 0; k < samples; ++k) {
    for (int u = 0; u < i; ++u) {
      double v = uniform_open(rng) * cdf[u].back();
      int cell = static_cast<int>(std::lower_bound(cdf[u].begin(), cdf[u].end(), v) - cdf[u].begin());
      cell = std::min(cell, S * S - 1);
      x[u] = dec.atom_index(model.symbol_value(cell / S));
      y[u] = dec.atom_index(model.symbol_value(cell % S));
    }
    double v = dec.component_atoms(i, x) * dec.component_atoms(i, y);
    s1 += v;
    s2 += v * v;
  }
  double m = s1 / samples;
  *se = std::sqrt(std::max(0.0, s2 / samples - m * m) / samples);
  return m;
}

}  // namespace

nlohmann::json VarianceResult::to_json() const {
  return {{"i", i},           {"sigma_sq", sigma_sq},    {"raw", raw},
          {"method", method}, {"truncation", truncation}, {"tail_bound", tail_bound},
          {"exact", exact},   {"standard_error", standard_error},
          {"verdict", to_string(verdict)}};
}

VarianceResult sigma_linear(const ProcessModel& model, const Decomposition& dec, int i,
                            double tail_tolerance, std::uint64_t seed) {
  if (!model.fully_observed())
    throw UnsupportedError("sigma_linear needs exact pair laws (fully observed model)");
  if (i < 1 || i > dec.ell()) throw ConfigError("component index out of range");
  if (!dec.has_tables()) throw UnsupportedError("sigma_linear needs an exact decomposition table");
  VarianceResult r;
  r.i = i;
  r.method = "analytic_leq_k";
  const int S = model.alphabet_size();
  const double sup = dec.sup_abs(i);
  if (sup == 0.0) {
    r.a = {0.0};
    return r;
  }
  const bool exact = std::pow(static_cast<double>(S), 2.0 * i) <= 1e6;
  r.exact = exact;
  std::vector<double> F;
  if (exact) F = symbol_tensor(model, dec, i);
  Rng rng(seed);
  double var_acc = 0.0;
  auto term = [&](std::int64_t l) {
    std::vector<Eigen::MatrixXd> laws;
    for (int u = 1; u <= i; ++u) laws.push_back(symbol_pair_law(model, u * l));
    if (exact) return lag_term(F, laws, S);
    double se = 0.0;
    double v = lag_term_mc(model, dec, i, laws, 20000, rng, &se);
    var_acc += (l == 0 ? 1.0 : 4.0) * se * se;
    return v;
  };

  const std::int64_t max_lag = 100000;
  if (model.markov()) {
    std::int64_t L = 0;
    while (L < max_lag && 2.0 * sup * sup * model.l1_tail(static_cast<std::int64_t>(i) * (L + 1)) >= tail_tolerance)
      ++L;
    r.truncation = L;
    r.tail_bound = 2.0 * sup * sup * model.l1_tail(static_cast<std::int64_t>(i) * (L + 1));
    for (std::int64_t l = 0; l <= L; ++l) r.a.push_back(term(l));
    if (r.tail_bound >= tail_tolerance) r.verdict = Verdict::inconclusive;
  } else {
    // No transition matrix: bound the tail with a geometric envelope fitted to |a(l)|.
    const std::int64_t first = 40;
    for (std::int64_t l = 0; l <= first; ++l) r.a.push_back(term(l));
    std::vector<double> ns, vs;
    for (std::int64_t l = first / 2; l <= first; ++l) {
      ns.push_back(static_cast<double>(l));
      vs.push_back(std::abs(r.a[l]));
    }
    GeometricFit g = fit_geometric(ns, vs);
    bool all_zero = std::all_of(vs.begin(), vs.end(), [](double v) { return v < 1e-300; });
    auto tail = [&](std::int64_t L) {
      return all_zero ? 0.0 : 2.0 * g.c * std::pow(g.rate, static_cast<double>(L + 1)) / (1.0 - g.rate);
    };
    if (!all_zero && !g.ok) {
      r.verdict = Verdict::inconclusive;
      r.truncation = first;
      r.tail_bound = std::numeric_limits<double>::infinity();
    } else {
      std::int64_t L = first;
      while (L < 400 && tail(L) >= tail_tolerance) r.a.push_back(term(++L));
      r.truncation = L;
      r.tail_bound = tail(L);
      if (r.tail_bound >= tail_tolerance) r.verdict = Verdict::inconclusive;
    }
  }
  double s = r.a[0];
  for (std::size_t l = 1; l < r.a.size(); ++l) s += 2.0 * r.a[l];
  r.raw = s;
  r.standard_error = std::sqrt(var_acc);
  if (s < -1e-10 && exact) r.verdict = Verdict::fail;
  r.sigma_sq = std::max(0.0, s);
  return r;
}

VarianceResult sigma_fast(const Decomposition& dec, int i) {
  if (i < 1 || i > dec.ell()) throw ConfigError("component index out of range");
  VarianceResult r;
  r.i = i;
  r.method = "analytic_gt_k";
  const auto& mu = dec.marginal();
  const std::size_t A = mu.size();
  double cells = std::pow(static_cast<double>(A), i);
  double s = 0.0;
  if (cells <= 2.0e7 && dec.has_tables()) {
    std::size_t n = static_cast<std::size_t>(cells);
    std::vector<int> args(i);
    for (std::size_t idx = 0; idx < n; ++idx) {
      std::size_t rem = idx;
      double w = 1.0;
      for (int u = i - 1; u >= 0; --u) {
        args[u] = static_cast<int>(rem % A);
        rem /= A;
        w *= mu.weights[args[u]];
      }
      if (w == 0.0) continue;
      double f = dec.component_atoms(i, args);
      s += w * f * f;
    }
    r.exact = mu.exact;
  } else {
    Rng rng(7);
    std::discrete_distribution<std::size_t> pick(mu.weights.begin(), mu.weights.end());
    const int samples = 1 << 16;
    const int dim = dec.dimension();
    std::vector<double> args(static_cast<std::size_t>(i) * dim);
    double s2 = 0.0;
    for (int k = 0; k < samples; ++k) {
      for (int u = 0; u < i; ++u) {
        auto p = mu.point(pick(rng));
        std::copy(p.begin(), p.end(), args.begin() + static_cast<std::ptrdiff_t>(u) * dim);
      }
      double f = dec.component(i, args);
      s += f * f;
      s2 += f * f * f * f;
    }
    s /= samples;
    r.standard_error = std::sqrt(std::max(0.0, s2 / samples - s * s) / samples);
    r.exact = false;
  }
  r.a = {s};
  r.raw = s;
  r.sigma_sq = std::max(0.0, s);
  return r;
}

VarianceResult sigma_component(const ProcessModel& model, const Decomposition& dec,
                               const QFamily& qf, int i, double tail_tolerance) {
  if (i <= qf.k) return sigma_linear(model, dec, i, tail_tolerance);
  return sigma_fast(dec, i);
}

double summand_covariance(const ProcessModel& model, const Decomposition& dec, const QFamily& qf,
                          int i, std::int64_t n, std::int64_t np, double* standard_error,
                          std::uint64_t seed) {
  const int dim = dec.dimension();
  std::vector<std::int64_t> pos;
  for (int u = 0; u < i; ++u) pos.push_back(qf.q[u](n));
  for (int u = 0; u < i; ++u) pos.push_back(qf.q[u](np));
  std::vector<std::int64_t> uniq = pos;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  const int S = model.alphabet_size();
  const int k = static_cast<int>(uniq.size());
  if (standard_error) *standard_error = 0.0;

  if (model.markov() && model.fully_observed() && dec.has_tables() &&
      std::pow(static_cast<double>(S), k) <= 1e6) {
    std::vector<int> slot(pos.size());
    for (std::size_t p = 0; p < pos.size(); ++p)
      slot[p] = static_cast<int>(std::lower_bound(uniq.begin(), uniq.end(), pos[p]) - uniq.begin());
    std::vector<int> atom(S);
    for (int s = 0; s < S; ++s) atom[s] = dec.atom_index(model.symbol_value(s));
    std::vector<int> sym(k, 0);
    std::vector<double> weight(k + 1, 1.0);
    std::vector<int> x(i), y(i);
    double total = 0.0;
    // Depth-first enumeration of the symbols at the distinct positions.
    int depth = 0;
    sym[0] = -1;
    while (depth >= 0) {
      if (++sym[depth] >= S) {
        --depth;
        continue;
      }
      double w = depth == 0 ? model.stationary_law()[sym[0]]
                            : model.power_entry(uniq[depth] - uniq[depth - 1], sym[depth - 1], sym[depth]);
      weight[depth + 1] = weight[depth] * w;
      if (weight[depth + 1] == 0.0) continue;
      if (depth + 1 < k) {
        sym[++depth] = -1;
        continue;
      }
      for (int u = 0; u < i; ++u) {
        x[u] = atom[sym[slot[u]]];
        y[u] = atom[sym[slot[i + u]]];
      }
      total += weight[k] * dec.component_atoms(i, x) * dec.component_atoms(i, y);
    }
    return total;
  }

  const int samples = 4096;
  double s1 = 0.0, s2 = 0.0;
  std::vector<double> x(static_cast<std::size_t>(i) * dim), y(x.size());
  for (int r = 0; r < samples; ++r) {
    Path path = sample_sparse(model, uniq, {}, mix_seed(seed, static_cast<std::uint64_t>(r)));
    for (int u = 0; u < i; ++u) {
      auto a = path.value(pos[u]);
      auto b = path.value(pos[i + u]);
      std::copy(a.begin(), a.end(), x.begin() + static_cast<std::ptrdiff_t>(u) * dim);
      std::copy(b.begin(), b.end(), y.begin() + static_cast<std::ptrdiff_t>(u) * dim);
    }
    double v = dec.component(i, x) * dec.component(i, y);
    s1 += v;
    s2 += v * v;
  }
  double m = s1 / samples;
  if (standard_error) *standard_error = std::sqrt(std::max(0.0, s2 / samples - m * m) / samples);
  return m;
}

CovarianceTable covariance_table(const ProcessModel& model, const Decomposition& dec,
                                 const QFamily& qf, int i, std::int64_t horizon,
                                 std::uint64_t seed) {
  if (horizon < 1) throw ConfigError("covariance table horizon must be >= 1");
  CovarianceTable t;
  t.horizon = horizon;
  const std::size_t cells = static_cast<std::size_t>(horizon * horizon);
  t.b.assign(cells, 0.0);
  t.standard_error.assign(cells, 0.0);
  for (std::int64_t n = 1; n <= horizon; ++n)
    for (std::int64_t np = n; np <= horizon; ++np) {
      double se = 0.0;
      double v = summand_covariance(model, dec, qf, i, n, np, &se,
                                    mix_seed(seed, static_cast<std::uint64_t>(n * horizon + np)));
      t.b[(n - 1) * horizon + (np - 1)] = v;
      t.b[(np - 1) * horizon + (n - 1)] = v;
      t.standard_error[(n - 1) * horizon + (np - 1)] = se;
      t.standard_error[(np - 1) * horizon + (n - 1)] = se;
      if (se > 0.0) t.exact = false;
    }
  return t;
}

SecondMomentSeries second_moment_series(const ProcessModel& model, const Decomposition& dec,
                                        const QFamily& qf, int i, double sigma_sq,
                                        const std::vector<std::int64_t>& t_grid) {
  if (!model.markov() || !model.fully_observed())
    throw UnsupportedError("exact second moments need a fully observed markov model");
  SecondMomentSeries out;
  if (t_grid.empty()) return out;
  const std::int64_t t_max = *std::max_element(t_grid.begin(), t_grid.end());
  const double sup = dec.sup_abs(i);
  double acc = 0.0;
  std::size_t next = 0;
  std::vector<std::int64_t> grid = t_grid;
  std::sort(grid.begin(), grid.end());
  for (std::int64_t t = 1; t <= t_max; ++t) {
    acc += summand_covariance(model, dec, qf, i, t, t);
    const std::int64_t top = qf.q[i - 1](t);
    const std::int64_t below = i >= 2 ? qf.q[i - 2](t) : std::numeric_limits<std::int64_t>::min();
    for (std::int64_t n = t - 1; n >= 1; --n) {
      std::int64_t second = std::max(below, qf.q[i - 1](n));
      double bound = sup * sup * model.l1_distance(top - second);
      if (bound * static_cast<double>(t_max) < 1e-16) {
        if (qf.q[i - 1](n) <= below) break;
        continue;
      }
      acc += 2.0 * summand_covariance(model, dec, qf, i, n, t);
    }
    while (next < grid.size() && grid[next] == t) {
      out.t.push_back(t);
      out.second_moment.push_back(acc);
      out.deviation.push_back(std::abs(acc - sigma_sq * static_cast<double>(t)));
      ++next;
    }
  }
  out.exact_match = true;
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < out.t.size(); ++k) {
    double t = static_cast<double>(out.t[k]);
    if (out.deviation[k] > 1e-9 * t) out.exact_match = false;
    if (out.deviation[k] > 0.0) {
      lx.push_back(std::log(t));
      ly.push_back(std::log(out.deviation[k]));
    }
  }
  if (out.exact_match) return out;
  LineFit f = fit_line(lx, ly);
  out.exponent = f.slope;
  out.verdict = verdict_of(f.slope < 1.0);
  return out;
}

nlohmann::json EmpiricalSigma::to_json() const {
  return {{"i", result.i},
          {"analytic", analytic},
          {"estimate_at_largest_t", estimate.empty() ? 0.0 : estimate.back()},
          {"standard_error", estimate_se.empty() ? 0.0 : estimate_se.back()},
          {"extrapolated", extrapolated},
          {"rate_exponent", rate.slope},
          {"rate_intercept", rate.intercept},
          {"rate_residuals", rate.residuals},
          {"verdict", to_string(verdict)}};
}

EmpiricalSigma empirical_sigma(const std::vector<std::vector<double>>& sums,
                               const std::vector<double>& t_grid, int i, double analytic) {
  if (sums.size() < 200) throw ConfigError("empirical sigma needs at least 200 replicates");
  EmpiricalSigma e;
  e.analytic = analytic;
  e.t = t_grid;
  const double R = static_cast<double>(sums.size());
  std::vector<double> inv_t, lx, ly;
  for (std::size_t c = 0; c < t_grid.size(); ++c) {
    std::vector<double> sq(sums.size());
    for (std::size_t r = 0; r < sums.size(); ++r) sq[r] = sums[r][c] * sums[r][c];
    double t = t_grid[c];
    double m = mean(sq);
    e.estimate.push_back(m / t);
    e.estimate_se.push_back(std::sqrt(variance(sq) / R) / t);
    inv_t.push_back(1.0 / t);
    double dev = std::abs(m - analytic * t);
    if (dev > 0.0) {
      lx.push_back(std::log(t));
      ly.push_back(std::log(dev));
    }
  }
  e.extrapolation = fit_line(inv_t, e.estimate);
  e.extrapolated = t_grid.size() >= 2 ? e.extrapolation.intercept : e.estimate.back();
  if (lx.size() >= 2) e.rate = fit_line(lx, ly);
  e.result.i = i;
  e.result.method = "empirical";
  e.result.raw = e.estimate.back();
  e.result.sigma_sq = std::max(0.0, e.estimate.back());
  e.result.standard_error = e.estimate_se.back();
  e.result.exact = false;
  double diff = std::abs(e.estimate.back() - analytic);
  e.verdict = verdict_of(diff <= 3.0 * e.estimate_se.back() || diff == 0.0);
  e.result.verdict = e.verdict;
  return e;
}

void write_csv(const VarianceResult& r, std::ostream& out) {
  out << "l,a\n";
  for (std::size_t l = 0; l < r.a.size(); ++l) out << l << ',' << fmt(r.a[l]) << '\n';
}

void write_csv(const CovarianceTable& t, std::ostream& out) {
  out << "n,n_prime,b,standard_error\n";
  for (std::int64_t n = 1; n <= t.horizon; ++n)
    for (std::int64_t np = 1; np <= t.horizon; ++np)
      out << n << ',' << np << ',' << fmt(t.at(n, np)) << ','
          << fmt(t.standard_error[(n - 1) * t.horizon + (np - 1)]) << '\n';
}

}  // namespace ncsum
