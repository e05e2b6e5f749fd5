#include "ncsum/mixing.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cmath>
#include <map>
#include <ostream>

#include "ncsum/stats.hpp"

namespace ncsum {

std::string_view to_string(Coefficient c) {
  switch (c) {
    case Coefficient::alpha: return "alpha";
    case Coefficient::rho: return "rho";
    case Coefficient::phi: return "phi";
    case Coefficient::psi: return "psi";
  }
  return "?";
}

WindowJoint window_joint(const ProcessModel& model, std::int64_t n, int width, std::size_t budget) {
  if (width < 1) throw ConfigError("window width must be >= 1");
  if (n < 0) throw ConfigError("separation must be >= 0");
  const int S = model.alphabet_size();
  const std::int64_t k = width - 1;
  std::vector<std::int64_t> positions;
  for (std::int64_t j = 0; j < width; ++j) positions.push_back(j);
  for (std::int64_t j = 0; j < width; ++j) positions.push_back(k + n + j);
  std::sort(positions.begin(), positions.end());
  positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
  const int U = static_cast<int>(positions.size());
  if (std::pow(static_cast<double>(S), U) > static_cast<double>(budget))
    throw BudgetError("window enumeration exceeds the state budget");
  std::size_t side = 1;
  for (int j = 0; j < width; ++j) side *= S;

  WindowJoint wj;
  wj.joint = Eigen::MatrixXd::Zero(side, side);
  std::vector<int> pattern(U);

  auto leaf = [&](double prob) {
    std::size_t a = 0, b = 0;
    for (int i = 0; i < U; ++i) {
      if (positions[i] <= k) a = a * S + pattern[i];
    }
    for (int i = 0; i < U; ++i) {
      if (positions[i] >= k + n) b = b * S + pattern[i];
    }
    wj.joint(a, b) += prob;
  };

  if (model.markov()) {
    const auto& pi = model.stationary_law();
    auto rec = [&](auto&& self, int i, double prob) -> void {
      if (prob == 0.0) return;
      if (i == U) {
        leaf(prob);
        return;
      }
      for (int s = 0; s < S; ++s) {
        pattern[i] = s;
        double p = i == 0 ? pi[s]
                          : model.power_entry(positions[i] - positions[i - 1], pattern[i - 1], s);
        self(self, i + 1, prob * p);
      }
    };
    rec(rec, 0, 1.0);
  } else {
    const GaussTransfer& gt = *model.gauss();
    auto rec = [&](auto&& self, int i, const GaussTransfer::Fn& g) -> void {
      if (i == U) {
        leaf(gt.integrate(g));
        return;
      }
      GaussTransfer::Fn base = g;
      if (i > 0)
        for (std::int64_t f = 1; f < positions[i] - positions[i - 1]; ++f) base = gt.apply(base, -1);
      for (int s = 0; s < S; ++s) {
        pattern[i] = s;
        self(self, i + 1, gt.apply(base, s));
      }
    };
    rec(rec, 0, gt.invariant_density());
  }
  wj.past = wj.joint.rowwise().sum();
  wj.future = wj.joint.colwise().sum().transpose();
  return wj;
}

double coefficient_from_joint(const WindowJoint& wj, Coefficient kind) {
  std::vector<int> rows, cols;
  for (int a = 0; a < wj.past.size(); ++a)
    if (wj.past[a] > 0.0) rows.push_back(a);
  for (int b = 0; b < wj.future.size(); ++b)
    if (wj.future[b] > 0.0) cols.push_back(b);
  const int R = static_cast<int>(rows.size()), C = static_cast<int>(cols.size());
  auto J = [&](int i, int j) { return wj.joint(rows[i], cols[j]); };
  auto p = [&](int i) { return wj.past[rows[i]]; };
  auto q = [&](int j) { return wj.future[cols[j]]; };

  switch (kind) {
    case Coefficient::rho: {
      if (R < 2 || C < 2) return 0.0;
      Eigen::MatrixXd M(R, C);
      for (int i = 0; i < R; ++i)
        for (int j = 0; j < C; ++j) M(i, j) = J(i, j) / std::sqrt(p(i) * q(j));
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
      return std::clamp(svd.singularValues()[1], 0.0, 1.0);
    }
    case Coefficient::phi: {
      double best = 0.0;
      for (int i = 0; i < R; ++i) {
        double tv = 0.0;
        for (int j = 0; j < C; ++j) tv += std::abs(J(i, j) / p(i) - q(j));
        best = std::max(best, 0.5 * tv);
      }
      return best;
    }
    case Coefficient::psi: {
      double best = 0.0;
      for (int i = 0; i < R; ++i)
        for (int j = 0; j < C; ++j) best = std::max(best, std::abs(J(i, j) / (p(i) * q(j)) - 1.0));
      return best;
    }
    case Coefficient::alpha: {
      if (R > 24) throw BudgetError("alpha enumeration over past events exceeds the budget");
      if (R < 2) return 0.0;
      Eigen::MatrixXd D(R, C);
      for (int i = 0; i < R; ++i)
        for (int j = 0; j < C; ++j) D(i, j) = J(i, j) - p(i) * q(j);
      // Sign vectors with the first entry fixed, walked in Gray-code order.
      std::vector<int> sign(R, 1);
      Eigen::VectorXd v = D.colwise().sum().transpose();
      double best = 0.25 * v.cwiseAbs().sum();
      const std::uint64_t total = 1ULL << (R - 1);
      for (std::uint64_t g = 1; g < total; ++g) {
        int bit = std::countr_zero(g) + 1;
        sign[bit] = -sign[bit];
        v += 2.0 * sign[bit] * D.row(bit).transpose();
        best = std::max(best, 0.25 * v.cwiseAbs().sum());
      }
      return best;
    }
  }
  return 0.0;
}

double coefficient(const ProcessModel& model, std::int64_t n, Coefficient kind, int width,
                   std::size_t budget) {
  return coefficient_from_joint(window_joint(model, n, width, budget), kind);
}

namespace {

BetaValue beta_monte_carlo(const ProcessModel& model, std::int64_t n, double p, std::uint64_t seed) {
  const std::int64_t samples = 20000;
  const std::int64_t stride = std::max<std::int64_t>(model.lookahead(), 1) + 2 * n + 1;
  Trajectory t = sample_path(model, samples * stride + 2 * n + 2, seed);
  std::vector<double> r(samples);
  double sup = 0.0;
  for (std::int64_t i = 0; i < samples; ++i) {
    std::int64_t m = n + i * stride;
    auto cond = conditional_expectation(model, t, m, n);
    double norm = 0.0;
    auto x = t.value(m);
    for (std::size_t d = 0; d < cond.size(); ++d) norm += (x[d] - cond[d]) * (x[d] - cond[d]);
    r[i] = std::sqrt(norm);
    sup = std::max(sup, r[i]);
  }
  BetaValue b;
  b.exact = false;
  if (std::isinf(p)) {
    b.value = sup;
    return b;
  }
  std::vector<double> powers(samples);
  for (std::int64_t i = 0; i < samples; ++i) powers[i] = std::pow(r[i], p);
  double mp = mean(powers);
  b.value = std::pow(mp, 1.0 / p);
  if (mp > 0.0) b.standard_error = b.value / (p * mp) * standard_error(powers);
  return b;
}

}  // namespace

BetaValue beta_coefficient(const ProcessModel& model, std::int64_t n, double p, std::uint64_t seed) {
  if (n < 0) throw ConfigError("beta needs n >= 0");
  if (!(p >= 1.0)) throw ConfigError("beta needs p >= 1");
  BetaValue out;
  if (model.fully_observed()) return out;
  if (!model.markov()) return beta_monte_carlo(model, n, p, seed);

  const int S = model.alphabet_size();
  const int dim = model.dimension();
  const auto& w = model.weights();
  const std::int64_t L = static_cast<std::int64_t>(w.size());
  if (n >= L - 1) return out;

  // Conditional means (P^g f)(s) of the observable.
  auto mean_value = [&](std::int64_t g, int s, int d) {
    const double* row = model.power_row(g, s);
    double acc = 0.0;
    for (int t = 0; t < S; ++t) acc += row[t] * model.symbol_value(t)[d];
    return acc;
  };

  const std::size_t budget = 1u << 20;
  bool over_budget = false;
  double sup = 0.0, moment = 0.0;
  const auto& pi = model.stationary_law();
  for (int s0 = 0; s0 < S && !over_budget; ++s0) {
    if (pi[s0] == 0.0) continue;
    std::map<std::pair<int, std::vector<double>>, double> layer;
    layer[{s0, std::vector<double>(dim, 0.0)}] = 1.0;
    for (std::int64_t j = n + 1; j < L; ++j) {
      std::map<std::pair<int, std::vector<double>>, double> next;
      std::vector<double> shift(dim);
      for (int d = 0; d < dim; ++d) shift[d] = mean_value(j - n, s0, d);
      for (const auto& [key, prob] : layer) {
        for (int t = 0; t < S; ++t) {
          double tp = model.power_entry(1, key.first, t);
          if (tp == 0.0) continue;
          std::vector<double> v = key.second;
          auto f = model.symbol_value(t);
          for (int d = 0; d < dim; ++d) v[d] += w[j] * (f[d] - shift[d]);
          next[{t, std::move(v)}] += prob * tp;
        }
      }
      layer = std::move(next);
      if (layer.size() > budget) {
        over_budget = true;
        break;
      }
    }
    if (over_budget) break;
    for (const auto& [key, prob] : layer) {
      double norm = 0.0;
      for (double v : key.second) norm += v * v;
      norm = std::sqrt(norm);
      if (prob > 0.0) sup = std::max(sup, norm);
      if (!std::isinf(p)) moment += pi[s0] * prob * std::pow(norm, p);
    }
  }
  if (!over_budget) {
    out.value = std::isinf(p) ? sup : std::pow(moment, 1.0 / p);
    return out;
  }
  bool iid_symbols = model.converged_gap() <= 1;
  if (iid_symbols && std::isinf(p) && dim == 1) {
    double spread = 0.0;
    double mu = mean_value(1, 0, 0);
    for (int t = 0; t < S; ++t)
      if (pi[t] > 0.0) spread = std::max(spread, std::abs(model.symbol_value(t)[0] - mu));
    double acc = 0.0;
    for (std::int64_t j = n + 1; j < L; ++j) acc += std::abs(w[j]) * spread;
    out.value = acc;
    return out;
  }
  return beta_monte_carlo(model, n, p, seed);
}

InterpolationBound interpolation_bounds(double alpha, double rho, double phi, double /*psi*/,
                                        double q, double p) {
  if (!(p >= 1.0) || q < p) throw ConfigError("interpolation needs q >= p >= 1");
  InterpolationBound b;
  const double a = 1.0 / p;
  const double c = std::isinf(q) ? 0.0 : 1.0 / q;
  if (std::isinf(q)) {
    b.via_alpha = 2.0 * std::pow(2.0 * alpha, a);
  } else {
    b.via_alpha = 2.0 * (std::pow(2.0, a) + 1.0) * std::pow(alpha, a - c);
  }
  if (p <= 2.0 && q >= 2.0) b.via_rho = std::pow(2.0, 1.0 + a - c) * std::pow(rho, 1.0 - a + c);
  b.via_phi = std::pow(2.0, 1.0 + a) * std::pow(phi, 1.0 - a);
  b.value = std::min({b.via_alpha, b.via_rho, b.via_phi, 2.0});
  return b;
}

double MixingReport::rate_bound(double q, double p, std::int64_t n) const {
  const std::size_t i = static_cast<std::size_t>(n - 1);
  if (std::isinf(q) && p == 1.0) return 4.0 * alpha[i];
  if (q == 2.0 && p == 2.0) return rho[i];
  if (std::isinf(q) && std::isinf(p)) return 2.0 * phi[i];
  if (q == 1.0 && std::isinf(p)) return psi[i];
  if (q >= p) return std::min(interpolation_bounds(alpha[i], rho[i], phi[i], psi[i], q, p).value, psi[i]);
  return std::min(psi[i], 2.0);
}

MixingReport mixing_report(const ProcessModel& model, std::int64_t n_max, int width,
                           std::size_t budget) {
  MixingReport r;
  r.window = width;
  r.n_max = n_max;
  if (model.markov())
    r.note = "markov model: the past/future filtrations collapse to the boundary states, so "
             "window width 1 is exact and wider windows add nothing";
  else
    r.note = "non-Markov symbolic quotient: values computed on width-" + std::to_string(width) +
             " windows";
  for (std::int64_t n = 1; n <= n_max; ++n) {
    WindowJoint wj = window_joint(model, n, width, budget);
    double vals[4];
    const Coefficient kinds[4] = {Coefficient::alpha, Coefficient::rho, Coefficient::phi,
                                  Coefficient::psi};
    for (int k = 0; k < 4; ++k) {
      vals[k] = coefficient_from_joint(wj, kinds[k]);
      r.rows.push_back({n, std::string(to_string(kinds[k])), vals[k], width});
    }
    r.alpha.push_back(vals[0]);
    r.rho.push_back(vals[1]);
    r.phi.push_back(vals[2]);
    r.psi.push_back(vals[3]);
  }
  return r;
}

void write_csv(const MixingReport& report, std::ostream& out) {
  out << "n,kind,value,window\n";
  char buf[64];
  for (const auto& row : report.rows) {
    std::snprintf(buf, sizeof buf, "%.17g", row.value);
    out << row.n << ',' << row.kind << ',' << buf << ',' << row.window << '\n';
  }
}

OrderingCheck check_orderings(const MixingReport& report, double tol) {
  OrderingCheck out;
  auto require = [&](double lhs, double rhs, const char* what, std::size_t i) {
    double excess = lhs - rhs;
    if (std::isnan(excess) || excess > tol) {
      out.violations.push_back(std::string(what) + " at n=" + std::to_string(i + 1));
      out.verdict = Verdict::fail;
    }
    if (!std::isnan(excess)) out.worst_excess = std::max(out.worst_excess, excess);
  };
  const std::vector<double>* series[4] = {&report.alpha, &report.rho, &report.phi, &report.psi};
  const char* names[4] = {"alpha", "rho", "phi", "psi"};
  for (int k = 0; k < 4; ++k)
    for (std::size_t i = 0; i < series[k]->size(); ++i) {
      require(0.0, (*series[k])[i], names[k], i);
      if (i > 0) require((*series[k])[i], (*series[k])[i - 1], names[k], i);
    }
  for (std::size_t i = 0; i < report.alpha.size(); ++i) {
    const double a = report.alpha[i], r = report.rho[i], f = report.phi[i], s = report.psi[i];
    if (!std::isinf(s)) {
      require(4.0 * a, s, "4 alpha <= psi", i);
      require(2.0 * f, s, "2 phi <= psi", i);
    }
    require(4.0 * a, interpolation_bounds(a, r, f, s, kInf, 1.0).value, "alpha interpolation", i);
    require(r, interpolation_bounds(a, r, f, s, 2.0, 2.0).value, "rho interpolation", i);
    require(2.0 * f, interpolation_bounds(a, r, f, s, kInf, kInf).value, "phi interpolation", i);
  }
  return out;
}

BetaReport beta_report(const ProcessModel& model, double p, std::int64_t n_max, std::uint64_t seed) {
  BetaReport b;
  b.p = p;
  for (std::int64_t n = 1; n <= n_max; ++n) {
    BetaValue v = beta_coefficient(model, n, p, seed + static_cast<std::uint64_t>(n));
    b.values.push_back(v.value);
    b.exact = b.exact && v.exact;
  }
  return b;
}

namespace {

struct SeriesCheck {
  Verdict verdict = Verdict::pass;
  double partial = 0.0;
  double tail = 0.0;
  GeometricFit fit;
  std::string reason;
};

// sum_{n>=1} term(n, value_n) with a geometric envelope c r^n for the unseen tail.
template <class Term>
SeriesCheck check_series(const std::vector<double>& values, Term term) {
  SeriesCheck out;
  const std::size_t N = values.size();
  for (std::size_t i = 0; i < N; ++i) out.partial += term(static_cast<double>(i + 1), values[i]);
  bool all_zero = std::all_of(values.begin(), values.end(), [](double v) { return v <= 1e-300; });
  if (all_zero) {
    out.reason = "coefficients vanish";
    return out;
  }
  std::vector<double> ns, vs;
  for (std::size_t i = N / 2; i < N; ++i) {
    ns.push_back(static_cast<double>(i + 1));
    vs.push_back(values[i]);
  }
  bool tail_zero = std::all_of(vs.begin(), vs.end(), [](double v) { return v <= 1e-300; });
  if (tail_zero) {
    out.reason = "coefficients vanish beyond the computed range";
    return out;
  }
  out.fit = fit_geometric(ns, vs);
  if (!out.fit.ok) {
    out.verdict = Verdict::inconclusive;
    out.reason = "non-geometric decay: tail bound refused";
    return out;
  }
  double tail = 0.0;
  for (std::size_t n = N + 1; n < N + 100000; ++n) {
    double env = out.fit.c * std::pow(out.fit.rate, static_cast<double>(n));
    double t = term(static_cast<double>(n), env);
    tail += t;
    if (t < 1e-18 * std::max(1.0, tail) && n > N + 10) break;
  }
  out.tail = tail;
  if (!std::isfinite(out.partial + out.tail)) {
    out.verdict = Verdict::fail;
    out.reason = "series diverges";
  }
  return out;
}

nlohmann::json series_json(const SeriesCheck& s) {
  return {{"verdict", to_string(s.verdict)},
          {"partial_sum", s.partial},
          {"tail_bound", s.tail},
          {"fit_c", s.fit.c},
          {"fit_rate", s.fit.rate},
          {"fit_r_squared", s.fit.r_squared},
          {"fit_residuals", s.fit.residuals},
          {"reason", s.reason}};
}

}  // namespace

Certificate verify_assumption(const MixingReport& mixing, const BetaReport& beta,
                              const AssumptionParams& params, const MomentTable& moments) {
  Certificate cert;
  auto& j = cert.record;
  j["params"] = {{"p", params.p},         {"q", params.q},         {"delta", params.delta},
                 {"m", params.m},         {"iota", params.iota},   {"kappa", params.kappa},
                 {"d", params.d}};
  j["window"] = mixing.window;
  j["filtration_note"] = mixing.note;

  Verdict all = Verdict::pass;
  // delta < kappa - d/p
  double gate = params.kappa - params.d / params.p;
  bool delta_ok = params.delta > 0.0 && params.delta < gate;
  j["delta_constraint"] = {{"verdict", to_string(verdict_of(delta_ok))},
                           {"delta", params.delta},
                           {"kappa_minus_d_over_p", gate},
                           {"reason", delta_ok ? "" : "delta constraint"}};
  all = combine(all, verdict_of(delta_ok));

  double lhs = 1.0 / (2.0 + params.delta);
  double rhs = 1.0 / params.p + (params.iota + 2.0) / params.m + params.delta / params.q;
  bool arith_ok = lhs >= rhs;
  j["moment_arithmetic"] = {{"verdict", to_string(verdict_of(arith_ok))}, {"lhs", lhs}, {"rhs", rhs}};
  all = combine(all, verdict_of(arith_ok));

  std::vector<double> varpi;
  for (std::int64_t n = 1; n <= mixing.n_max; ++n) varpi.push_back(mixing.rate_bound(params.q, params.p, n));
  auto dep = check_series(varpi, [&](double n, double v) { return std::pow(n, params.delta) * v; });
  j["dependence_series"] = series_json(dep);
  j["dependence_series"]["values"] = varpi;
  all = combine(all, dep.verdict);

  auto appr = check_series(beta.values,
                           [&](double n, double v) { return std::pow(n * v, params.delta); });
  j["approximation_series"] = series_json(appr);
  j["approximation_series"]["beta_p"] = beta.p;
  j["approximation_series"]["exact"] = beta.exact;
  all = combine(all, appr.verdict);

  auto moment_check = [&](double theta) {
    double g = 0.0;
    bool found = false;
    for (std::size_t i = 0; i < moments.theta.size(); ++i)
      if (std::abs(moments.theta[i] - theta) < 1e-12) {
        g = moments.gamma[i];
        found = true;
      }
    nlohmann::json r = {{"theta", theta}, {"gamma", g}};
    Verdict v = !found ? Verdict::inconclusive : verdict_of(std::isfinite(g));
    r["verdict"] = to_string(v);
    if (!found) r["reason"] = "moment not tabulated";
    return std::pair{v, r};
  };
  auto [v1, r1] = moment_check(params.m);
  auto [v2, r2] = moment_check(2.0 * params.q * (params.iota + 2.0));
  j["moment_m"] = r1;
  j["moment_high"] = r2;
  all = combine(all, combine(v1, v2));
  j["verdict"] = to_string(all);
  cert.verdict = all;
  return cert;
}

ProbeTable conditional_bound_probe(const ProcessModel& model, std::int64_t n_max,
                                   const std::vector<ProbeFunction>& family) {
  if (!model.fully_observed()) throw UnsupportedError("probe needs a fully observed finite model");
  ProbeTable t;
  const int S = model.alphabet_size();
  const auto& pi = model.stationary_law();
  std::vector<double> x(S);
  for (int s = 0; s < S; ++s) x[s] = model.symbol_value(s)[0];
  for (std::int64_t n = 0; n <= n_max; ++n) {
    Eigen::MatrixXd J = symbol_pair_law(model, n);
    double worst = 0.0;
    for (const auto& f : family) {
      double norm2 = 0.0;
      for (int s = 0; s < S; ++s) {
        if (pi[s] == 0.0) continue;
        double cond = 0.0, uncond = 0.0;
        for (int u = 0; u < S; ++u) {
          cond += J(s, u) / pi[s] * f(x[s], x[u]);
          uncond += pi[u] * f(x[s], x[u]);
        }
        norm2 += pi[s] * (cond - uncond) * (cond - uncond);
      }
      worst = std::max(worst, std::sqrt(norm2));
    }
    t.n.push_back(n);
    t.value.push_back(worst);
  }
  for (std::size_t i = 2; i < t.value.size(); ++i)
    if (t.value[i] > t.value[i - 1] + 1e-12) t.monotone = false;
  std::vector<double> ns, vs, rhos;
  for (std::size_t i = 1; i < t.value.size(); ++i) {
    ns.push_back(static_cast<double>(t.n[i]));
    vs.push_back(t.value[i]);
    rhos.push_back(coefficient(model, t.n[i], Coefficient::rho, 1));
  }
  GeometricFit fp = fit_geometric(ns, vs), fr = fit_geometric(ns, rhos);
  t.fitted_rate = fp.ok ? fp.rate : 0.0;
  t.rho_rate = fr.ok ? fr.rate : 0.0;
  bool decays = t.value.back() <= 1e-6 || (fp.ok && fp.rate < 1.0);
  bool rate_ok = !fp.ok || !fr.ok || fp.rate <= fr.rate + 1e-6;
  t.verdict = verdict_of(t.monotone && decays && rate_ok);
  return t;
}

}  // namespace ncsum
