#include "ncsum/nonconv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace ncsum {

IndexFunction IndexFunction::linear(std::int64_t multiplier) {
  IndexFunction f;
  f.type_ = Type::linear;
  f.multiplier_ = multiplier;
  return f;
}

IndexFunction IndexFunction::polynomial(std::vector<std::int64_t> coefficients) {
  IndexFunction f;
  f.type_ = Type::polynomial;
  f.coeffs_ = std::move(coefficients);
  return f;
}

IndexFunction IndexFunction::tabulated(std::vector<std::int64_t> values) {
  IndexFunction f;
  f.type_ = Type::table;
  f.coeffs_ = std::move(values);
  return f;
}

std::int64_t IndexFunction::operator()(std::int64_t n) const {
  switch (type_) {
    case Type::linear: return multiplier_ * n;
    case Type::polynomial: {
      __int128 acc = 0;
      for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * n + *it;
      if (acc > INT64_MAX || acc < INT64_MIN) throw Error("index function overflows 64 bits");
      return static_cast<std::int64_t>(acc);
    }
    case Type::table:
      if (n < 0 || n >= static_cast<std::int64_t>(coeffs_.size()))
        throw Error("tabulated index function undefined at n = " + std::to_string(n));
      return coeffs_[n];
  }
  return 0;
}

std::string IndexFunction::describe() const {
  std::ostringstream os;
  switch (type_) {
    case Type::linear: os << multiplier_ << "n"; break;
    case Type::polynomial: {
      bool first = true;
      for (std::size_t d = coeffs_.size(); d-- > 0;) {
        if (coeffs_[d] == 0) continue;
        if (!first) os << " + ";
        os << coeffs_[d];
        if (d >= 1) os << "n";
        if (d >= 2) os << "^" << d;
        first = false;
      }
      if (first) os << "0";
      break;
    }
    case Type::table: os << "table[" << coeffs_.size() << "]"; break;
  }
  return os.str();
}

nlohmann::json IndexFunction::to_json() const {
  switch (type_) {
    case Type::linear: return {{"type", "linear"}, {"multiplier", multiplier_}};
    case Type::polynomial: return {{"type", "polynomial"}, {"coefficients", coeffs_}};
    case Type::table: return {{"type", "table"}, {"values", coeffs_}};
  }
  return {};
}

QCertificate validate_q_family(const QFamily& qf, std::int64_t horizon) {
  if (horizon < 10) throw ConfigError("q-family horizon must be >= 10");
  QCertificate cert;
  auto& rec = cert.record;
  rec["horizon"] = horizon;
  rec["k"] = qf.k;
  rec["ell"] = qf.ell();
  rec["growth_delta"] = qf.growth_delta;
  nlohmann::json funcs = nlohmann::json::array();
  for (const auto& f : qf.q) funcs.push_back(f.describe());
  rec["q"] = funcs;
  nlohmann::json checks = nlohmann::json::array();
  auto add = [&](const std::string& name, bool ok, std::int64_t first_bad, const std::string& note) {
    nlohmann::json c = {{"condition", name}, {"verdict", to_string(verdict_of(ok))}};
    if (!ok) c["first_violation_n"] = first_bad;
    if (!note.empty()) c["note"] = note;
    checks.push_back(c);
    cert.verdict = combine(cert.verdict, verdict_of(ok));
  };
  const int ell = qf.ell();
  if (ell < 1 || qf.k < 0 || qf.k > ell) {
    add("shape", false, 0, "need ell >= 1 and 0 <= k <= ell");
    rec["checks"] = checks;
    rec["verdict"] = to_string(cert.verdict);
    return cert;
  }

  {
    std::int64_t bad = -1;
    for (int j = 1; j <= qf.k && bad < 0; ++j)
      for (std::int64_t n = 1; n <= horizon; ++n)
        if (qf.q[j - 1](n) != j * n) {
          bad = n;
          break;
        }
    add("linear_prefix", bad < 0, bad, "q_j(n) = j n for j <= k");
  }
  {
    std::int64_t bad = -1;
    for (std::int64_t n = 1; n <= horizon && bad < 0; ++n) {
      if (qf.q[0](n) < 0) bad = n;
      for (int i = 1; i < ell && bad < 0; ++i)
        if (qf.q[i](n) < qf.q[i - 1](n) || (n >= 2 && qf.q[i](n) == qf.q[i - 1](n))) bad = n;
    }
    add("strictly_increasing_in_i", bad < 0, bad, "strict for n >= 2, ties allowed at n = 1");
  }
  for (int i = qf.k + 1; i <= ell; ++i) {
    std::int64_t bad = -1;
    for (std::int64_t n = 2; n <= horizon; ++n) {
      double gap = static_cast<double>(qf.q[i - 1](n + 1) - qf.q[i - 1](n));
      if (gap < std::pow(static_cast<double>(n), qf.growth_delta) - 1e-9) {
        bad = n;
        break;
      }
    }
    add("growth_gap_q" + std::to_string(i), bad < 0, bad,
        "q_i(n+1) - q_i(n) >= n^growth_delta for 2 <= n <= horizon");
  }
  const std::int64_t eps_den[] = {10, 2};  // eps = 0.1, 0.5
  for (int i = std::max(qf.k, 1); i < ell; ++i) {
    for (std::int64_t den : eps_den) {
      auto g = [&](std::int64_t n) {
        std::int64_t m = (n + den - 1) / den;
        return qf.q[i](m) - qf.q[i - 1](n);
      };
      // Divergence on the second half of the horizon: positive, and the minimum over its last
      // half exceeds the minimum over its first half.
      std::int64_t bad = -1;
      const std::int64_t lo = horizon / 2, mid = lo + (horizon - lo) / 2;
      std::int64_t min_first = INT64_MAX, min_last = INT64_MAX;
      for (std::int64_t n = lo; n <= horizon && bad < 0; ++n) {
        std::int64_t v = g(n);
        if (v <= 0) bad = n;
        if (n < mid) min_first = std::min(min_first, v);
        else min_last = std::min(min_last, v);
      }
      if (bad < 0 && min_last <= min_first) bad = horizon;
      std::ostringstream name;
      name << "separation_q" << i + 1 << "_vs_q" << i << "_eps_" << (den == 10 ? "0.1" : "0.5");
      add(name.str(), bad < 0, bad,
          "finite-horizon monotone divergence check, not a proof of the asymptotic condition");
    }
  }
  rec["checks"] = checks;
  rec["verdict"] = to_string(cert.verdict);
  return cert;
}

ObservableSpec ObservableSpec::polynomial(int ell, int dimension, std::vector<Monomial> terms) {
  const std::size_t coords = static_cast<std::size_t>(ell) * dimension;
  for (const auto& t : terms)
    if (t.powers.size() != coords)
      throw ConfigError("monomial needs one power per coordinate (" + std::to_string(coords) + ")");
  ObservableSpec s;
  s.ell = ell;
  s.dimension = dimension;
  std::ostringstream os;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    if (k) os << " + ";
    os << terms[k].coefficient;
    for (std::size_t c = 0; c < coords; ++c)
      if (terms[k].powers[c]) os << "*x" << c + 1 << (terms[k].powers[c] > 1 ? "^" + std::to_string(terms[k].powers[c]) : "");
  }
  s.description = terms.empty() ? "0" : os.str();
  s.F = [terms = std::move(terms)](std::span<const double> x) {
    double acc = 0.0;
    for (const auto& t : terms) {
      double v = t.coefficient;
      for (std::size_t c = 0; c < t.powers.size(); ++c)
        for (int p = 0; p < t.powers[c]; ++p) v *= x[c];
      acc += v;
    }
    return acc;
  };
  return s;
}

Decomposition::Decomposition(ObservableSpec spec, Marginal marginal)
    : spec_(std::move(spec)), marginal_(std::move(marginal)) {
  if (spec_.ell < 1) throw ConfigError("observable needs ell >= 1");
  if (marginal_.dimension != spec_.dimension)
    throw ConfigError("observable dimension does not match the process dimension");
  if (!spec_.F) throw ConfigError("observable has no function");
  const std::size_t A = marginal_.size();
  const int ell = spec_.ell;
  const int dim = spec_.dimension;
  method_ = marginal_.exact ? "exact_enumeration" : marginal_.method + "_tensor_quadrature";
  error_bound_ = marginal_.exact ? 0.0 : 1e-13;

  order_.resize(A);
  std::iota(order_.begin(), order_.end(), 0);
  std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
    return marginal_.point(a)[0] < marginal_.point(b)[0];
  });

  double cells = std::pow(static_cast<double>(A), ell);
  tables_ = cells <= 2.0e7;
  if (tables_) {
    mean_table_.resize(ell + 1);
    std::size_t n = static_cast<std::size_t>(cells);
    mean_table_[ell].resize(n);
    std::vector<double> args(static_cast<std::size_t>(ell) * dim);
    std::vector<std::size_t> digit(ell, 0);
    for (std::size_t idx = 0; idx < n; ++idx) {
      std::size_t r = idx;
      for (int u = ell - 1; u >= 0; --u) {
        digit[u] = r % A;
        r /= A;
      }
      for (int u = 0; u < ell; ++u) {
        auto p = marginal_.point(digit[u]);
        std::copy(p.begin(), p.end(), args.begin() + static_cast<std::ptrdiff_t>(u) * dim);
      }
      mean_table_[ell][idx] = spec_.F(args);
    }
    for (int i = ell - 1; i >= 0; --i) {
      const auto& up = mean_table_[i + 1];
      auto& cur = mean_table_[i];
      cur.assign(up.size() / A, 0.0);
      for (std::size_t idx = 0; idx < cur.size(); ++idx) {
        double acc = 0.0;
        for (std::size_t a = 0; a < A; ++a) acc += marginal_.weights[a] * up[idx * A + a];
        cur[idx] = acc;
      }
    }
    centering_ = mean_table_[0][0];
    sup_abs_.assign(ell, 0.0);
    double worst_mean = 0.0;
    for (int i = 1; i <= ell; ++i) {
      const auto& cur = mean_table_[i];
      const auto& prev = mean_table_[i - 1];
      for (std::size_t idx = 0; idx < cur.size(); ++idx)
        sup_abs_[i - 1] = std::max(sup_abs_[i - 1], std::abs(cur[idx] - prev[idx / A]));
      for (std::size_t pidx = 0; pidx < prev.size(); ++pidx) {
        double acc = 0.0;
        for (std::size_t a = 0; a < A; ++a)
          acc += marginal_.weights[a] * (cur[pidx * A + a] - prev[pidx]);
        worst_mean = std::max(worst_mean, std::abs(acc));
      }
    }
    double scale = 1.0;
    for (double v : mean_table_[ell]) scale = std::max(scale, std::abs(v));
    if (marginal_.exact && worst_mean > 1e-8 * scale)
      throw Error("decomposition integrator accuracy worse than 1e-8");
  } else {
    std::vector<double> none;
    centering_ = partial_mean(0, none);
    sup_abs_.assign(ell, 0.0);
    Rng rng(0x5a);
    std::uniform_int_distribution<std::size_t> pick(0, A - 1);
    std::vector<double> args(static_cast<std::size_t>(ell) * dim);
    for (int s = 0; s < 256; ++s) {
      for (int u = 0; u < ell; ++u) {
        auto p = marginal_.point(pick(rng));
        std::copy(p.begin(), p.end(), args.begin() + static_cast<std::ptrdiff_t>(u) * dim);
      }
      for (int i = 1; i <= ell; ++i)
        sup_abs_[i - 1] = std::max(sup_abs_[i - 1],
                                   std::abs(component(i, std::span<const double>(args.data(), static_cast<std::size_t>(i) * dim))));
    }
  }
}

double Decomposition::partial_mean(int i, std::span<const double> prefix) const {
  const int ell = spec_.ell;
  const int dim = spec_.dimension;
  const std::size_t A = marginal_.size();
  const int free = ell - i;
  std::vector<double> args(static_cast<std::size_t>(ell) * dim);
  std::copy(prefix.begin(), prefix.begin() + static_cast<std::ptrdiff_t>(i) * dim, args.begin());
  double cells = std::pow(static_cast<double>(A), free);
  if (cells <= 1.0e6) {
    std::size_t n = static_cast<std::size_t>(cells);
    double acc = 0.0;
    std::vector<std::size_t> digit(free);
    for (std::size_t idx = 0; idx < n; ++idx) {
      std::size_t r = idx;
      double w = 1.0;
      for (int u = free - 1; u >= 0; --u) {
        digit[u] = r % A;
        r /= A;
      }
      for (int u = 0; u < free; ++u) {
        w *= marginal_.weights[digit[u]];
        auto p = marginal_.point(digit[u]);
        std::copy(p.begin(), p.end(), args.begin() + static_cast<std::ptrdiff_t>(i + u) * dim);
      }
      acc += w * spec_.F(args);
    }
    return acc;
  }
  // Fixed-seed Monte Carlo over the free arguments.
  Rng rng(0x5eed);
  std::discrete_distribution<std::size_t> pick(marginal_.weights.begin(), marginal_.weights.end());
  const int samples = 1 << 14;
  double acc = 0.0;
  for (int s = 0; s < samples; ++s) {
    for (int u = 0; u < free; ++u) {
      auto p = marginal_.point(pick(rng));
      std::copy(p.begin(), p.end(), args.begin() + static_cast<std::ptrdiff_t>(i + u) * dim);
    }
    acc += spec_.F(args);
  }
  return acc / samples;
}

int Decomposition::atom_index(std::span<const double> value) const {
  if (!marginal_.exact) return -1;
  const int dim = spec_.dimension;
  auto it = std::lower_bound(order_.begin(), order_.end(), value[0], [&](std::size_t a, double v) {
    return marginal_.point(a)[0] < v;
  });
  for (; it != order_.end() && marginal_.point(*it)[0] == value[0]; ++it) {
    auto p = marginal_.point(*it);
    bool eq = true;
    for (int d = 1; d < dim; ++d) eq = eq && p[d] == value[d];
    if (eq) return static_cast<int>(*it);
  }
  return -1;
}

double Decomposition::component_atoms(int i, std::span<const int> atoms) const {
  const std::size_t A = marginal_.size();
  std::size_t idx = 0;
  for (int u = 0; u < i; ++u) idx = idx * A + static_cast<std::size_t>(atoms[u]);
  return mean_table_[i][idx] - mean_table_[i - 1][idx / A];
}

double Decomposition::component(int i, std::span<const double> args) const {
  if (i < 1 || i > spec_.ell) throw Error("component index out of range");
  const int dim = spec_.dimension;
  if (tables_) {
    int atoms[64];
    bool all = i <= 64;
    for (int u = 0; u < i && all; ++u) {
      atoms[u] = atom_index(args.subspan(static_cast<std::size_t>(u) * dim, dim));
      all = atoms[u] >= 0;
    }
    if (all) return component_atoms(i, std::span<const int>(atoms, i));
  }
  double upper = i == spec_.ell ? spec_.F(args) : partial_mean(i, args);
  double lower = i == 1 ? centering_ : partial_mean(i - 1, args);
  return upper - lower;
}

Decomposition center_and_decompose(const ObservableSpec& spec, const Marginal& marginal) {
  return Decomposition(spec, marginal);
}

RegularityReport regularity_probe(const ObservableSpec& spec, std::int64_t samples,
                                  std::uint64_t seed, double box) {
  RegularityReport r;
  const int ell = spec.ell, dim = spec.dimension;
  const std::size_t N = static_cast<std::size_t>(ell) * dim;
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<double> x(N), y(N);
  auto block_norm = [&](const std::vector<double>& v, int j) {
    double s = 0.0;
    for (int d = 0; d < dim; ++d) s += v[j * dim + d] * v[j * dim + d];
    return std::sqrt(s);
  };
  auto record = [&]() {
    double fx = spec.F(x), fy = spec.F(y);
    double weight = 1.0, dist = 0.0, grow = 1.0;
    for (int j = 0; j < ell; ++j) {
      double nx = block_norm(x, j), ny = block_norm(y, j);
      weight += std::pow(nx, spec.iota) + std::pow(ny, spec.iota);
      grow += std::pow(nx, spec.iota);
      double dj = 0.0;
      for (int d = 0; d < dim; ++d) dj += (x[j * dim + d] - y[j * dim + d]) * (x[j * dim + d] - y[j * dim + d]);
      dist += std::pow(std::sqrt(dj), spec.kappa);
    }
    if (dist > 0.0) r.max_holder_quotient = std::max(r.max_holder_quotient, std::abs(fx - fy) / (weight * dist));
    r.max_growth_quotient = std::max(r.max_growth_quotient, std::abs(fx) / grow);
    ++r.samples;
  };
  for (std::int64_t s = 0; s < samples; ++s) {
    for (auto& v : x) v = box * unit(rng);
    int mode = static_cast<int>(s % 3);
    if (mode == 0) {
      for (auto& v : y) v = box * unit(rng);
    } else {
      double scale = box * std::pow(10.0, -8.0 * (0.5 * unit(rng) + 0.5));
      y = x;
      if (mode == 1) {
        for (auto& v : y) v += scale * unit(rng);
      } else {
        // Straddle a coordinate hyperplane, where jumps hide.
        std::size_t c = static_cast<std::size_t>(s / 3) % N;
        x[c] = 0.5 * scale;
        y[c] = -0.5 * scale;
      }
    }
    record();
  }
  bool ok = r.max_holder_quotient <= spec.K * (1.0 + 1e-9) && r.max_growth_quotient <= spec.K * (1.0 + 1e-9);
  r.verdict = verdict_of(ok);
  return r;
}

std::vector<std::int64_t> required_positions(const QFamily& qf, std::int64_t horizon) {
  std::vector<std::int64_t> pos;
  pos.reserve(static_cast<std::size_t>(horizon + 1) * qf.ell());
  for (std::int64_t n = 1; n <= horizon; ++n)
    for (const auto& f : qf.q) pos.push_back(f(n));
  std::sort(pos.begin(), pos.end());
  pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
  return pos;
}

double summand(const Path& path, const QFamily& qf, const Decomposition& dec, int i, std::int64_t n) {
  const int dim = dec.dimension();
  std::vector<double> args(static_cast<std::size_t>(i) * dim);
  for (int u = 0; u < i; ++u) {
    auto v = path.value(qf.q[u](n));
    std::copy(v.begin(), v.end(), args.begin() + static_cast<std::ptrdiff_t>(u) * dim);
  }
  return dec.component(i, args);
}

NonconvSumSeries evaluate_sums(const Path& path, const QFamily& qf, const Decomposition& dec,
                               std::int64_t horizon) {
  const int ell = qf.ell();
  if (ell != dec.ell()) throw ConfigError("q-family and observable disagree on ell");
  if (horizon < 0) throw ConfigError("horizon must be >= 0");
  NonconvSumSeries s;
  s.horizon = horizon;
  s.ell = ell;
  s.summand.assign(ell, std::vector<double>(horizon + 1, 0.0));
  s.partial.assign(ell, std::vector<double>(horizon + 1, 0.0));
  s.total.assign(horizon + 1, 0.0);
  if (horizon >= 1) {
    std::int64_t need = qf.q[ell - 1](horizon);
    if (!path.has_value(need))
      throw Error("trajectory too short: need a value at q_ell(t) = " + std::to_string(need));
  }
  const int dim = dec.dimension();
  std::vector<double> args(static_cast<std::size_t>(ell) * dim);
  std::vector<int> atoms(ell);
  for (std::int64_t n = 1; n <= horizon; ++n) {
    bool all_atoms = true;
    for (int u = 0; u < ell; ++u) {
      auto v = path.value(qf.q[u](n));
      std::copy(v.begin(), v.end(), args.begin() + static_cast<std::ptrdiff_t>(u) * dim);
      atoms[u] = dec.atom_index(v);
      all_atoms = all_atoms && atoms[u] >= 0;
    }
    double tot = 0.0;
    for (int i = 1; i <= ell; ++i) {
      double y = all_atoms ? dec.component_atoms(i, atoms)
                           : dec.component(i, std::span<const double>(args.data(), static_cast<std::size_t>(i) * dim));
      s.summand[i - 1][n] = y;
      s.partial[i - 1][n] = s.partial[i - 1][n - 1] + y;
      tot += s.partial[i - 1][n];
    }
    s.total[n] = tot;
  }
  return s;
}

void write_csv(const NonconvSumSeries& s, std::ostream& out, std::int64_t stride) {
  out << "t,Xi";
  for (int i = 1; i <= s.ell; ++i) out << ",Xi_" << i;
  out << '\n';
  char buf[64];
  stride = std::max<std::int64_t>(1, stride);
  for (std::int64_t t = 0; t <= s.horizon; ++t) {
    if (t % stride != 0 && t != s.horizon) continue;
    std::snprintf(buf, sizeof buf, "%.17g", s.total[t]);
    out << t << ',' << buf;
    for (int i = 0; i < s.ell; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", s.partial[i][t]);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace ncsum
