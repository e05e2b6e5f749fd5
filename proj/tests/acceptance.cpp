// Acceptance run: one line per criterion, exit status 1 when any criterion fails.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ncsum/config.hpp"
#include "ncsum/harness.hpp"
#include "ncsum/mixing.hpp"
#include "ncsum/nonconv.hpp"
#include "ncsum/process.hpp"
#include "ncsum/stats.hpp"
#include "ncsum/variance.hpp"

#ifndef NCSUM_CONFIG_DIR
#define NCSUM_CONFIG_DIR "configs"
#endif

using namespace ncsum;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const char* title, const Outcome& o, double seconds, double budget) {
  const bool in_time = seconds <= budget;
  const bool ok = o.pass && in_time;
  if (!ok) ++failures;
  std::printf("criterion %d %-28s %s  %s  [%.1fs of %.0fs]\n", id, title, ok ? "PASS" : "FAIL",
              o.detail.c_str(), seconds, budget);
  std::fflush(stdout);
}

template <class Fn>
void criterion(int id, const char* title, double budget, Fn&& fn) {
  auto t0 = Clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  report(id, title, o, std::chrono::duration<double>(Clock::now() - t0).count(), budget);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

ExperimentConfig config(const std::string& name) {
  return load_config(std::string(NCSUM_CONFIG_DIR) + "/" + name + ".json");
}

std::vector<std::int64_t> clt_grid(const ExperimentConfig& c) {
  return geometric_grid(100, c.horizon, 12);
}

// ---- 1: decomposition ----

Outcome decomposition_exactness() {
  std::mt19937_64 rng(20261016);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  double worst_sum = 0.0, worst_mean = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int A = 2 + static_cast<int>(rng() % 4);
    const int ell = 1 + static_cast<int>(rng() % 3);
    Marginal mu;
    double total = 0.0;
    for (int a = 0; a < A; ++a) {
      mu.points.push_back(2.0 * a - A + unit(rng) * 0.4);
      mu.weights.push_back(0.1 + std::abs(unit(rng)));
      total += mu.weights.back();
    }
    for (double& w : mu.weights) w /= total;
    mu.method = "atoms";
    std::size_t cells = 1;
    for (int u = 0; u < ell; ++u) cells *= A;
    ObservableSpec spec;
    std::vector<double> table(cells);
    if (trial % 2 == 0) {
      std::vector<Monomial> terms;
      const int count = 1 + static_cast<int>(rng() % 4);
      for (int t = 0; t < count; ++t) {
        Monomial m;
        m.coefficient = unit(rng);
        for (int u = 0; u < ell; ++u) m.powers.push_back(static_cast<int>(rng() % 3));
        terms.push_back(m);
      }
      spec = ObservableSpec::polynomial(ell, 1, terms);
    } else {
      for (double& v : table) v = unit(rng);
      spec.ell = ell;
      spec.dimension = 1;
      auto pts = mu.points;
      spec.F = [table, pts, A, ell](std::span<const double> x) {
        std::size_t idx = 0;
        for (int u = 0; u < ell; ++u) {
          std::size_t a = 0;
          while (pts[a] != x[u]) ++a;
          idx = idx * A + a;
        }
        return table[idx];
      };
    }
    Decomposition dec = center_and_decompose(spec, mu);
    // Oracle: mean by enumeration, then both identities on every tuple.
    std::vector<int> digit(ell);
    std::vector<double> x(ell);
    double Fbar = 0.0;
    for (std::size_t idx = 0; idx < cells; ++idx) {
      std::size_t r = idx;
      double w = 1.0;
      for (int u = ell - 1; u >= 0; --u) {
        digit[u] = static_cast<int>(r % A);
        r /= A;
        x[u] = mu.points[digit[u]];
        w *= mu.weights[digit[u]];
      }
      Fbar += w * spec.F(x);
    }
    for (std::size_t idx = 0; idx < cells; ++idx) {
      std::size_t r = idx;
      for (int u = ell - 1; u >= 0; --u) {
        digit[u] = static_cast<int>(r % A);
        r /= A;
        x[u] = mu.points[digit[u]];
      }
      double sum = 0.0;
      for (int i = 1; i <= ell; ++i) sum += dec.component(i, std::span<const double>(x.data(), i));
      worst_sum = std::max(worst_sum, std::abs(sum - (spec.F(x) - Fbar)));
      for (int i = 1; i <= ell; ++i) {
        std::vector<double> args(x.begin(), x.begin() + i);
        double m = 0.0;
        for (int a = 0; a < A; ++a) {
          args[i - 1] = mu.points[a];
          m += mu.weights[a] * dec.component(i, args);
        }
        worst_mean = std::max(worst_mean, std::abs(m));
      }
    }
  }
  return {worst_sum <= 1e-12 && worst_mean <= 1e-12,
          "max |sum F_i - (F - Fbar)| = " + num(worst_sum) + ", max |E_last F_i| = " + num(worst_mean)};
}

// ---- 2: mixing ----

Outcome mixing_oracle() {
  ExperimentConfig c = config("m2_linear");
  ProcessModel model(c.model);
  MixingReport rep = mixing_report(model, 8, 1);
  Eigen::Matrix2d P;
  P << 0.7, 0.3, 0.3, 0.7;
  const Eigen::Vector2d pi(0.5, 0.5);
  Eigen::Matrix2d Pn = Eigen::Matrix2d::Identity();
  double worst_closed = 0.0, worst_oracle = 0.0;
  for (int n = 1; n <= 8; ++n) {
    Pn = Pn * P;
    // Maximal correlation: second singular value of D^{-1/2} J D^{-1/2}.
    Eigen::Matrix2d J = pi.asDiagonal() * Pn;
    Eigen::Matrix2d Q = pi.cwiseSqrt().cwiseInverse().asDiagonal() * J *
                        pi.cwiseSqrt().cwiseInverse().asDiagonal();
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(Q);
    const double oracle = svd.singularValues()(1);
    worst_oracle = std::max(worst_oracle, std::abs(rep.rho[n - 1] - oracle));
    worst_closed = std::max(worst_closed, std::abs(rep.rho[n - 1] - std::pow(0.4, n)));
  }
  OrderingCheck ord = check_orderings(rep, 1e-10);
  return {worst_closed <= 1e-10 && worst_oracle <= 1e-10 && ord.verdict == Verdict::pass,
          "max |rho - 0.4^n| = " + num(worst_closed) + ", vs svd oracle " + num(worst_oracle) +
              ", ordering violations " + std::to_string(ord.violations.size())};
}

// ---- 3, 7: variance and CLT share their replicates ----

double long_run_variance_oracle() {
  Eigen::Matrix2d P;
  P << 0.7, 0.3, 0.3, 0.7;
  Eigen::Vector2d pi(0.5, 0.5), f(1.0, -1.0);
  Eigen::Matrix2d Pi = Eigen::Vector2d::Ones() * pi.transpose();
  Eigen::Matrix2d Z = (Eigen::Matrix2d::Identity() - P + Pi).inverse();
  const double m = pi.dot(f);
  Eigen::Vector2d g = f - m * Eigen::Vector2d::Ones();
  return g.transpose() * pi.asDiagonal() * (2.0 * Z - Eigen::Matrix2d::Identity() - Pi) * g;
}

}  // namespace

int main() {
  std::printf("acceptance run\n");
  std::fflush(stdout);
  Experiment m2(config("m2_linear"));
  Experiment rad(config("rademacher_product"));
  Experiment canon(config("canonical"));

  criterion(1, "decomposition exactness", 10, decomposition_exactness);
  criterion(2, "mixing oracle", 30, mixing_oracle);

  SumSamples m2_sums, rad_sums;
  criterion(3, "variance oracles", 300, [&]() -> Outcome {
    const VarianceResult& v1 = m2.variance(1);
    const double oracle = long_run_variance_oracle();
    const VarianceResult& v2 = rad.variance(2);
    m2_sums = simulate_sums(m2, clt_grid(m2.config()), m2.config().replicates, 1);
    rad_sums = simulate_sums(rad, clt_grid(rad.config()), rad.config().replicates, 1);
    Section s1 = run_variance(m2, m2_sums);
    Section s2 = run_variance(rad, rad_sums);
    const double e1 = s1.stats["components"][0]["relative_error"].get<double>();
    const double e2 = s2.stats["components"][0]["relative_error"].get<double>();
    bool ok = v1.tail_bound < 1e-8 && std::abs(v1.sigma_sq - oracle) <= 1e-10 &&
              std::abs(v1.sigma_sq - 7.0 / 3.0) <= 1e-10 && v2.sigma_sq == 1.0 &&
              s1.verdict == Verdict::pass && s2.verdict == Verdict::pass;
    return {ok, "sigma^2 = " + num(v1.sigma_sq) + " (|diff oracle| " + num(std::abs(v1.sigma_sq - oracle)) +
                    ", tail " + num(v1.tail_bound) + "), sigma_2^2 = " + num(v2.sigma_sq) +
                    ", empirical rel err " + num(e1) + " / " + num(e2)};
  });

  auto component_line = [](const Section& s, const char* key) {
    std::string out;
    for (const auto& c : s.stats["components"]) {
      out += " i=" + std::to_string(c["component"].get<int>()) + ":" + key + "=";
      out += num(c.value(key, std::nan("")));
    }
    return out;
  };

  criterion(4, "martingale property", 600, [&]() -> Outcome {
    Outcome o;
    for (Experiment* e : {&canon, &rad}) {
      Section s = run_blocks(*e);
      o.pass = o.pass && s.verdict == Verdict::pass;
      o.detail += e->config().name + " " + std::string(to_string(s.verdict)) +
                  component_line(s, "worst_bin_ratio") + component_line(s, "telescoping_residual") + "; ";
    }
    return o;
  });

  criterion(5, "embedding fidelity", 600, [&]() -> Outcome {
    Section s = run_embedding(canon);
    std::string d = std::string(to_string(s.verdict));
    for (const auto& c : s.stats["components"]) {
      d += " i=" + std::to_string(c["component"].get<int>()) + ": ks p";
      for (const auto& k : c["ks"]) d += " " + num(k["p_value"].get<double>());
      d += ", time rel err " + num(c["relative_time_error"].get<double>());
    }
    return {s.verdict == Verdict::pass, d};
  });

  criterion(6, "rate exponents", 1800, [&]() -> Outcome {
    Section s = run_rates(canon);
    std::string d = std::string(to_string(s.verdict));
    for (const auto& c : s.stats["components"]) {
      d += " i=" + std::to_string(c["component"].get<int>()) + ": error ci_high " +
           num(c["error_exponent"]["ci_high"].get<double>()) + ", strong ci_high " +
           num(c["strong_exponent"]["ci_high"].get<double>()) + ", |tau/t - sigma^2| " +
           num(c["time_deviation"].get<double>());
    }
    return {s.verdict == Verdict::pass, d};
  });

  criterion(7, "clt", 300, [&]() -> Outcome {
    SumSamples canon_sums = simulate_sums(canon, clt_grid(canon.config()), canon.config().replicates, 1);
    Outcome o;
    std::pair<Experiment*, SumSamples*> sets[] = {{&m2, &m2_sums}, {&rad, &rad_sums}, {&canon, &canon_sums}};
    for (auto& [e, sm] : sets) {
      if (sm->xi.empty()) *sm = simulate_sums(*e, clt_grid(e->config()), e->config().replicates, 1);
      Section s = run_clt(*e, *sm);
      o.pass = o.pass && s.verdict == Verdict::pass;
      o.detail += e->config().name + component_line(s, "p_value") + "; ";
    }
    return o;
  });

  criterion(8, "lil weak envelope", 1200, [&]() -> Outcome {
    Outcome o;
    for (Experiment* e : {&m2, &rad, &canon}) {
      Section s = run_lil(*e);
      o.pass = o.pass && s.verdict == Verdict::pass;
      o.detail += e->config().name;
      for (const auto& c : s.stats["components"])
        o.detail += " i=" + std::to_string(c["component"].get<int>()) + ":" +
                    std::to_string(c["inside"].get<std::int64_t>()) + "/" +
                    std::to_string(e->config().lil_replicates);
      o.detail += "; ";
    }
    return o;
  });

  criterion(9, "determinism", 600, [&]() -> Outcome {
    namespace fs = std::filesystem;
    ExperimentConfig c = config("canonical");
    c.replicates = 500;
    c.mds_blocks = 200;
    c.mds_replicates = 200;
    c.embed_ks_replicates = 50;
    c.embed_ks_steps = {20, 100};
    c.rate_horizon = 10000;
    c.rate_replicates = 10;
    c.lil_horizon = 100000;
    c.lil_replicates = 5;
    Experiment e1(c), e2(c);
    const fs::path base = fs::temp_directory_path() / "ncsum_determinism";
    fs::remove_all(base);
    Report r1 = run_full_pipeline(e1, (base / "a").string());
    Report r2 = run_full_pipeline(e2, (base / "b").string());
    auto slurp = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      return std::string(std::istreambuf_iterator<char>(in), {});
    };
    std::size_t same = 0;
    for (const auto& f : r1.files) same += slurp(base / "a" / f) == slurp(base / "b" / f) && !slurp(base / "a" / f).empty();
    fs::remove_all(base);
    return {same == r1.files.size() && r1.files == r2.files,
            std::to_string(same) + "/" + std::to_string(r1.files.size()) + " files byte-identical"};
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
