#include "ncsum/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "ncsum/mixing.hpp"
#include "ncsum/skorokhod.hpp"
#include "ncsum/stats.hpp"

namespace ncsum {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> as_double(const std::vector<std::int64_t>& v) {
  return {v.begin(), v.end()};
}

json fit_json(const ExponentFit& f) {
  return {{"defined", f.defined}, {"exponent", f.exponent}, {"intercept", f.intercept},
          {"ci_low", f.ci_low}, {"ci_high", f.ci_high}};
}

// Streams keep the replicate sets of different checks independent.
enum Stream : std::uint64_t {
  kCltStream = 1,
  kLilStream = 2,
  kMdsStream = 3,
  kDirectStream = 4,
  kGenerativeStream = 5,
  kRateStream = 6,
  kEmbedStream = 7,
};

std::uint64_t component_stream(Stream s, int i) {
  return static_cast<std::uint64_t>(s) * 64 + static_cast<std::uint64_t>(i);
}

Path sample_for_engine(const Experiment& exp, const MartingaleEngine& engine, std::uint64_t seed) {
  return sample_sparse(exp.model(), engine.value_positions(), engine.symbol_positions(), seed);
}

MartingalePieces corrected_pieces(const Experiment& exp, const MartingaleEngine& engine,
                                  const Path& path) {
  MartingalePieces p = block_sums(path, engine.schedule(), exp.model(), exp.decomposition(),
                                  exp.q_family(), engine.component(), engine.blocks());
  martingale_correction(p, engine, path);
  return p;
}

// Span of the lattice the sample lives on, or 0 when it does not look lattice-valued.
double lattice_span(std::vector<double> x) {
  const std::size_t n = x.size();
  std::sort(x.begin(), x.end());
  x.erase(std::unique(x.begin(), x.end()), x.end());
  if (x.size() < 2 || x.size() == n) return 0.0;
  double d = kInf;
  for (std::size_t k = 1; k < x.size(); ++k) d = std::min(d, x[k] - x[k - 1]);
  const double tol = 1e-9 * std::max(1.0, std::abs(x.back() - x.front()));
  for (std::size_t k = 1; k < x.size(); ++k) {
    double q = (x[k] - x[k - 1]) / d;
    if (std::abs(q - std::round(q)) * d > tol) return 0.0;
  }
  return d;
}

Section unsupported(const std::string& name, const std::exception& e) {
  Section s;
  s.name = name;
  s.verdict = Verdict::inconclusive;
  s.note = e.what();
  return s;
}

}  // namespace

// ---- report ----

Verdict Report::verdict() const {
  Verdict v = Verdict::pass;
  for (const auto& s : sections) v = combine(v, s.verdict);
  return v;
}

const Section* Report::find(const std::string& n) const {
  for (const auto& s : sections)
    if (s.name == n) return &s;
  return nullptr;
}

json Report::to_json() const {
  json secs = json::array();
  for (const auto& s : sections)
    secs.push_back({{"name", s.name}, {"verdict", to_string(s.verdict)}, {"stats", s.stats}, {"note", s.note}});
  return {{"name", name}, {"verdict", to_string(verdict())}, {"sections", secs}, {"files", files}};
}

std::string Report::summary() const {
  std::ostringstream os;
  os << "report " << name << ": " << to_string(verdict()) << "\n";
  for (const auto& s : sections) {
    os << "  " << s.name << ": " << to_string(s.verdict);
    if (!s.note.empty()) os << "  (" << s.note << ")";
    os << "\n";
  }
  if (!files.empty()) {
    os << "files:\n";
    for (const auto& f : files) os << "  " << f << "\n";
  }
  return os.str();
}

// ---- experiment ----

Experiment::Experiment(ExperimentConfig config) : config_(std::move(config)) {
  build_schedule(config_.blocks, 16);
  model_ = std::make_unique<ProcessModel>(config_.model);
  if (model_->dimension() != config_.dimension)
    throw ConfigError("observable dimension differs from the model's");
  qcert_ = validate_q_family(config_.q_family, std::max<std::int64_t>(config_.horizon, 10));
  if (qcert_.verdict == Verdict::fail)
    throw ConfigError("index family rejected: " + qcert_.record.dump());
  dec_ = std::make_unique<Decomposition>(center_and_decompose(config_.observable(), model_->marginal()));
  for (int i = 1; i <= dec_->ell(); ++i)
    if (!dec_->vanishes(i)) components_.push_back(i);
}

const VarianceResult& Experiment::variance(int i) const {
  auto it = variance_.find(i);
  if (it == variance_.end())
    it = variance_.emplace(i, sigma_component(*model_, *dec_, config_.q_family, i)).first;
  return it->second;
}

int Experiment::threads() const {
  if (config_.threads > 0) return config_.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::int64_t n, int threads, const std::function<void(std::int64_t)>& body) {
  if (n <= 0) return;
  const int workers = static_cast<int>(std::min<std::int64_t>(std::max(threads, 1), n));
  if (workers == 1) {
    for (std::int64_t k = 0; k < n; ++k) body(k);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::int64_t k = next++; k < n; k = next++) {
        try {
          body(k);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t stream, std::int64_t r) {
  return mix_seed(mix_seed(seed, stream), static_cast<std::uint64_t>(r));
}

SumSamples simulate_sums(const Experiment& exp, const std::vector<std::int64_t>& t_grid,
                         std::int64_t replicates, std::uint64_t stream) {
  SumSamples out;
  out.components = exp.components();
  out.t_grid = t_grid;
  const std::int64_t N = *std::max_element(t_grid.begin(), t_grid.end());
  const auto positions = required_positions(exp.q_family(), N);
  out.xi.assign(out.components.size(),
                std::vector<std::vector<double>>(replicates, std::vector<double>(t_grid.size())));
  parallel_for(replicates, exp.threads(), [&](std::int64_t r) {
    Path path = sample_sparse(exp.model(), positions, {}, replicate_seed(exp.config().seed, stream, r));
    NonconvSumSeries s = evaluate_sums(path, exp.q_family(), exp.decomposition(), N);
    for (std::size_t c = 0; c < out.components.size(); ++c)
      for (std::size_t g = 0; g < t_grid.size(); ++g)
        out.xi[c][r][g] = s.partial[out.components[c] - 1][t_grid[g]];
  });
  return out;
}

BlockSchedule schedule_for_blocks(const BlockParams& params, std::int64_t blocks) {
  std::int64_t h = std::max<std::int64_t>(blocks, 16);
  while (build_schedule(params, h).nu(h) < blocks) h *= 2;
  BlockSchedule probe = build_schedule(params, h);
  return build_schedule(params, probe.a(blocks + 1) - 1);
}

// ---- sections ----

Section run_validate(const Experiment& exp) {
  Section s;
  s.name = "validate";
  s.stats["q_family"] = exp.q_certificate().record;
  s.verdict = exp.q_certificate().verdict;
  const auto& dec = exp.decomposition();
  s.stats["decomposition"] = {{"method", dec.method()}, {"centering", dec.centering()},
                              {"error_bound", dec.error_bound()}, {"components", exp.components()}};
  RegularityReport reg = regularity_probe(exp.config().observable(), 2000, exp.config().seed);
  s.stats["regularity"] = {{"verdict", to_string(reg.verdict)},
                           {"max_holder_quotient", reg.max_holder_quotient},
                           {"max_growth_quotient", reg.max_growth_quotient},
                           {"samples", reg.samples}};
  s.verdict = combine(s.verdict, reg.verdict);
  BlockSchedule sched = build_schedule(exp.config().blocks, exp.config().horizon);
  bool nu_ok = true;
  for (auto t : geometric_grid(10, exp.config().horizon, 20)) nu_ok = nu_ok && sched.nu_bounds_hold(t);
  s.stats["schedule"] = sched.to_json();
  s.stats["schedule"]["nu_bounds_hold"] = nu_ok;
  s.verdict = combine(s.verdict, verdict_of(nu_ok));
  return s;
}

Section run_mixing(const Experiment& exp, std::ostream* csv) {
  Section s;
  s.name = "mixing";
  try {
    MixingReport rep = mixing_report(exp.model(), exp.config().mixing_n, exp.config().mixing_window);
    OrderingCheck ord = check_orderings(rep, exp.config().tol.identity);
    s.verdict = ord.verdict;
    s.stats = {{"alpha", rep.alpha}, {"rho", rep.rho}, {"phi", rep.phi}, {"psi", rep.psi},
               {"window", rep.window}, {"violations", ord.violations},
               {"worst_excess", ord.worst_excess}};
    s.note = rep.note;
    if (csv) write_csv(rep, *csv);
  } catch (const UnsupportedError& e) {
    return unsupported(s.name, e);
  }
  return s;
}

Section run_variance(const Experiment& exp, const SumSamples& samples) {
  Section s;
  s.name = "variance";
  const auto& tol = exp.config().tol;
  json comps = json::array();
  for (std::size_t c = 0; c < samples.components.size(); ++c) {
    const int i = samples.components[c];
    const VarianceResult& vr = exp.variance(i);
    const double N = static_cast<double>(samples.t_grid.back());
    std::vector<double> scaled;
    for (const auto& row : samples.xi[c]) scaled.push_back(row.back() / std::sqrt(N));
    const double emp = variance(scaled);
    json entry = vr.to_json();
    entry["empirical"] = emp;
    entry["replicates"] = scaled.size();
    entry["N"] = samples.t_grid.back();
    Verdict v = vr.verdict;
    if (vr.sigma_sq > 0.0) {
      const double rel = std::abs(emp - vr.sigma_sq) / vr.sigma_sq;
      entry["relative_error"] = rel;
      v = combine(v, verdict_of(rel < tol.variance_rel));
    } else {
      double worst = 0.0;
      for (double x : scaled) worst = std::max(worst, std::abs(x));
      entry["max_scaled"] = worst;
      v = combine(v, verdict_of(worst <= std::pow(N, -0.25)));
    }
    if (samples.xi[c].size() >= 200 && samples.t_grid.size() >= 2) {
      EmpiricalSigma es = empirical_sigma(samples.xi[c], as_double(samples.t_grid), i, vr.sigma_sq);
      entry["extrapolated"] = es.extrapolated;
    }
    entry["verdict"] = to_string(v);
    s.verdict = combine(s.verdict, v);
    comps.push_back(entry);
  }
  s.stats["components"] = comps;
  return s;
}

Section run_clt(const Experiment& exp, const SumSamples& samples, std::ostream* csv) {
  Section s;
  s.name = "clt";
  const auto R = samples.xi.empty() ? 0 : samples.xi[0].size();
  if (!samples.xi.empty() && R < 500) throw ConfigError("clt needs at least 500 replicates");
  const double N = static_cast<double>(samples.t_grid.back());
  int nondegenerate = 0;
  for (int i : samples.components) nondegenerate += exp.variance(i).sigma_sq > 0.0;
  const double level = exp.config().tol.ks_alpha / std::max(nondegenerate, 1);
  json comps = json::array();
  if (csv) *csv << "replicate,component,scaled\n";
  for (std::size_t c = 0; c < samples.components.size(); ++c) {
    const int i = samples.components[c];
    const double var = exp.variance(i).sigma_sq;
    std::vector<double> scaled;
    for (const auto& row : samples.xi[c]) scaled.push_back(row.back() / std::sqrt(N));
    if (csv)
      for (std::size_t r = 0; r < scaled.size(); ++r) *csv << r << ',' << i << ',' << fmt(scaled[r]) << '\n';
    json entry = {{"component", i}, {"sigma_sq", var}, {"replicates", scaled.size()}};
    Verdict v;
    if (var > 0.0) {
      const double sd = std::sqrt(var);
      // Lattice-valued sums are spread uniformly over their cell before the continuous test.
      const double span = lattice_span(scaled);
      std::vector<double> tested = scaled;
      if (span > 0.0) {
        Rng rng(mix_seed(exp.config().seed, component_stream(kCltStream, i) + 1000));
        for (double& x : tested) x += span * (uniform_open(rng) - 0.5);
      }
      entry["lattice_span"] = span;
      KsResult ks = ks_one_sample(tested, [sd](double x) { return normal_cdf(x / sd); });
      entry["ks_statistic"] = ks.statistic;
      entry["p_value"] = ks.p_value;
      entry["level"] = level;
      v = verdict_of(ks.p_value > level);
    } else {
      double worst = 0.0;
      for (double x : scaled) worst = std::max(worst, std::abs(x));
      entry["degenerate"] = true;
      entry["max_scaled"] = worst;
      v = verdict_of(worst <= std::pow(N, -0.25));
    }
    entry["verdict"] = to_string(v);
    s.verdict = combine(s.verdict, v);
    comps.push_back(entry);
  }
  s.stats["components"] = comps;
  s.stats["bonferroni_level"] = level;
  return s;
}

Section run_lil(const Experiment& exp, std::ostream* csv) {
  Section s;
  s.name = "lil";
  const auto& cfg = exp.config();
  if (cfg.lil_horizon < 100000) throw ConfigError("lil horizon must be at least 1e5");
  const std::int64_t H = cfg.lil_horizon;
  const auto checkpoints = geometric_grid(1000, H, 200);
  std::vector<std::int64_t> grid = checkpoints;
  constexpr int kU = 64;
  for (int k = 1; k <= kU; ++k) grid.push_back(H * k / kU);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  SumSamples samples = simulate_sums(exp, grid, cfg.lil_replicates, kLilStream);
  auto index_of = [&](std::int64_t t) {
    return static_cast<std::size_t>(std::lower_bound(grid.begin(), grid.end(), t) - grid.begin());
  };
  json comps = json::array();
  if (csv) *csv << "replicate,component,running_max,energy_ratio\n";
  const auto need = static_cast<std::int64_t>(std::ceil(cfg.tol.lil_fraction * static_cast<double>(cfg.lil_replicates) - 1e-9));
  for (std::size_t c = 0; c < samples.components.size(); ++c) {
    const int i = samples.components[c];
    const double var = exp.variance(i).sigma_sq;
    std::vector<double> stat, energy;
    std::int64_t inside = 0;
    for (const auto& row : samples.xi[c]) {
      double run = 0.0;
      for (auto t : checkpoints) {
        const double td = static_cast<double>(t);
        const double denom = std::sqrt(2.0 * var * td * std::log(std::log(td)));
        run = std::max(run, var > 0.0 ? std::abs(row[index_of(t)]) / denom : std::abs(row[index_of(t)]));
      }
      // Energy of the rescaled path zeta_H(u) on the u grid, against sigma^2.
      const double scale = std::sqrt(2.0 * static_cast<double>(H) * std::log(std::log(static_cast<double>(H))));
      double e = 0.0, prev = 0.0;
      for (int k = 1; k <= kU; ++k) {
        double z = row[index_of(H * k / kU)] / scale;
        e += (z - prev) * (z - prev) * kU;
        prev = z;
      }
      stat.push_back(run);
      energy.push_back(var > 0.0 ? e / var : 0.0);
      inside += run >= cfg.tol.lil_low && run <= cfg.tol.lil_high;
    }
    if (csv)
      for (std::size_t r = 0; r < stat.size(); ++r)
        *csv << r << ',' << i << ',' << fmt(stat[r]) << ',' << fmt(energy[r]) << '\n';
    json entry = {{"component", i}, {"sigma_sq", var}, {"running_max", stat},
                  {"energy_ratio", energy}, {"inside", inside}, {"required", need}};
    Verdict v = var > 0.0 ? verdict_of(inside >= need) : Verdict::pass;
    if (var == 0.0) entry["degenerate"] = true;
    entry["verdict"] = to_string(v);
    s.verdict = combine(s.verdict, v);
    comps.push_back(entry);
  }
  s.stats["components"] = comps;
  s.stats["checkpoints"] = {checkpoints.front(), checkpoints.back(), checkpoints.size()};
  s.note = "weak desk-scale envelope check: gross violations of the envelope can be refuted, "
           "membership of the limit set cannot be certified";
  return s;
}

Section run_blocks(const Experiment& exp, std::ostream* csv) {
  Section s;
  s.name = "blocks";
  const auto& cfg = exp.config();
  const std::int64_t J = cfg.mds_blocks;
  const std::int64_t R = cfg.mds_replicates;
  try {
    BlockSchedule sched = schedule_for_blocks(cfg.blocks, J);
    auto checkpoints = geometric_grid(std::min<std::int64_t>(10, J), J, 10);
    json comps = json::array();
    for (int i : exp.components()) {
      MartingaleEngine engine(exp.model(), exp.decomposition(), exp.q_family(), sched, i, J);
      std::vector<std::vector<MdsObservation>> obs(checkpoints.size(), std::vector<MdsObservation>(R));
      std::vector<double> tele(R), resid(R), tails(R);
      const auto t_grid = geometric_grid(10, sched.horizon(), 12);
      ErrorDiagnostics first;
      parallel_for(R, exp.threads(), [&](std::int64_t r) {
        Path path = sample_for_engine(exp, engine, replicate_seed(cfg.seed, component_stream(kMdsStream, i), r));
        MartingalePieces p = corrected_pieces(exp, engine, path);
        tele[r] = telescoping_residual(p);
        ErrorDiagnostics d = error_report(p, sched, t_grid);
        resid[r] = d.max_residual;
        tails[r] = p.max_tail;
        double past = 0.0;
        std::size_t c = 0;
        for (std::int64_t m = 1; m <= J && c < checkpoints.size(); ++m) {
          if (m == checkpoints[c]) {
            obs[c][r] = {m == 1 ? -1 : path.symbol(engine.cut(m - 1)), past, p.M[m]};
            ++c;
          }
          past += p.M[m];
        }
        if (r == 0) first = std::move(d);
      });
      MdsReport mds = martingale_difference_test(checkpoints, obs);
      const double max_tele = *std::max_element(tele.begin(), tele.end());
      const double max_resid = *std::max_element(resid.begin(), resid.end());
      double worst = 0.0;
      for (const auto& b : mds.bins) worst = std::max(worst, b.bound > 0.0 ? b.standardized / b.bound : 0.0);
      Verdict v = combine(mds.verdict, verdict_of(max_tele <= cfg.tol.identity && max_resid <= cfg.tol.identity));
      comps.push_back({{"component", i},
                       {"blocks", J},
                       {"replicates", R},
                       {"checkpoints", checkpoints},
                       {"bins", mds.bins.size()},
                       {"worst_bin_ratio", worst},
                       {"mds_verdict", to_string(mds.verdict)},
                       {"telescoping_residual", max_tele},
                       {"identity_residual", max_resid},
                       {"max_correction_tail", *std::max_element(tails.begin(), tails.end())},
                       {"verdict", to_string(v)}});
      s.verdict = combine(s.verdict, v);
      if (csv) write_csv(first, *csv);
    }
    s.stats["components"] = comps;
    s.stats["schedule"] = sched.to_json();
  } catch (const UnsupportedError& e) {
    return unsupported(s.name, e);
  }
  return s;
}

Section run_embedding(const Experiment& exp, std::ostream* csv) {
  Section s;
  s.name = "embedding";
  const auto& cfg = exp.config();
  const std::int64_t R = cfg.embed_ks_replicates;
  auto steps = cfg.embed_ks_steps;
  std::sort(steps.begin(), steps.end());
  const std::int64_t J = steps.back();
  try {
    BlockSchedule sched = schedule_for_blocks(cfg.blocks, J);
    json comps = json::array();
    for (int i : exp.components()) {
      MartingaleEngine engine(exp.model(), exp.decomposition(), exp.q_family(), sched, i, J);
      std::vector<std::vector<double>> embedded(steps.size(), std::vector<double>(R));
      std::vector<std::vector<double>> direct = embedded;
      std::vector<double> tau(R), expected(R), squares(R), t_sq(R), m_four(R);
      std::vector<std::int64_t> mismatches(R), empirical(R);
      std::vector<double> min_T(R), law_mean(R);
      EmbeddingResult first;
      parallel_for(R, exp.threads(), [&](std::int64_t r) {
        EmbeddingResult run = embed_generative(engine, {}, replicate_seed(cfg.seed, component_stream(kGenerativeStream, i), r));
        Path path = sample_for_engine(exp, engine, replicate_seed(cfg.seed, component_stream(kDirectStream, i), r));
        MartingalePieces p = corrected_pieces(exp, engine, path);
        double sum = 0.0, sq = 0.0;
        std::size_t c = 0;
        for (std::int64_t m = 1; m <= J; ++m) {
          sum += p.M[m];
          if (c < steps.size() && m == steps[c]) {
            direct[c][r] = sum;
            embedded[c][r] = run.embedded[m - 1];
            ++c;
          }
        }
        double ts = 0.0, m4 = 0.0;
        for (std::size_t j = 0; j < run.T.size(); ++j) {
          sq += run.law_second[j];
          ts += run.T[j] * run.T[j];
          m4 += run.law_fourth[j];
        }
        tau[r] = run.cumulative.back();
        expected[r] = sq;
        t_sq[r] = ts;
        m_four[r] = m4;
        double realized = 0.0;
        for (double x : run.increments) realized += x * x;
        squares[r] = realized;
        mismatches[r] = run.replay_mismatches;
        empirical[r] = run.empirical_steps;
        min_T[r] = *std::min_element(run.T.begin(), run.T.end());
        law_mean[r] = run.max_law_mean;
        if (r == 0) first = std::move(run);
      });
      Verdict v = Verdict::pass;
      json ks_j = json::array();
      for (std::size_t c = 0; c < steps.size(); ++c) {
        KsResult ks = ks_two_sample(embedded[c], direct[c]);
        ks_j.push_back({{"m", steps[c]}, {"statistic", ks.statistic}, {"p_value", ks.p_value}});
        v = combine(v, verdict_of(ks.p_value > cfg.tol.ks_alpha));
      }
      const double mean_tau = mean(tau), mean_expected = mean(expected);
      const double rel = std::abs(mean_tau / mean_expected - 1.0);
      v = combine(v, verdict_of(rel < cfg.tol.mean_time_rel));
      std::int64_t total_mismatch = 0, total_empirical = 0;
      for (auto x : mismatches) total_mismatch += x;
      for (auto x : empirical) total_empirical += x;
      const double smallest_T = *std::min_element(min_T.begin(), min_T.end());
      v = combine(v, verdict_of(total_mismatch == 0 && smallest_T >= 0.0));
      comps.push_back({{"component", i},
                       {"replicates", R},
                       {"ks", ks_j},
                       {"mean_tau", mean_tau},
                       {"mean_expected_square", mean_expected},
                       {"mean_realized_square", mean(squares)},
                       {"relative_time_error", rel},
                       {"fourth_moment_ratio", mean(t_sq) / std::max(mean(m_four), 1e-300)},
                       {"replay_mismatches", total_mismatch},
                       {"empirical_steps", total_empirical},
                       {"min_T", smallest_T},
                       {"max_law_mean", *std::max_element(law_mean.begin(), law_mean.end())},
                       {"verdict", to_string(v)}});
      s.verdict = combine(s.verdict, v);
      if (csv) write_csv(first, *csv);
    }
    s.stats["components"] = comps;
  } catch (const UnsupportedError& e) {
    return unsupported(s.name, e);
  }
  return s;
}

Section run_rates(const Experiment& exp, std::ostream* csv) {
  Section s;
  s.name = "rates";
  const auto& cfg = exp.config();
  const std::int64_t H = cfg.rate_horizon;
  const std::int64_t R = cfg.rate_replicates;
  try {
    BlockSchedule sched = build_schedule(cfg.blocks, H);
    const std::int64_t J = sched.nu(H);
    const auto grid = geometric_grid(std::min<std::int64_t>(100, H / 10), H, 16);
    const auto grid_d = as_double(grid);
    json comps = json::array();
    if (csv) *csv << "component,t,error_envelope,strong_distance,time_ratio\n";
    for (int i : exp.components()) {
      const double var = exp.variance(i).sigma_sq;
      MartingaleEngine engine(exp.model(), exp.decomposition(), exp.q_family(), sched, i, J);
      EmbeddingOptions opt;
      for (std::int64_t k = 1; k <= H; ++k) opt.snapshot_times.push_back(var * static_cast<double>(k));
      std::vector<std::vector<double>> env(R), dist(R);
      std::vector<EmbeddingResult> runs(R);
      parallel_for(R, exp.threads(), [&](std::int64_t r) {
        const std::uint64_t seed = replicate_seed(cfg.seed, component_stream(kRateStream, i), r);
        Path path = sample_for_engine(exp, engine, seed);
        MartingalePieces p = corrected_pieces(exp, engine, path);
        env[r] = error_envelope(p, sched, grid);
        EmbeddingResult run = embed_martingale(engine, path, p, opt,
                                               replicate_seed(cfg.seed, component_stream(kEmbedStream, i), r));
        dist[r] = strong_approx_distance(p.xi, run, grid);
        run.snapshot_times.clear();
        run.snapshot_values.clear();
        run.snapshot_times.shrink_to_fit();
        run.snapshot_values.shrink_to_fit();
        runs[r] = std::move(run);
      });
      ExponentFit f_err = fit_envelope_exponent(grid_d, env, mix_seed(cfg.seed, 11));
      ExponentFit f_strong = fit_envelope_exponent(grid_d, dist, mix_seed(cfg.seed, 12));
      TimeLln lln = time_lln_check(runs, sched, var, grid, mix_seed(cfg.seed, 13));
      auto exponent_ok = [&](const ExponentFit& f) { return !f.defined || f.ci_high < cfg.tol.exponent; };
      const double final_dev = lln.deviation.back();
      Verdict v_err = verdict_of(exponent_ok(f_err));
      Verdict v_strong = verdict_of(exponent_ok(f_strong));
      Verdict v_time = verdict_of(final_dev < cfg.tol.time_lln);
      Verdict v = combine(combine(v_err, v_strong), v_time);
      std::int64_t mism = 0;
      for (const auto& run : runs) mism += run.replay_mismatches;
      comps.push_back({{"component", i},
                       {"sigma_sq", var},
                       {"blocks", J},
                       {"replicates", R},
                       {"error_exponent", fit_json(f_err)},
                       {"error_verdict", to_string(v_err)},
                       {"strong_exponent", fit_json(f_strong)},
                       {"strong_verdict", to_string(v_strong)},
                       {"time_ratio", lln.mean_ratio.back()},
                       {"time_deviation", final_dev},
                       {"time_relative_deviation", var > 0.0 ? final_dev / var : 0.0},
                       {"time_envelope_exponent", fit_json(lln.fit)},
                       {"time_verdict", to_string(v_time)},
                       {"replay_mismatches", mism},
                       {"verdict", to_string(v)}});
      s.verdict = combine(s.verdict, v);
      if (csv)
        for (std::size_t g = 0; g < grid.size(); ++g) {
          double e = 0.0, d = 0.0;
          for (std::int64_t r = 0; r < R; ++r) {
            e += env[r][g];
            d += dist[r][g];
          }
          *csv << i << ',' << grid[g] << ',' << fmt(e / static_cast<double>(R)) << ','
               << fmt(d / static_cast<double>(R)) << ',' << fmt(lln.mean_ratio[g]) << '\n';
        }
    }
    s.stats["components"] = comps;
    s.stats["grid"] = grid;
  } catch (const UnsupportedError& e) {
    return unsupported(s.name, e);
  }
  return s;
}

Report run_full_pipeline(const Experiment& exp, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  Report rep;
  rep.name = exp.config().name;
  auto open = [&](const std::string& file) {
    rep.files.push_back(file);
    return std::ofstream(fs::path(out_dir) / file, std::ios::binary);
  };
  {
    auto f = open("config.json");
    f << exp.config().to_json().dump(2) << '\n';
  }
  rep.sections.push_back(run_validate(exp));
  {
    auto f = open("mixing.csv");
    rep.sections.push_back(run_mixing(exp, &f));
  }
  const auto grid = geometric_grid(std::min<std::int64_t>(100, exp.config().horizon / 10),
                                   exp.config().horizon, 12);
  SumSamples samples = simulate_sums(exp, grid, exp.config().replicates, kCltStream);
  rep.sections.push_back(run_variance(exp, samples));
  {
    auto f = open("clt.csv");
    rep.sections.push_back(run_clt(exp, samples, &f));
  }
  {
    auto f = open("blocks_errors.csv");
    rep.sections.push_back(run_blocks(exp, &f));
  }
  {
    auto f = open("embedding_trace.csv");
    rep.sections.push_back(run_embedding(exp, &f));
  }
  {
    auto f = open("rates.csv");
    rep.sections.push_back(run_rates(exp, &f));
  }
  {
    auto f = open("lil.csv");
    rep.sections.push_back(run_lil(exp, &f));
  }
  rep.files.push_back("report.json");
  rep.files.push_back("summary.txt");
  {
    std::ofstream f(fs::path(out_dir) / "report.json", std::ios::binary);
    f << rep.to_json().dump(2) << '\n';
  }
  {
    std::ofstream f(fs::path(out_dir) / "summary.txt", std::ios::binary);
    f << rep.summary();
  }
  return rep;
}

}  // namespace ncsum
