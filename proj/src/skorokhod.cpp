#include "ncsum/skorokhod.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace ncsum {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t pick_cumulative(const std::vector<double>& cum, Rng& rng) {
  double u = uniform_open(rng) * cum.back();
  auto it = std::upper_bound(cum.begin(), cum.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()), cum.size() - 1);
}

}  // namespace

TwoPointRule::TwoPointRule(std::vector<double> values, std::vector<double> probs) {
  if (values.empty() || values.size() != probs.size()) throw ConfigError("target law has empty support");
  double total = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!(probs[k] >= 0.0)) throw ConfigError("target law has a negative weight");
    total += probs[k];
    scale = std::max(scale, std::abs(values[k]));
  }
  if (!(total > 0.0)) throw ConfigError("target law has empty support");
  const double zero_tol = 1e-12 * std::max(1.0, scale);
  double m = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) m += values[k] * probs[k] / total;
  if (std::abs(m) > zero_tol) throw ConfigError("target law has nonzero mean");
  std::vector<std::size_t> order(values.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return values[x] < values[y]; });
  for (std::size_t k : order) {
    if (probs[k] == 0.0) continue;
    double v = std::abs(values[k]) <= zero_tol ? 0.0 : values[k];
    double p = probs[k] / total;
    if (!values_.empty() && values_.back() == v) {
      probs_.back() += p;
    } else {
      values_.push_back(v);
      probs_.push_back(p);
    }
  }
  for (std::size_t k = 0; k < values_.size(); ++k) {
    const double v = values_[k], p = probs_[k];
    second_ += v * v * p;
    fourth_ += v * v * v * v * p;
    if (v < 0.0) {
      neg_.push_back(k);
      neg_w_.push_back((neg_w_.empty() ? 0.0 : neg_w_.back()) - v * p);
    } else if (v > 0.0) {
      pos_.push_back(k);
      pos_w_.push_back((pos_w_.empty() ? 0.0 : pos_w_.back()) + v * p);
    } else {
      zero_ += p;
    }
  }
}

std::pair<double, double> TwoPointRule::pair_for(double x, Rng& rng) const {
  if (x == 0.0 || neg_.empty() || pos_.empty()) return {0.0, 0.0};
  if (x > 0.0) return {values_[neg_[pick_cumulative(neg_w_, rng)]], x};
  return {x, values_[pos_[pick_cumulative(pos_w_, rng)]]};
}

std::pair<double, double> TwoPointRule::sample_pair(Rng& rng) const {
  double u = uniform_open(rng);
  double c = 0.0;
  std::size_t k = values_.size() - 1;
  for (std::size_t j = 0; j < values_.size(); ++j) {
    c += probs_[j];
    if (u < c) {
      k = j;
      break;
    }
  }
  return pair_for(values_[k], rng);
}

TwoPointRule embed_distribution(const std::vector<double>& values, const std::vector<double>& probs) {
  return TwoPointRule(values, probs);
}

// ---- Brownian motion ----

BrownianMotion::BrownianMotion(double h, double kappa) : h_(h), kappa_(kappa) {
  if (!(h > 0.0) || !(kappa > 1.0)) throw ConfigError("Brownian resolution must be positive");
}

void BrownianMotion::set_snapshots(std::vector<double> times) {
  std::sort(times.begin(), times.end());
  snap_times_ = std::move(times);
  snap_values_.clear();
  while (snap_values_.size() < snap_times_.size() && snap_times_[snap_values_.size()] <= time_)
    snap_values_.push_back(position_);
}

BrownianMotion::Attempt BrownianMotion::run(double lo, double hi, double t0, double w0,
                                            std::uint64_t seed, bool record) const {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Attempt at{t0, w0, 0, 0, {}};
  std::size_t next = snap_values_.size();
  double t = t0, w = w0;
  while (true) {
    double d = std::min(w - lo, hi - w);
    double dt = std::max(d * d / (kappa_ * kappa_), h_);
    bool to_snap = false;
    if (next < snap_times_.size() && snap_times_[next] <= t + dt) {
      dt = snap_times_[next] - t;
      to_snap = true;
    }
    ++at.steps;
    if (dt > 0.0) {
      double w1 = w + std::sqrt(dt) * normal(rng);
      if (w1 <= lo || w1 >= hi) {
        double b = w1 <= lo ? lo : hi;
        at.time = t + dt * (w - b) / (w - w1);
        at.position = b;
        at.side = w1 <= lo ? -1 : 1;
        return at;
      }
      double p_lo = std::exp(-2.0 * (w - lo) * (w1 - lo) / dt);
      double p_hi = std::exp(-2.0 * (hi - w) * (hi - w1) / dt);
      double u = uniform_open(rng);
      if (u < p_lo + p_hi) {
        at.time = t + 0.5 * dt;
        at.side = u < p_lo ? -1 : 1;
        at.position = at.side < 0 ? lo : hi;
        return at;
      }
      w = w1;
      t += dt;
    }
    if (to_snap) {
      t = snap_times_[next];
      if (record) at.snaps.push_back(w);
      ++next;
    }
  }
}

BrownianMotion::Exit BrownianMotion::exit(double lo, double hi, int required_side,
                                          std::uint64_t seed) {
  Exit e;
  if (!(lo <= position_ && position_ <= hi)) throw Error("Brownian motion starts outside the interval");
  if (lo == position_ || hi == position_) {
    e.side = lo == position_ ? -1 : 1;
    return e;
  }
  for (int a = 0;; ++a) {
    std::uint64_t s = mix_seed(seed, static_cast<std::uint64_t>(a));
    Attempt at = run(lo, hi, time_, position_, s, true);
    e.steps += at.steps;
    if (required_side != 0 && at.side != required_side) continue;
    e.attempts = a + 1;
    e.accepted_seed = s;
    e.side = at.side;
    e.duration = at.time - time_;
    time_ = at.time;
    position_ = at.position;
    snap_values_.insert(snap_values_.end(), at.snaps.begin(), at.snaps.end());
    return e;
  }
}

double BrownianMotion::replay(double lo, double hi, double start_time, double start_position,
                              std::uint64_t attempt_seed) const {
  BrownianMotion copy(h_, kappa_);
  copy.time_ = start_time;
  copy.position_ = start_position;
  copy.snap_times_ = snap_times_;
  auto first = std::upper_bound(snap_times_.begin(), snap_times_.end(), start_time);
  copy.snap_values_.assign(static_cast<std::size_t>(first - snap_times_.begin()), 0.0);
  return copy.run(lo, hi, start_time, start_position, attempt_seed, false).time - start_time;
}

void BrownianMotion::advance_to(double t, Rng& rng) {
  std::normal_distribution<double> normal;
  while (snap_values_.size() < snap_times_.size() && snap_times_[snap_values_.size()] <= t) {
    double ts = snap_times_[snap_values_.size()];
    if (ts > time_) position_ += std::sqrt(ts - time_) * normal(rng);
    time_ = std::max(time_, ts);
    snap_values_.push_back(position_);
  }
  if (t > time_) {
    position_ += std::sqrt(t - time_) * normal(rng);
    time_ = t;
  }
}

// ---- embeddings ----

namespace {

double t_max(const std::vector<double>& times) {
  return times.empty() ? 0.0 : *std::max_element(times.begin(), times.end());
}

void record_step(EmbeddingResult& out, double T, double increment, double embedded,
                 const TwoPointRule& rule, int state) {
  out.T.push_back(T);
  out.cumulative.push_back((out.cumulative.empty() ? 0.0 : out.cumulative.back()) + T);
  out.increments.push_back(increment);
  out.martingale.push_back((out.martingale.empty() ? 0.0 : out.martingale.back()) + increment);
  out.embedded.push_back(embedded);
  out.law_second.push_back(rule.expected_time());
  out.law_fourth.push_back(rule.fourth_moment());
  out.state.push_back(state);
}

// Centered copy of a step law; the recorded mean is the numerical residue of the construction.
TwoPointRule centered_rule(const StepLaw& law, EmbeddingResult& out) {
  if (!law.exact()) ++out.empirical_steps;
  out.max_law_mean = std::max(out.max_law_mean, std::abs(law.mean()));
  std::vector<double> centered = law.values();
  for (double& v : centered) v -= law.mean();
  return TwoPointRule(std::move(centered), law.probs());
}

double step_resolution(const EmbeddingOptions& o, const TwoPointRule& rule) {
  return o.h > 0.0 ? o.h : 1e-4 * std::max(rule.expected_time(), 1e-12);
}

}  // namespace

EmbeddingResult embed_martingale(const MartingaleEngine& engine, const Path& path,
                                 const MartingalePieces& pieces, EmbeddingOptions options,
                                 std::uint64_t seed) {
  if (!pieces.corrected) throw ConfigError("embedding needs corrected pieces");
  if (pieces.blocks > engine.blocks()) throw ConfigError("engine covers fewer blocks than the pieces");
  SymbolLookup sym = [&](std::int64_t p) { return path.symbol(p); };
  EmbeddingResult out;
  Rng pair_rng(mix_seed(seed, 0xA11));
  Rng free_rng(mix_seed(seed, 0xF4EE));
  BrownianMotion bm(1.0, options.kappa);
  bm.set_snapshots(options.snapshot_times);
  double sum = 0.0;
  for (std::int64_t m = 1; m <= pieces.blocks; ++m) {
    const auto um = static_cast<std::uint64_t>(m);
    StepLaw law = engine.step_law(m, sym, pieces.R[m - 1], mix_seed(seed, 2 * um));
    TwoPointRule rule = centered_rule(law, out);
    const double h = step_resolution(options, rule);
    out.h = std::max(out.h, h);
    const double x = pieces.M[m];
    const std::size_t k = law.nearest(x);
    const double xa = law.values()[k] - law.mean();
    out.max_offset = std::max(out.max_offset, std::abs(x - law.values()[k]));
    const int state = m == 1 ? -1 : path.symbol(engine.cut(m - 1));
    const double zero_tol = 1e-12 * std::max(1.0, std::sqrt(rule.expected_time()));
    double T = 0.0;
    if (std::abs(xa) > zero_tol) {
      auto [u, v] = rule.pair_for(xa, pair_rng);
      bm.set_resolution(h);
      const double w0 = bm.position(), t0 = bm.time();
      auto e = bm.exit(w0 + u, w0 + v, xa > 0.0 ? 1 : -1, mix_seed(seed, 2 * um + 1));
      out.bm_steps += e.steps;
      T = e.duration;
      if (options.replay_every > 0 && m % options.replay_every == 0) {
        ++out.replays;
        if (bm.replay(w0 + u, w0 + v, t0, w0, e.accepted_seed) != e.duration) ++out.replay_mismatches;
      }
    }
    sum += x;
    bm.set_position(sum);
    record_step(out, T, x, sum, rule, state);
  }
  bm.set_resolution(1.0);
  bm.advance_to(t_max(options.snapshot_times), free_rng);
  out.snapshot_times = bm.snapshot_times();
  out.snapshot_values = bm.snapshot_values();
  return out;
}

namespace {

// Symbols drawn so far, in increasing position order.
struct SymbolStore {
  std::vector<std::int64_t> pos;
  std::vector<int> sym;

  int at(std::int64_t p) const {
    auto it = std::lower_bound(pos.begin(), pos.end(), p);
    if (it == pos.end() || *it != p) throw Error("symbol requested before it was drawn");
    return sym[static_cast<std::size_t>(it - pos.begin())];
  }
  void push(std::int64_t p, int s) {
    if (!pos.empty() && p <= pos.back()) throw Error("symbols must be appended in order");
    pos.push_back(p);
    sym.push_back(s);
  }
};

int sample_index(const std::vector<double>& w, Rng& rng) {
  double total = 0.0;
  for (double x : w) total += x;
  double u = uniform_open(rng) * total, c = 0.0;
  for (std::size_t s = 0; s < w.size(); ++s) {
    c += w[s];
    if (u < c) return static_cast<int>(s);
  }
  return static_cast<int>(w.size()) - 1;
}

}  // namespace

EmbeddingResult embed_generative(const MartingaleEngine& engine, EmbeddingOptions options,
                                 std::uint64_t seed) {
  const ProcessModel& model = engine.model();
  const int S = model.alphabet_size();
  const auto needed = engine.value_positions();
  SymbolStore store;
  SymbolLookup sym = [&](std::int64_t p) { return store.at(p); };
  EmbeddingResult out;
  Rng rng(mix_seed(seed, 0x6E4));
  Rng free_rng(mix_seed(seed, 0xF4EE));
  BrownianMotion bm(1.0, options.kappa);
  bm.set_snapshots(options.snapshot_times);
  const BlockSchedule& sched = engine.schedule();
  double r_prev = engine.correction(0, sym);
  double sum = 0.0;
  std::vector<double> w(S);
  for (std::int64_t m = 1; m <= engine.blocks(); ++m) {
    const auto um = static_cast<std::uint64_t>(m);
    const std::int64_t c0 = engine.cut(m - 1), c1 = engine.cut(m);
    StepLaw law = engine.step_law(m, sym, r_prev, mix_seed(seed, 2 * um));
    TwoPointRule rule = centered_rule(law, out);
    const double h = step_resolution(options, rule);
    out.h = std::max(out.h, h);
    const int state = m == 1 ? -1 : store.at(c0);
    auto [u, v] = rule.sample_pair(rng);
    double T = 0.0, xa = 0.0;
    if (u != v) {
      bm.set_resolution(h);
      const double w0 = bm.position(), t0 = bm.time();
      auto e = bm.exit(w0 + u, w0 + v, 0, mix_seed(seed, 2 * um + 1));
      out.bm_steps += e.steps;
      T = e.duration;
      xa = e.side < 0 ? u : v;
      if (options.replay_every > 0 && m % options.replay_every == 0) {
        ++out.replays;
        if (bm.replay(w0 + u, w0 + v, t0, w0, e.accepted_seed) != e.duration) ++out.replay_mismatches;
      }
    }
    const std::size_t k = law.nearest(xa + law.mean());
    std::vector<int> scen = law.sample_scenario(k, rng);
    const auto& P = law.positions();
    // Needed positions in (c0, c1] that the law leaves free are filled from the chain bridge.
    std::vector<std::int64_t> fill;
    for (std::int64_t p : needed)
      if ((c0 == kNoCut || p > c0) && p <= c1 && !std::binary_search(P.begin(), P.end(), p))
        fill.push_back(p);
    std::size_t ip = 0, jf = 0;
    while (ip < P.size() || jf < fill.size()) {
      if (jf >= fill.size() || (ip < P.size() && P[ip] < fill[jf])) {
        store.push(P[ip], scen[ip]);
        ++ip;
        continue;
      }
      const std::int64_t f = fill[jf++];
      const bool has_left = !store.pos.empty();
      for (int s = 0; s < S; ++s) {
        double lw = has_left ? model.power_entry(f - store.pos.back(), store.sym.back(), s)
                             : model.stationary_law()[s];
        double rw = ip < P.size() ? model.power_entry(P[ip] - f, s, scen[ip]) : 1.0;
        w[s] = lw * rw;
      }
      store.push(f, sample_index(w, rng));
    }
    double V = 0.0;
    for (std::int64_t l = sched.a(m) + 1; l <= sched.b(m); ++l) V += engine.summand(l, sym);
    const double r_now = engine.correction(m, sym);
    const double x = V + r_now - r_prev;
    out.max_offset = std::max(out.max_offset, std::abs(x - law.values()[k]));
    r_prev = r_now;
    sum += x;
    bm.set_position(sum);
    record_step(out, T, x, sum, rule, state);
  }
  bm.set_resolution(1.0);
  bm.advance_to(t_max(options.snapshot_times), free_rng);
  out.snapshot_times = bm.snapshot_times();
  out.snapshot_values = bm.snapshot_values();
  return out;
}

TimeLln time_lln_check(const std::vector<EmbeddingResult>& runs, const BlockSchedule& schedule,
                       double sigma_sq, const std::vector<std::int64_t>& t_grid,
                       std::uint64_t seed) {
  if (runs.empty()) throw ConfigError("time check needs at least one run");
  TimeLln out;
  std::vector<std::vector<double>> env(runs.size(), std::vector<double>(t_grid.size()));
  bool any_nonzero = false;
  for (std::size_t g = 0; g < t_grid.size(); ++g) {
    const std::int64_t t = t_grid[g];
    const std::int64_t nu = schedule.nu(t);
    double ratio = 0.0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      if (nu > static_cast<std::int64_t>(runs[r].cumulative.size()))
        throw ConfigError("embedding run shorter than nu(t)");
      const double tau = nu >= 1 ? runs[r].cumulative[nu - 1] : 0.0;
      ratio += tau / static_cast<double>(t);
      env[r][g] = std::abs(tau - sigma_sq * static_cast<double>(t));
      any_nonzero = any_nonzero || tau != 0.0;
    }
    ratio /= static_cast<double>(runs.size());
    out.t.push_back(static_cast<double>(t));
    out.mean_ratio.push_back(ratio);
    out.deviation.push_back(std::abs(ratio - sigma_sq));
  }
  if (sigma_sq == 0.0) {
    out.verdict = any_nonzero ? Verdict::fail : Verdict::pass;
    return out;
  }
  out.fit = fit_envelope_exponent(out.t, env, seed);
  out.verdict = !out.fit.defined || out.fit.exponent < 1.0 ? Verdict::pass : Verdict::fail;
  return out;
}

std::vector<double> strong_approx_distance(const std::vector<double>& xi,
                                           const EmbeddingResult& run,
                                           const std::vector<std::int64_t>& t_grid) {
  std::int64_t tmax = 0;
  for (auto t : t_grid) tmax = std::max(tmax, t);
  if (static_cast<std::int64_t>(xi.size()) <= tmax) throw ConfigError("partial sums shorter than the grid");
  if (static_cast<std::int64_t>(run.snapshot_values.size()) < tmax)
    throw ConfigError("embedding has fewer snapshots than the grid");
  std::vector<double> running(tmax + 1, 0.0);
  for (std::int64_t s = 1; s <= tmax; ++s)
    running[s] = std::max(running[s - 1], std::abs(xi[s] - run.snapshot_values[s - 1]));
  std::vector<double> out;
  out.reserve(t_grid.size());
  for (auto t : t_grid) out.push_back(running[t]);
  return out;
}

void write_csv(const EmbeddingResult& run, std::ostream& out) {
  out << "j,T,cumulative,embedded,martingale,increment,law_second\n";
  for (std::size_t j = 0; j < run.T.size(); ++j)
    out << j + 1 << ',' << fmt(run.T[j]) << ',' << fmt(run.cumulative[j]) << ','
        << fmt(run.embedded[j]) << ',' << fmt(run.martingale[j]) << ','
        << fmt(run.increments[j]) << ',' << fmt(run.law_second[j]) << '\n';
}

}  // namespace ncsum
