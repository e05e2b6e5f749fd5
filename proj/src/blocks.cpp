#include "ncsum/blocks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

namespace ncsum {

namespace {

// Quantum for the integer keys that identify atoms of a step law.
constexpr double kQuantum = 0x1.0p-36;
constexpr std::int64_t kInfiniteGap = std::numeric_limits<std::int64_t>::max();

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::int64_t to_key(double v) { return std::llround(v / kQuantum); }

int draw(const std::vector<double>& weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = uniform_open(rng) * total;
  double c = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    c += weights[k];
    if (u < c) return static_cast<int>(k);
  }
  for (std::size_t k = weights.size(); k-- > 0;)
    if (weights[k] > 0.0) return static_cast<int>(k);
  return 0;
}

}  // namespace

std::int64_t floor_pow(std::int64_t j, double e) {
  double v = std::pow(static_cast<double>(j), e);
  double r = std::round(v);
  if (std::abs(v - r) <= 1e-9 * std::max(1.0, v)) return static_cast<std::int64_t>(r);
  return static_cast<std::int64_t>(std::floor(v));
}

BlockSchedule::BlockSchedule(BlockParams params, std::int64_t horizon)
    : params_(params), horizon_(horizon) {
  const auto& p = params_;
  if (!(p.eta > 0.0 && 4.0 * p.eta < 2.0 * p.theta && 2.0 * p.theta < p.tau && p.tau < 0.5))
    throw ConfigError("block parameters violate 4 eta < 2 theta < tau < 1/2");
  if (horizon < 0) throw ConfigError("schedule horizon must be >= 0");
  a_ = {0, 0};
  b_ = {0, 1};
  std::int64_t extra = -1;
  for (std::int64_t j = 2;; ++j) {
    std::int64_t aj = b_[j - 1] + floor_pow(j - 1, p.theta);
    a_.push_back(aj);
    b_.push_back(aj + floor_pow(j, p.tau));
    if (extra < 0 && aj > horizon + 1) extra = 64;
    if (extra >= 0 && extra-- == 0) break;
  }
}

std::int64_t BlockSchedule::a(std::int64_t j) const {
  if (j < 1 || j >= static_cast<std::int64_t>(a_.size()))
    throw Error("block index " + std::to_string(j) + " beyond the stored schedule");
  return a_[j];
}

std::int64_t BlockSchedule::b(std::int64_t j) const {
  if (j < 1 || j >= static_cast<std::int64_t>(b_.size()))
    throw Error("block index " + std::to_string(j) + " beyond the stored schedule");
  return b_[j];
}

std::int64_t BlockSchedule::nu(std::int64_t t) const {
  const std::int64_t last = static_cast<std::int64_t>(a_.size()) - 1;
  if (a_[last] <= t + 1) throw Error("t beyond the stored schedule");
  // a_[j + 1] is increasing in j.
  std::int64_t lo = 0, hi = last - 1;
  while (lo < hi) {
    std::int64_t mid = (lo + hi + 1) / 2;
    if (a_[mid + 1] <= t + 1) lo = mid;
    else hi = mid - 1;
  }
  return lo;
}

bool BlockSchedule::nu_bounds_hold(std::int64_t t) const {
  const double tau = params_.tau;
  double n = static_cast<double>(nu(t));
  double lower = std::pow(tau * static_cast<double>(t) / 2.0, 1.0 / (1.0 + tau)) - 1.0;
  double upper = 2.0 * std::pow(static_cast<double>(t), 1.0 / (1.0 + tau));
  return n >= lower && n <= upper;
}

nlohmann::json BlockSchedule::to_json() const {
  return {{"eta", params_.eta},
          {"theta", params_.theta},
          {"tau", params_.tau},
          {"horizon", horizon_},
          {"nu_horizon", nu(horizon_)}};
}

BlockSchedule build_schedule(BlockParams params, std::int64_t horizon) {
  return BlockSchedule(params, horizon);
}

// ---- StepLaw ----

std::size_t StepLaw::nearest(double x) const {
  auto it = std::lower_bound(values_.begin(), values_.end(), x);
  if (it == values_.end()) return values_.size() - 1;
  std::size_t k = static_cast<std::size_t>(it - values_.begin());
  if (k > 0 && std::abs(values_[k - 1] - x) < std::abs(values_[k] - x)) return k - 1;
  return k;
}

std::vector<int> StepLaw::sample_scenario(std::size_t k, Rng& rng) const {
  const std::int64_t target = keys_.at(k);
  const std::size_t n = positions_.size();
  std::vector<int> out(n, 0);
  if (!layers_.empty()) {
    std::vector<double> w;
    std::vector<const Entry*> cand;
    for (const auto& e : layers_[n - 1])
      if (e.key == target) {
        cand.push_back(&e);
        w.push_back(e.prob);
      }
    if (cand.empty()) throw Error("step law has no scenario for the requested atom");
    const Entry* cur = cand[draw(w, rng)];
    out[n - 1] = cur->symbol;
    for (std::size_t idx = n - 1; idx-- > 0;) {
      std::int64_t key = cur->key - gains_[idx + 1][cur->symbol];
      const std::int64_t gap = positions_[idx + 1] - positions_[idx];
      cand.clear();
      w.clear();
      const auto& layer = layers_[idx];
      for (int s = 0; s < model_->alphabet_size(); ++s) {
        Entry probe{s, key, 0.0};
        auto it = std::lower_bound(layer.begin(), layer.end(), probe, [](const Entry& x, const Entry& y) {
          return x.symbol != y.symbol ? x.symbol < y.symbol : x.key < y.key;
        });
        if (it != layer.end() && it->symbol == s && it->key == key) {
          cand.push_back(&*it);
          w.push_back(it->prob * model_->power_entry(gap, s, cur->symbol));
        }
      }
      if (cand.empty()) throw Error("step law backward pass lost its path");
      cur = cand[draw(w, rng)];
      out[idx] = cur->symbol;
    }
    return out;
  }
  std::vector<double> w;
  std::vector<std::size_t> cand;
  for (std::size_t s = 0; s < scenarios_.size(); ++s)
    if (scenario_keys_[s] == target) {
      cand.push_back(s);
      w.push_back(scenario_weights_[s]);
    }
  if (cand.empty()) throw Error("step law has no scenario for the requested atom");
  return scenarios_[cand[draw(w, rng)]];
}

// ---- MartingaleEngine ----

MartingaleEngine::MartingaleEngine(const ProcessModel& model, const Decomposition& dec,
                                   const QFamily& qf, const BlockSchedule& schedule, int i,
                                   std::int64_t blocks)
    : model_(model), dec_(dec), qf_(qf), schedule_(schedule), i_(i), blocks_(blocks) {
  if (!model.markov() || !model.fully_observed())
    throw UnsupportedError("martingale correction needs a fully observed markov model");
  if (!dec.has_tables()) throw UnsupportedError("martingale correction needs exact decomposition tables");
  if (i < 1 || i > dec.ell() || qf.ell() != dec.ell()) throw ConfigError("component index out of range");
  if (blocks < 0 || blocks > schedule.capacity() - 1) throw ConfigError("block count beyond schedule");
  sup_ = dec.sup_abs(i);
  const int S = model.alphabet_size();
  atom_.resize(S);
  for (int s = 0; s < S; ++s) atom_[s] = dec.atom_index(model.symbol_value(s));

  const double thresh = 1e-12 * std::max(1.0, sup_);
  terms_.resize(blocks + 1);
  std::int64_t lmax = std::max(schedule.a(blocks + 1), schedule.horizon() + 1);
  for (std::int64_t m = 0; m <= blocks; ++m) {
    Terms& T = terms_[m];
    if (sup_ == 0.0) continue;
    const std::int64_t c = cut(m);
    bool done = false;
    for (std::int64_t j = m + 1; !done; ++j) {
      if (j + 10 > schedule.capacity())
        throw Error("schedule exhausted while truncating the correction series");
      for (std::int64_t l = schedule.a(j) + 1; l <= schedule.b(j) && !done; ++l) {
        std::int64_t g = gap_of(l, c);
        if (g == kInfiniteGap) {
          done = true;
          break;
        }
        double bound = sup_ * model.l1_tail(std::max<std::int64_t>(g, 0));
        if (bound < thresh) {
          // Accept the cut when the gaps keep growing over the next blocks' indices.
          bool growing = true;
          std::int64_t prev = g, seen = 0;
          for (std::int64_t jj = j; jj <= j + 8 && seen < 8 && growing; ++jj)
            for (std::int64_t ll = std::max(l + 1, schedule.a(jj) + 1); ll <= schedule.b(jj) && seen < 8; ++ll) {
              std::int64_t gg = gap_of(ll, c);
              growing = growing && gg > prev;
              prev = gg;
              ++seen;
            }
          if (growing) {
            T.tail = bound;
            done = true;
            break;
          }
        }
        T.l.push_back(l);
        lmax = std::max(lmax, l);
      }
    }
  }
  for (std::int64_t l = 1; l <= lmax; ++l)
    for (int u = 0; u < i; ++u) needed_.push_back(qf.q[u](l));
  for (const auto& T : terms_)
    for (auto l : T.l)
      for (int u = 0; u < i; ++u) needed_.push_back(qf.q[u](l));
  std::sort(needed_.begin(), needed_.end());
  needed_.erase(std::unique(needed_.begin(), needed_.end()), needed_.end());
}

std::int64_t MartingaleEngine::cut(std::int64_t m) const {
  if (m == 0) return kNoCut;
  return qf_.q[i_ - 1](schedule_.b(m)) + schedule_.r(m);
}

std::vector<std::int64_t> MartingaleEngine::symbol_positions() const {
  std::vector<std::int64_t> out;
  for (std::int64_t m = 1; m <= blocks_; ++m) out.push_back(cut(m));
  return out;
}

std::int64_t MartingaleEngine::gap_of(std::int64_t l, std::int64_t c) const {
  std::int64_t top = qf_.q[i_ - 1](l);
  std::int64_t base = c;
  if (i_ >= 2) base = std::max(base, qf_.q[i_ - 2](l));
  if (base == kNoCut) return kInfiniteGap;
  return top - base;
}

double MartingaleEngine::summand(std::int64_t l, const SymbolLookup& sym) const {
  int atoms[64];
  for (int u = 0; u < i_; ++u) atoms[u] = atom_[sym(qf_.q[u](l))];
  return dec_.component_atoms(i_, std::span<const int>(atoms, i_));
}

double MartingaleEngine::conditional(std::int64_t l, std::int64_t c, const SymbolLookup& sym) const {
  const int S = model_.alphabet_size();
  int atoms[64];
  std::int64_t fpos[64];
  int fslot[64];
  int k = 0;
  for (int u = 0; u < i_; ++u) {
    std::int64_t p = qf_.q[u](l);
    if (c != kNoCut && p <= c) {
      atoms[u] = atom_[sym(p)];
    } else {
      fpos[k] = p;
      fslot[k] = u;
      ++k;
    }
  }
  if (k == 0) return dec_.component_atoms(i_, std::span<const int>(atoms, i_));
  const int start = c == kNoCut ? -1 : sym(c);
  auto first_row = [&](int s) {
    return start < 0 ? model_.stationary_law()[s] : model_.power_entry(fpos[0] - c, start, s);
  };
  if (k == 1) {
    double acc = 0.0;
    for (int s = 0; s < S; ++s) {
      double w = first_row(s);
      if (w == 0.0) continue;
      atoms[fslot[0]] = atom_[s];
      acc += w * dec_.component_atoms(i_, std::span<const int>(atoms, i_));
    }
    return acc;
  }
  int sy[64];
  double weight[65];
  weight[0] = 1.0;
  double acc = 0.0;
  int depth = 0;
  sy[0] = -1;
  while (depth >= 0) {
    if (++sy[depth] >= S) {
      --depth;
      continue;
    }
    double w = depth == 0 ? first_row(sy[0])
                          : model_.power_entry(fpos[depth] - fpos[depth - 1], sy[depth - 1], sy[depth]);
    weight[depth + 1] = weight[depth] * w;
    if (weight[depth + 1] == 0.0) continue;
    atoms[fslot[depth]] = atom_[sy[depth]];
    if (depth + 1 < k) {
      sy[++depth] = -1;
      continue;
    }
    acc += weight[k] * dec_.component_atoms(i_, std::span<const int>(atoms, i_));
  }
  return acc;
}

double MartingaleEngine::correction(std::int64_t m, const SymbolLookup& sym, double* tail) const {
  const Terms& T = terms_.at(m);
  const std::int64_t c = cut(m);
  double acc = 0.0;
  for (auto l : T.l) acc += conditional(l, c, sym);
  if (tail) *tail = T.tail;
  return acc;
}

StepLaw MartingaleEngine::step_law(std::int64_t m, const SymbolLookup& sym, double r_prev,
                                   std::uint64_t seed) const {
  if (m < 1 || m > blocks_) throw ConfigError("step index out of range");
  const std::int64_t c0 = cut(m - 1), c1 = cut(m);
  struct Term {
    std::int64_t l;
    bool conditional;
    std::vector<std::int64_t> touches;
  };
  std::vector<Term> terms;
  auto is_random = [&](std::int64_t p) { return p <= c1 && (c0 == kNoCut || p > c0); };
  auto add = [&](std::int64_t l, bool cond) {
    Term t{l, cond, {}};
    bool future = false;
    for (int u = 0; u < i_; ++u) {
      std::int64_t p = qf_.q[u](l);
      if (is_random(p)) t.touches.push_back(p);
      if (p > c1) future = true;
    }
    if (cond && future) t.touches.push_back(c1);
    t.conditional = cond && future;
    std::sort(t.touches.begin(), t.touches.end());
    t.touches.erase(std::unique(t.touches.begin(), t.touches.end()), t.touches.end());
    terms.push_back(std::move(t));
  };
  for (std::int64_t l = schedule_.a(m) + 1; l <= schedule_.b(m); ++l) add(l, false);
  for (auto l : terms_[m].l) add(l, true);

  StepLaw law;
  law.model_ = &model_;
  auto& P = law.positions_;
  P.push_back(c1);
  for (const auto& t : terms) P.insert(P.end(), t.touches.begin(), t.touches.end());
  std::sort(P.begin(), P.end());
  P.erase(std::unique(P.begin(), P.end()), P.end());
  const std::size_t n = P.size();
  const int S = model_.alphabet_size();

  std::vector<int> assign(n, -1);
  SymbolLookup look = [&](std::int64_t p) {
    auto it = std::lower_bound(P.begin(), P.end(), p);
    if (it != P.end() && *it == p) return assign[static_cast<std::size_t>(it - P.begin())];
    return sym(p);
  };
  auto eval = [&](const Term& t) {
    return t.conditional ? conditional(t.l, c1, look) : summand(t.l, look);
  };
  auto index_of = [&](std::int64_t p) { return static_cast<std::size_t>(std::lower_bound(P.begin(), P.end(), p) - P.begin()); };

  double base = -r_prev;
  bool separable = true;
  for (const auto& t : terms) {
    if (t.touches.empty()) base += eval(t);
    if (t.touches.size() > 1) separable = false;
  }
  const int start = c0 == kNoCut ? -1 : sym(c0);
  auto first_row = [&](int s) {
    return start < 0 ? model_.stationary_law()[s] : model_.power_entry(P[0] - c0, start, s);
  };

  std::map<std::int64_t, double> atoms;
  if (separable) {
    law.method_ = "dp";
    law.gains_.assign(n, std::vector<std::int64_t>(S, 0));
    std::vector<std::vector<const Term*>> bucket(n);
    for (const auto& t : terms)
      if (t.touches.size() == 1) bucket[index_of(t.touches[0])].push_back(&t);
    for (std::size_t k = 0; k < n; ++k) {
      if (bucket[k].empty()) continue;
      for (int s = 0; s < S; ++s) {
        assign[k] = s;
        double g = 0.0;
        for (const Term* t : bucket[k]) g += eval(*t);
        law.gains_[k][s] = to_key(g);
      }
      assign[k] = -1;
    }
    using Entry = StepLaw::Entry;
    auto order = [](const Entry& x, const Entry& y) {
      return x.symbol != y.symbol ? x.symbol < y.symbol : x.key < y.key;
    };
    law.layers_.resize(n);
    for (int s = 0; s < S; ++s) {
      double w = first_row(s);
      if (w > 0.0) law.layers_[0].push_back({s, law.gains_[0][s], w});
    }
    for (std::size_t k = 1; k < n; ++k) {
      std::vector<Entry> next;
      next.reserve(law.layers_[k - 1].size() * S);
      const std::int64_t gap = P[k] - P[k - 1];
      for (const auto& e : law.layers_[k - 1]) {
        const double* row = model_.power_row(gap, e.symbol);
        for (int s = 0; s < S; ++s)
          if (row[s] > 0.0) next.push_back({s, e.key + law.gains_[k][s], e.prob * row[s]});
      }
      std::sort(next.begin(), next.end(), order);
      std::vector<Entry> merged;
      for (const auto& e : next) {
        if (!merged.empty() && merged.back().symbol == e.symbol && merged.back().key == e.key)
          merged.back().prob += e.prob;
        else
          merged.push_back(e);
      }
      law.layers_[k] = std::move(merged);
    }
    for (const auto& e : law.layers_[n - 1]) atoms[e.key] += e.prob;
  } else if (std::pow(static_cast<double>(S), static_cast<double>(n)) <= 1e5) {
    law.method_ = "enumeration";
    std::vector<double> weight(n + 1, 1.0);
    std::vector<int> sy(n, -1);
    int depth = 0;
    while (depth >= 0) {
      if (++sy[depth] >= S) {
        sy[depth] = -1;
        --depth;
        continue;
      }
      double w = depth == 0 ? first_row(sy[0]) : model_.power_entry(P[depth] - P[depth - 1], sy[depth - 1], sy[depth]);
      weight[depth + 1] = weight[depth] * w;
      if (weight[depth + 1] == 0.0) continue;
      if (depth + 1 < static_cast<int>(n)) {
        ++depth;
        continue;
      }
      for (std::size_t k = 0; k < n; ++k) assign[k] = sy[k];
      double v = 0.0;
      for (const auto& t : terms)
        if (!t.touches.empty()) v += eval(t);
      std::int64_t key = to_key(v);
      atoms[key] += weight[n];
      law.scenarios_.push_back(sy);
      law.scenario_keys_.push_back(key);
      law.scenario_weights_.push_back(weight[n]);
    }
  } else {
    law.method_ = "empirical";
    law.exact_ = false;
    Rng rng(seed);
    const int K = 4096;
    std::vector<double> row0(S);
    for (int s = 0; s < S; ++s) row0[s] = first_row(s);
    for (int r = 0; r < K; ++r) {
      std::vector<int> sy(n);
      sy[0] = draw(row0, rng);
      for (std::size_t k = 1; k < n; ++k) {
        const double* row = model_.power_row(P[k] - P[k - 1], sy[k - 1]);
        sy[k] = draw(std::vector<double>(row, row + S), rng);
      }
      for (std::size_t k = 0; k < n; ++k) assign[k] = sy[k];
      double v = 0.0;
      for (const auto& t : terms)
        if (!t.touches.empty()) v += eval(t);
      std::int64_t key = to_key(v);
      atoms[key] += 1.0 / K;
      law.scenarios_.push_back(std::move(sy));
      law.scenario_keys_.push_back(key);
      law.scenario_weights_.push_back(1.0);
    }
  }
  double total = 0.0;
  for (const auto& [key, p] : atoms) total += p;
  for (const auto& [key, p] : atoms) {
    law.keys_.push_back(key);
    law.values_.push_back(base + static_cast<double>(key) * kQuantum);
    law.probs_.push_back(p / total);
    law.mean_ += law.values_.back() * law.probs_.back();
  }
  return law;
}

// ---- pieces ----

MartingalePieces block_sums(const Path& path, const BlockSchedule& schedule,
                            const ProcessModel& model, const Decomposition& dec,
                            const QFamily& qf, int i, std::int64_t blocks) {
  if (i < 1 || i > dec.ell()) throw ConfigError("component index out of range");
  if (blocks < 0 || blocks > schedule.capacity() - 1) throw ConfigError("block count beyond schedule");
  const bool plain = model.fully_observed();
  if (!plain && !model.markov())
    throw UnsupportedError("unsupported model kind for windowed approximants");
  const int dim = dec.dimension();
  MartingalePieces out;
  out.component = i;
  out.blocks = blocks;
  const std::int64_t lmax = std::max(schedule.a(blocks + 1), schedule.horizon());
  std::vector<double> y_plain(lmax + 1, 0.0), y_win(lmax + 1, 0.0);
  std::vector<double> args(static_cast<std::size_t>(i) * dim), tmp(dim);
  int atoms[64];
  std::int64_t j = 1;
  SymbolLookup sym = [&](std::int64_t p) { return path.symbol(p); };
  for (std::int64_t l = 1; l <= lmax; ++l) {
    bool all = true;
    for (int u = 0; u < i; ++u) {
      auto v = path.value(qf.q[u](l));
      std::copy(v.begin(), v.end(), args.begin() + static_cast<std::ptrdiff_t>(u) * dim);
      atoms[u] = dec.atom_index(v);
      all = all && atoms[u] >= 0;
    }
    y_plain[l] = all ? dec.component_atoms(i, std::span<const int>(atoms, i)) : dec.component(i, args);
    if (plain) {
      y_win[l] = y_plain[l];
      continue;
    }
    while (j + 1 <= schedule.capacity() && schedule.a(j + 1) < l) ++j;
    const std::int64_t r = schedule.r(j);
    for (int u = 0; u < i; ++u) {
      windowed_value(model, sym, qf.q[u](l), r, tmp);
      std::copy(tmp.begin(), tmp.end(), args.begin() + static_cast<std::ptrdiff_t>(u) * dim);
    }
    y_win[l] = dec.component(i, args);
  }
  out.xi.assign(lmax + 1, 0.0);
  for (std::int64_t l = 1; l <= lmax; ++l) out.xi[l] = out.xi[l - 1] + y_plain[l];
  out.V.assign(blocks + 1, 0.0);
  out.W = out.V_exact = out.W_exact = out.V;
  for (std::int64_t b = 1; b <= blocks; ++b) {
    for (std::int64_t l = schedule.a(b) + 1; l <= schedule.b(b); ++l) {
      out.V[b] += y_win[l];
      out.V_exact[b] += y_plain[l];
    }
    for (std::int64_t l = schedule.b(b) + 1; l <= schedule.a(b + 1); ++l) {
      out.W[b] += y_win[l];
      out.W_exact[b] += y_plain[l];
    }
  }
  return out;
}

void martingale_correction(MartingalePieces& pieces, const MartingaleEngine& engine,
                           const Path& path) {
  if (engine.component() != pieces.component) throw ConfigError("engine and pieces disagree on the component");
  if (pieces.blocks > engine.blocks()) throw ConfigError("engine covers fewer blocks than the pieces");
  SymbolLookup sym = [&](std::int64_t p) { return path.symbol(p); };
  const std::int64_t J = pieces.blocks;
  pieces.R.assign(J + 1, 0.0);
  pieces.R_tail.assign(J + 1, 0.0);
  pieces.M.assign(J + 1, 0.0);
  pieces.cut.assign(J + 1, kNoCut);
  pieces.max_tail = 0.0;
  for (std::int64_t m = 0; m <= J; ++m) {
    pieces.R[m] = engine.correction(m, sym, &pieces.R_tail[m]);
    pieces.cut[m] = engine.cut(m);
    pieces.max_tail = std::max(pieces.max_tail, pieces.R_tail[m]);
    if (m >= 1) pieces.M[m] = pieces.V[m] + pieces.R[m] - pieces.R[m - 1];
  }
  if (pieces.max_tail > 1e-6)
    throw BudgetError("correction series truncation bound above 1e-6");
  pieces.corrected = true;
}

ErrorDiagnostics error_report(const MartingalePieces& pieces, const BlockSchedule& schedule,
                              const std::vector<std::int64_t>& t_grid) {
  if (!pieces.corrected) throw ConfigError("error report needs corrected pieces");
  const std::int64_t J = pieces.blocks;
  std::vector<double> msum(J + 1, 0.0), wsum(J + 1, 0.0), dsum(J + 1, 0.0);
  for (std::int64_t j = 1; j <= J; ++j) {
    msum[j] = msum[j - 1] + pieces.M[j];
    wsum[j] = wsum[j - 1] + pieces.W[j];
    dsum[j] = dsum[j - 1] + (pieces.V_exact[j] - pieces.V[j]) + (pieces.W_exact[j] - pieces.W[j]);
  }
  ErrorDiagnostics d;
  for (std::int64_t t : t_grid) {
    if (t < 0 || t >= static_cast<std::int64_t>(pieces.xi.size()))
      throw ConfigError("t outside the computed sums");
    ErrorPoint p;
    p.t = t;
    p.nu = schedule.nu(t);
    if (p.nu > J) throw ConfigError("t needs more blocks than were built");
    p.xi = pieces.xi[t];
    p.martingale = msum[p.nu];
    p.total = p.xi - p.martingale;
    p.I1 = pieces.R[0] - pieces.R[p.nu];
    p.small_blocks = wsum[p.nu];
    p.I2 = p.xi - pieces.xi[schedule.a(p.nu + 1)];
    p.I3 = dsum[p.nu];
    p.residual = p.total - (p.I1 + p.small_blocks + p.I2 + p.I3);
    d.max_residual = std::max(d.max_residual, std::abs(p.residual));
    d.points.push_back(p);
  }
  return d;
}

std::vector<double> error_envelope(const MartingalePieces& pieces, const BlockSchedule& schedule,
                                   const std::vector<std::int64_t>& t_grid) {
  std::vector<std::int64_t> grid = t_grid;
  std::sort(grid.begin(), grid.end());
  std::vector<double> out;
  if (grid.empty()) return out;
  double msum = 0.0, sup = 0.0;
  std::int64_t nu = 0;
  std::size_t next = 0;
  for (std::int64_t s = 1; s <= grid.back(); ++s) {
    while (nu + 1 <= pieces.blocks && schedule.a(nu + 2) <= s + 1) msum += pieces.M[++nu];
    sup = std::max(sup, std::abs(pieces.xi[s] - msum));
    while (next < grid.size() && grid[next] == s) {
      out.push_back(sup);
      ++next;
    }
  }
  return out;
}

double telescoping_residual(const MartingalePieces& pieces) {
  double lhs = 0.0, vs = 0.0, worst = 0.0;
  for (std::int64_t n = 1; n <= pieces.blocks; ++n) {
    lhs += pieces.M[n];
    vs += pieces.V[n];
    worst = std::max(worst, std::abs(lhs - (vs + pieces.R[n] - pieces.R[0])));
  }
  return worst;
}

MdsReport martingale_difference_test(const std::vector<std::int64_t>& checkpoints,
                                     const std::vector<std::vector<MdsObservation>>& obs,
                                     std::int64_t min_count) {
  MdsReport rep;
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    const auto& o = obs.at(c);
    double s1 = 0.0, s2 = 0.0;
    for (const auto& x : o) {
      s1 += x.value;
      s2 += x.value * x.value;
    }
    const double n = static_cast<double>(o.size());
    const double sd = n > 1 ? std::sqrt(std::max(0.0, (s2 - s1 * s1 / n) / (n - 1))) : 0.0;
    std::map<std::pair<int, int>, std::pair<std::int64_t, double>> bins;
    for (const auto& x : o) {
      auto& b = bins[{x.state, x.past >= 0.0 ? 1 : -1}];
      ++b.first;
      b.second += x.value;
    }
    for (const auto& [key, b] : bins) {
      if (b.first < min_count) continue;
      MdsBin bin;
      bin.m = checkpoints[c];
      bin.state = key.first;
      bin.sign = key.second;
      bin.count = b.first;
      bin.mean = b.second / static_cast<double>(b.first);
      bin.standardized = sd > 0.0 ? std::abs(bin.mean) / sd : std::abs(bin.mean) > 1e-12 ? std::numeric_limits<double>::infinity() : 0.0;
      bin.bound = 4.0 / std::sqrt(static_cast<double>(b.first));
      bin.ok = bin.standardized <= bin.bound;
      rep.verdict = combine(rep.verdict, verdict_of(bin.ok));
      rep.bins.push_back(bin);
    }
  }
  return rep;
}

void write_csv(const ErrorDiagnostics& d, std::ostream& out) {
  out << "t,nu,xi,martingale,total,I1,small_blocks,I2,I3,residual\n";
  for (const auto& p : d.points)
    out << p.t << ',' << p.nu << ',' << fmt(p.xi) << ',' << fmt(p.martingale) << ',' << fmt(p.total)
        << ',' << fmt(p.I1) << ',' << fmt(p.small_blocks) << ',' << fmt(p.I2) << ',' << fmt(p.I3)
        << ',' << fmt(p.residual) << '\n';
}

}  // namespace ncsum
