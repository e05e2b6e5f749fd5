#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ncsum/blocks.hpp"
#include "ncsum/common.hpp"
#include "ncsum/stats.hpp"

namespace ncsum {

// Randomized two-point stopping rule for a finite mean-zero law: a pair u < 0 < v is drawn
// with weight (v - u) mu(u) mu(v), then Brownian motion runs until it leaves (u, v).
class TwoPointRule {
 public:
  TwoPointRule(std::vector<double> values, std::vector<double> probs);

  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& probs() const { return probs_; }
  double zero_mass() const { return zero_; }
  // E T = E X^2.
  double expected_time() const { return second_; }
  double fourth_moment() const { return fourth_; }
  // Pair (u, v); (0, 0) for the atom at zero.
  std::pair<double, double> sample_pair(Rng& rng) const;
  // Pair containing the realized value x, the other end drawn from its conditional law.
  std::pair<double, double> pair_for(double x, Rng& rng) const;

 private:
  std::vector<double> values_, probs_;
  std::vector<std::size_t> neg_, pos_;
  std::vector<double> neg_w_, pos_w_;  // |a| mu(a), cumulative
  double zero_ = 0.0, second_ = 0.0, fourth_ = 0.0;
};

TwoPointRule embed_distribution(const std::vector<double>& values, const std::vector<double>& probs);

// Brownian motion advanced in Gaussian steps whose variance shrinks near the barriers, with a
// Brownian-bridge crossing test inside each step. Exits land exactly on the barrier.
class BrownianMotion {
 public:
  BrownianMotion(double h, double kappa = 3.0);

  double time() const { return time_; }
  double position() const { return position_; }
  void set_position(double w) { position_ = w; }
  void set_resolution(double h) { h_ = h; }
  // Times at which the path value is recorded; forced step boundaries.
  void set_snapshots(std::vector<double> times);
  const std::vector<double>& snapshot_times() const { return snap_times_; }
  const std::vector<double>& snapshot_values() const { return snap_values_; }

  struct Exit {
    double duration = 0.0;
    int side = 0;  // -1 low, +1 high
    int attempts = 0;
    std::uint64_t accepted_seed = 0;
    std::int64_t steps = 0;
  };
  // Runs until the path leaves (lo, hi). A nonzero required side restarts the segment from
  // its start until it exits there, which samples the path conditioned on that exit.
  Exit exit(double lo, double hi, int required_side, std::uint64_t seed);
  // Exit duration of one attempt from the given start, without touching the state.
  double replay(double lo, double hi, double start_time, double start_position,
                std::uint64_t attempt_seed) const;
  // Free motion up to the given time.
  void advance_to(double t, Rng& rng);

 private:
  struct Attempt {
    double time, position;
    int side;
    std::int64_t steps;
    std::vector<double> snaps;
  };
  Attempt run(double lo, double hi, double t0, double w0, std::uint64_t seed, bool record) const;

  double h_, kappa_;
  double time_ = 0.0, position_ = 0.0;
  std::vector<double> snap_times_, snap_values_;
};

struct EmbeddingOptions {
  double h = 0.0;  // 0: 1e-4 times each step's variance
  double kappa = 3.0;
  std::vector<double> snapshot_times;
  std::int64_t replay_every = 97;
};

struct EmbeddingResult {
  std::vector<double> T;            // T[m-1]
  std::vector<double> cumulative;   // tau after step m
  std::vector<double> embedded;     // B at the m-th stop
  std::vector<double> martingale;   // partial sums of M
  std::vector<double> increments;   // M(m)
  std::vector<double> law_second;   // E(M(m)^2 | past)
  std::vector<double> law_fourth;   // E(M(m)^4 | past)
  std::vector<int> state;           // chain state at the previous cut (-1 for m = 1)
  std::vector<double> snapshot_times, snapshot_values;
  double h = 0.0;
  std::int64_t empirical_steps = 0;
  double max_offset = 0.0;       // |realized increment - embedded atom|
  double max_law_mean = 0.0;     // |E(M | past)| before recentering
  std::int64_t replays = 0;
  std::int64_t replay_mismatches = 0;
  std::int64_t bm_steps = 0;
};

// Coupled embedding of the increments M(m) realized on the path: each Brownian segment is
// conditioned to exit at the realized value.
EmbeddingResult embed_martingale(const MartingaleEngine& engine, const Path& path,
                                 const MartingalePieces& pieces, EmbeddingOptions options,
                                 std::uint64_t seed);

// The Brownian motion drives the process: each exit picks the increment, and the chain symbols
// behind it are drawn from their conditional law.
EmbeddingResult embed_generative(const MartingaleEngine& engine, EmbeddingOptions options,
                                 std::uint64_t seed);

struct TimeLln {
  std::vector<double> t;
  std::vector<double> mean_ratio;  // mean over replicates of tau(t) / t
  std::vector<double> deviation;   // |mean_ratio - sigma^2|
  ExponentFit fit;                 // envelope of |tau(t) - sigma^2 t|
  Verdict verdict = Verdict::pass;
};

TimeLln time_lln_check(const std::vector<EmbeddingResult>& runs, const BlockSchedule& schedule,
                       double sigma_sq, const std::vector<std::int64_t>& t_grid,
                       std::uint64_t seed = 1);

// sup_{1 <= s <= t} |Xi(s) - W(sigma^2 s)| at each grid t; xi[s] for s = 0..t_max and the
// embedding snapshots taken at sigma^2 s, s = 1..t_max.
std::vector<double> strong_approx_distance(const std::vector<double>& xi,
                                           const EmbeddingResult& run,
                                           const std::vector<std::int64_t>& t_grid);

void write_csv(const EmbeddingResult& run, std::ostream& out);

}  // namespace ncsum
