#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncsum/common.hpp"
#include "ncsum/nonconv.hpp"
#include "ncsum/process.hpp"

namespace ncsum {

struct BlockParams {
  double eta = 0.04;
  double theta = 0.2;
  double tau = 0.45;
};

// floor(j^e), robust to j^e landing a rounding error below an integer.
std::int64_t floor_pow(std::int64_t j, double e);

class BlockSchedule {
 public:
  // Blocks are stored well past nu(horizon) so that series over future blocks can run on.
  BlockSchedule(BlockParams params, std::int64_t horizon);

  const BlockParams& params() const { return params_; }
  std::int64_t horizon() const { return horizon_; }
  std::int64_t capacity() const { return static_cast<std::int64_t>(a_.size()) - 2; }

  std::int64_t a(std::int64_t j) const;
  std::int64_t b(std::int64_t j) const;
  std::int64_t r(std::int64_t j) const { return floor_pow(j, params_.eta); }
  std::int64_t small(std::int64_t j) const { return floor_pow(j, params_.theta); }
  // max{j : a(j+1) <= t+1}, 0 when no block fits.
  std::int64_t nu(std::int64_t t) const;
  // (tau t / 2)^{1/(1+tau)} - 1 <= nu(t) <= 2 t^{1/(1+tau)}
  bool nu_bounds_hold(std::int64_t t) const;
  nlohmann::json to_json() const;

 private:
  BlockParams params_;
  std::int64_t horizon_;
  std::vector<std::int64_t> a_, b_;  // 1-based
};

BlockSchedule build_schedule(BlockParams params, std::int64_t horizon);

using SymbolLookup = std::function<int(std::int64_t)>;

inline constexpr std::int64_t kNoCut = std::numeric_limits<std::int64_t>::min();

// Law of one martingale increment given the past cut, with the ability to draw the random
// symbols behind a chosen value.
class StepLaw {
 public:
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& probs() const { return probs_; }
  const std::string& method() const { return method_; }
  bool exact() const { return exact_; }
  double mean() const { return mean_; }
  // Index of the atom nearest to x.
  std::size_t nearest(double x) const;
  // Symbols at the random positions, drawn from their conditional law given atom k.
  std::vector<int> sample_scenario(std::size_t k, Rng& rng) const;
  const std::vector<std::int64_t>& positions() const { return positions_; }

 private:
  friend class MartingaleEngine;
  struct Entry {
    int symbol;
    std::int64_t key;
    double prob;
  };

  std::vector<double> values_, probs_;
  std::vector<std::int64_t> keys_;  // per atom
  std::string method_;
  bool exact_ = true;
  double mean_ = 0.0;
  std::vector<std::int64_t> positions_;
  // dp
  std::vector<std::vector<Entry>> layers_;       // sorted by (symbol, key)
  std::vector<std::vector<std::int64_t>> gains_;  // per position, per symbol
  const ProcessModel* model_ = nullptr;
  // enumeration or empirical
  std::vector<std::vector<int>> scenarios_;
  std::vector<std::int64_t> scenario_keys_;
  std::vector<double> scenario_weights_;
};

// Exact conditional expectations, corrections and step laws for component i on a fully
// observed markov model.
class MartingaleEngine {
 public:
  MartingaleEngine(const ProcessModel& model, const Decomposition& dec, const QFamily& qf,
                   const BlockSchedule& schedule, int i, std::int64_t blocks);

  int component() const { return i_; }
  std::int64_t blocks() const { return blocks_; }
  const BlockSchedule& schedule() const { return schedule_; }
  const ProcessModel& model() const { return model_; }
  // c_m = q_i(b(m)) + r(m); kNoCut for m = 0.
  std::int64_t cut(std::int64_t m) const;

  std::vector<std::int64_t> value_positions() const { return needed_; }
  std::vector<std::int64_t> symbol_positions() const;

  double summand(std::int64_t l, const SymbolLookup& sym) const;
  // E(Y_i(l) | chain up to cut); symbols after the cut are integrated out.
  double conditional(std::int64_t l, std::int64_t cut, const SymbolLookup& sym) const;
  // R_i(m) and its recorded truncation bound.
  double correction(std::int64_t m, const SymbolLookup& sym, double* tail = nullptr) const;
  double correction_tail(std::int64_t m) const { return terms_.at(m).tail; }

  // Law of M_i(m) given the chain up to c_{m-1}; r_prev = R_i(m-1).
  StepLaw step_law(std::int64_t m, const SymbolLookup& sym, double r_prev,
                   std::uint64_t seed = 1) const;

 private:
  struct Terms {
    std::vector<std::int64_t> l;
    double tail = 0.0;
  };
  std::int64_t gap_of(std::int64_t l, std::int64_t cut) const;

  const ProcessModel& model_;
  const Decomposition& dec_;
  const QFamily& qf_;
  const BlockSchedule& schedule_;
  int i_;
  std::int64_t blocks_;
  double sup_;
  std::vector<int> atom_;
  std::vector<Terms> terms_;            // index m = 0..blocks
  std::vector<std::int64_t> needed_;    // sorted value positions
};

struct MartingalePieces {
  int component = 1;
  std::int64_t blocks = 0;
  std::vector<double> V, W;              // windowed summands, index j (0 unused)
  std::vector<double> V_exact, W_exact;  // plain summands
  std::vector<double> xi;                // Xi_i(l), l = 0..a(blocks+1)
  std::vector<double> R;                 // index 0..blocks
  std::vector<double> R_tail;
  std::vector<double> M;                 // index 1..blocks
  std::vector<std::int64_t> cut;
  bool corrected = false;
  double max_tail = 0.0;
};

// V, W and the plain partial sums for blocks 1..J, with the window radius r(j) applied to
// every argument of the component.
MartingalePieces block_sums(const Path& path, const BlockSchedule& schedule,
                            const ProcessModel& model, const Decomposition& dec,
                            const QFamily& qf, int i, std::int64_t blocks);

// Fills R and M. Throws BudgetError when a truncation bound exceeds 1e-6.
void martingale_correction(MartingalePieces& pieces, const MartingaleEngine& engine,
                           const Path& path);

struct ErrorPoint {
  std::int64_t t = 0;
  std::int64_t nu = 0;
  double xi = 0.0;
  double martingale = 0.0;
  double total = 0.0;
  double I1 = 0.0;           // R(0) - R(nu)
  double small_blocks = 0.0;
  double I2 = 0.0;           // Xi(t) - Xi(a(nu+1))
  double I3 = 0.0;           // plain minus windowed summands up to a(nu+1)
  double residual = 0.0;
};

struct ErrorDiagnostics {
  std::vector<ErrorPoint> points;
  double max_residual = 0.0;
};

ErrorDiagnostics error_report(const MartingalePieces& pieces, const BlockSchedule& schedule,
                              const std::vector<std::int64_t>& t_grid);

// sup_{1 <= s <= t} |Xi_i(s) - sum_{j <= nu(s)} M(j)| at each grid t.
std::vector<double> error_envelope(const MartingalePieces& pieces, const BlockSchedule& schedule,
                                   const std::vector<std::int64_t>& t_grid);

// max over n of |sum_{m<=n} M - (sum_{m<=n} V + R(n) - R(0))|
double telescoping_residual(const MartingalePieces& pieces);

struct MdsObservation {
  int state = 0;      // chain state at the previous cut
  double past = 0.0;  // sum of earlier increments
  double value = 0.0;
};

struct MdsBin {
  std::int64_t m = 0;
  int state = 0;
  int sign = 0;
  std::int64_t count = 0;
  double mean = 0.0;
  double standardized = 0.0;  // |mean| / sd(M at m)
  double bound = 0.0;         // 4 / sqrt(count)
  bool ok = true;
};

struct MdsReport {
  std::vector<MdsBin> bins;
  Verdict verdict = Verdict::pass;
};

// obs[c][r]: replicate r at checkpoint c. Bins: previous cut state x sign of the past sum.
MdsReport martingale_difference_test(const std::vector<std::int64_t>& checkpoints,
                                     const std::vector<std::vector<MdsObservation>>& obs,
                                     std::int64_t min_count = 20);

void write_csv(const ErrorDiagnostics& d, std::ostream& out);

}  // namespace ncsum
