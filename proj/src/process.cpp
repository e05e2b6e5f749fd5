#include "ncsum/process.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>

#include "ncsum/stats.hpp"

namespace ncsum {

namespace {

constexpr int kGaussLookahead = 40;
constexpr int kDoublingBits = 53;
constexpr double kRowTol = 1e-12;

int sample_categorical(const double* probs, int n, Rng& rng) {
  double u = uniform_open(rng);
  double c = 0.0;
  for (int s = 0; s < n; ++s) {
    c += probs[s];
    if (u < c) return s;
  }
  for (int s = n - 1; s >= 0; --s)
    if (probs[s] > 0.0) return s;
  return n - 1;
}

// Positive entries of P^k for every k large enough: irreducible and aperiodic.
bool primitive(const Eigen::MatrixXd& P) {
  const int n = static_cast<int>(P.rows());
  Eigen::MatrixXi A = (P.array() > 0.0).cast<int>();
  Eigen::MatrixXi M = A;
  long bound = static_cast<long>(n - 1) * (n - 1) + 1;
  for (long k = 1; k < bound; ++k) {
    M = ((M * A).array() > 0).cast<int>();
  }
  return (M.array() > 0).all();
}

// Sequential exact sampler for Gauss map digits under the Gauss measure. The density of
// T^n x given the first n digits is proportional to 1/((1+a y)(1+b y)) on [0,1].
struct GaussDigitSampler {
  double a = 1.0, b = 0.0;

  long long next(Rng& rng) {
    double u = uniform_open(rng);
    double hi = std::max(a, b), lo = std::min(a, b);
    double diff = hi - lo;
    double y;
    if (diff <= 0.0) {
      y = u / (1.0 + lo - u * lo);
    } else {
      double c = std::log1p(diff / (1.0 + lo));
      double em = std::expm1(u * c);
      y = em / (diff - em * lo);
    }
    double inv = 1.0 / y;
    long long d;
    if (!(inv < 4.0e18)) {
      d = 4000000000000000000LL;
    } else {
      d = static_cast<long long>(std::floor(inv));
      if (d < 1) d = 1;
    }
    a = 1.0 / (static_cast<double>(d) + a);
    b = 1.0 / (static_cast<double>(d) + b);
    return d;
  }
};

double continued_fraction(const std::int64_t* digits, int count) {
  double v = 0.0;
  for (int j = count - 1; j >= 0; --j) v = 1.0 / (static_cast<double>(digits[j]) + v);
  return v;
}

}  // namespace

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::iid: return "iid";
    case ModelKind::markov_chain: return "markov_chain";
    case ModelKind::smeared_markov: return "smeared_markov";
    case ModelKind::doubling_map: return "doubling_map";
    case ModelKind::gauss_map: return "gauss_map";
  }
  return "?";
}

ModelKind model_kind_from_string(std::string_view s) {
  if (s == "iid") return ModelKind::iid;
  if (s == "markov_chain") return ModelKind::markov_chain;
  if (s == "smeared_markov") return ModelKind::smeared_markov;
  if (s == "doubling_map") return ModelKind::doubling_map;
  if (s == "gauss_map") return ModelKind::gauss_map;
  throw ConfigError("unknown model kind '" + std::string(s) + "'");
}

double MomentTable::at(double th) const {
  for (std::size_t i = 0; i < theta.size(); ++i)
    if (theta[i] == th) return gamma[i];
  throw Error("moment order not tabulated");
}

ProcessModel::ProcessModel(const ModelSpec& spec) : spec_(spec) {
  if (spec_.id.empty()) spec_.id = std::string(to_string(spec_.kind));
  switch (spec_.kind) {
    case ModelKind::iid:
    case ModelKind::markov_chain:
    case ModelKind::smeared_markov:
      build_markov();
      break;
    case ModelKind::doubling_map: {
      alphabet_ = 2;
      dim_ = 1;
      P_ = Eigen::MatrixXd::Constant(2, 2, 0.5);
      pi_ = Eigen::VectorXd::Constant(2, 0.5);
      values_ = {0.0, 1.0};
      if (spec_.observation == Observation::orbit) {
        weights_.resize(kDoublingBits);
        for (int j = 0; j < kDoublingBits; ++j) weights_[j] = std::ldexp(1.0, -j - 1);
      } else {
        weights_ = {1.0};
      }
      build_powers();
      break;
    }
    case ModelKind::gauss_map: {
      if (spec_.digits < 1) throw ConfigError("gauss_map needs digits >= 1");
      gauss_ = std::make_shared<GaussTransfer>(spec_.digits);
      alphabet_ = spec_.digits + 1;
      dim_ = 1;
      pi_.resize(alphabet_);
      values_.resize(alphabet_);
      for (int s = 0; s < alphabet_; ++s) {
        pi_[s] = gauss_->symbol_probability(s);
        values_[s] = s + 1.0;
      }
      weights_ = {1.0};
      break;
    }
  }
  // Symbols carrying identical observable values share one marginal atom.
  atom_of_symbol_.assign(alphabet_, -1);
  std::vector<int> first;
  for (int s = 0; s < alphabet_; ++s) {
    for (std::size_t a = 0; a < first.size(); ++a) {
      if (std::equal(values_.begin() + s * dim_, values_.begin() + (s + 1) * dim_,
                     values_.begin() + first[a] * dim_)) {
        atom_of_symbol_[s] = static_cast<int>(a);
        break;
      }
    }
    if (atom_of_symbol_[s] < 0) {
      atom_of_symbol_[s] = static_cast<int>(first.size());
      first.push_back(s);
    }
  }
}

void ProcessModel::build_markov() {
  const auto& states = spec_.states;
  if (states.size() < 2) throw ConfigError("finite-kind models need at least 2 states");
  dim_ = static_cast<int>(states[0].size());
  if (dim_ < 1) throw ConfigError("state vectors must be nonempty");
  for (const auto& s : states)
    if (static_cast<int>(s.size()) != dim_) throw ConfigError("state vectors differ in dimension");
  alphabet_ = static_cast<int>(states.size());
  values_.clear();
  for (const auto& s : states) values_.insert(values_.end(), s.begin(), s.end());

  P_.resize(alphabet_, alphabet_);
  if (spec_.kind == ModelKind::iid) {
    if (static_cast<int>(spec_.probs.size()) != alphabet_)
      throw ConfigError("iid probs must match the number of states");
    double sum = 0.0;
    for (double p : spec_.probs) {
      if (p < 0.0) throw ConfigError("negative probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowTol) throw ConfigError("probabilities: row sum != 1");
    for (int i = 0; i < alphabet_; ++i)
      for (int j = 0; j < alphabet_; ++j) P_(i, j) = spec_.probs[j];
    pi_ = Eigen::Map<const Eigen::VectorXd>(spec_.probs.data(), alphabet_);
  } else {
    if (static_cast<int>(spec_.transition.size()) != alphabet_)
      throw ConfigError("transition matrix must be square over the states");
    for (int i = 0; i < alphabet_; ++i) {
      const auto& row = spec_.transition[i];
      if (static_cast<int>(row.size()) != alphabet_)
        throw ConfigError("transition matrix must be square over the states");
      double sum = 0.0;
      for (int j = 0; j < alphabet_; ++j) {
        if (row[j] < 0.0) throw ConfigError("negative transition probability");
        P_(i, j) = row[j];
        sum += row[j];
      }
      if (std::abs(sum - 1.0) > kRowTol)
        throw ConfigError("transition row " + std::to_string(i) + ": row sum != 1");
    }
    if (!primitive(P_))
      throw ConfigError("reducible or periodic chain: stationary law not unique");
    // Solve pi (I - P) = 0 with sum(pi) = 1, then polish by power iteration.
    Eigen::MatrixXd A = (Eigen::MatrixXd::Identity(alphabet_, alphabet_) - P_).transpose();
    A.row(alphabet_ - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(alphabet_);
    rhs[alphabet_ - 1] = 1.0;
    pi_ = A.fullPivLu().solve(rhs);
    for (int it = 0; it < 1000; ++it) {
      Eigen::VectorXd next = P_.transpose() * pi_;
      next /= next.sum();
      double res = (next - pi_).cwiseAbs().sum();
      pi_ = next;
      if (res < 1e-15) break;
    }
    double res = (P_.transpose() * pi_ - pi_).cwiseAbs().sum();
    if (res > 1e-12) throw ConfigError("stationary law did not converge");
    pi_ = pi_.cwiseMax(0.0);
    pi_ /= pi_.sum();
  }

  if (spec_.kind == ModelKind::smeared_markov) {
    weights_ = spec_.smear_weights;
    if (weights_.empty()) {
      if (spec_.smear_length < 1) throw ConfigError("smear_length must be >= 1");
      weights_.resize(spec_.smear_length);
      for (int j = 0; j < spec_.smear_length; ++j) weights_[j] = std::ldexp(1.0, -j - 1);
    }
  } else {
    weights_ = {1.0};
  }
  build_powers();
}

void ProcessModel::build_powers() {
  const int S = alphabet_;
  const std::int64_t cap = std::max<std::int64_t>(64, std::min<std::int64_t>(1 << 16, (1 << 23) / (S * S)));
  Eigen::MatrixXd Pi = Eigen::VectorXd::Ones(S) * pi_.transpose();
  auto push = [&](const Eigen::MatrixXd& M) {
    for (int i = 0; i < S; ++i)
      for (int j = 0; j < S; ++j) powers_.push_back(M(i, j));
  };
  // P^g - Pi = (P - Pi)^g, so the deviation is propagated directly and decays without a
  // rounding floor.
  const Eigen::MatrixXd Q = P_ - Pi;
  Eigen::MatrixXd D = Eigen::MatrixXd::Identity(S, S) - Pi;
  powers_.clear();
  l1_.clear();
  std::int64_t g = 0;
  while (true) {
    double dev = D.cwiseAbs().maxCoeff();
    if (g >= 1 && dev <= 1e-16) break;
    if (g >= cap) throw ConfigError("chain mixes too slowly for exact window algebra");
    Eigen::MatrixXd M = g == 0 ? Eigen::MatrixXd::Identity(S, S) : Eigen::MatrixXd(Pi + D);
    push(M);
    double l1 = 0.0;
    for (int i = 0; i < S; ++i) l1 = std::max(l1, D.row(i).cwiseAbs().sum());
    l1_.push_back(l1);
    D = D * Q;
    ++g;
  }
  converged_ = g;
  // Beyond convergence: sum_{g >= G} 2 dbar(g) <= 2 s dbar(G) / (1 - dbar(s)), dbar
  // submultiplicative, s the first gap with dbar(s) < 1.
  double dbar_s = 0.0;
  std::int64_t s = 1;
  for (; s < converged_; ++s) {
    double worst = 0.0;
    for (int i = 0; i < S; ++i)
      for (int j = 0; j < S; ++j) {
        double tv = 0.0;
        for (int k = 0; k < S; ++k)
          tv += std::abs(powers_[(s * S + i) * S + k] - powers_[(s * S + j) * S + k]);
        worst = std::max(worst, 0.5 * tv);
      }
    if (worst < 1.0) {
      dbar_s = worst;
      break;
    }
  }
  if (s >= converged_) {
    s = 1;
    dbar_s = 0.0;
  }
  tail_after_ = 2.0 * static_cast<double>(s) * (0.5 * S * 1e-16) / (1.0 - dbar_s);
  l1_suffix_.assign(l1_.size() + 1, tail_after_);
  for (std::int64_t k = static_cast<std::int64_t>(l1_.size()) - 1; k >= 0; --k)
    l1_suffix_[k] = l1_suffix_[k + 1] + l1_[k];
}

bool ProcessModel::fully_observed() const {
  if (spec_.kind == ModelKind::gauss_map) return spec_.observation == Observation::digit;
  return weights_.size() == 1 && weights_[0] == 1.0;
}

int ProcessModel::lookahead() const {
  if (spec_.kind == ModelKind::gauss_map)
    return spec_.observation == Observation::digit ? 1 : 0;
  return static_cast<int>(weights_.size());
}

const Eigen::MatrixXd& ProcessModel::transition() const {
  if (!markov()) throw UnsupportedError("gauss_map quotient is not a Markov chain");
  return P_;
}

std::span<const double> ProcessModel::symbol_value(int s) const {
  if (spec_.kind == ModelKind::gauss_map && spec_.observation == Observation::orbit)
    throw UnsupportedError("gauss_map orbit values are not functions of a single symbol");
  return {values_.data() + static_cast<std::size_t>(s) * dim_, static_cast<std::size_t>(dim_)};
}

const double* ProcessModel::power_row(std::int64_t gap, int s) const {
  if (!markov()) throw UnsupportedError("transition powers need a Markov model");
  if (gap < converged_) return powers_.data() + (gap * alphabet_ + s) * alphabet_;
  return pi_.data();
}

double ProcessModel::l1_distance(std::int64_t gap) const {
  if (gap < 0) gap = 0;
  if (gap < static_cast<std::int64_t>(l1_.size())) return l1_[gap];
  return 0.0;
}

double ProcessModel::l1_tail(std::int64_t gap) const {
  if (gap < 0) gap = 0;
  if (gap < static_cast<std::int64_t>(l1_suffix_.size())) return l1_suffix_[gap];
  return tail_after_;
}

int ProcessModel::quotient_symbol(std::int64_t raw) const {
  if (gauss_) return gauss_->symbol_of_digit(raw);
  return static_cast<int>(raw);
}

void ProcessModel::value_from_window(std::span<const int> window, std::span<double> out) const {
  for (int d = 0; d < dim_; ++d) out[d] = 0.0;
  for (std::size_t j = 0; j < weights_.size(); ++j) {
    auto v = symbol_value(window[j]);
    for (int d = 0; d < dim_; ++d) out[d] += weights_[j] * v[d];
  }
}

Marginal ProcessModel::marginal() const {
  Marginal m;
  m.dimension = dim_;
  auto quadrature = [&](auto density, const char* method) {
    std::vector<double> x, w;
    gauss_legendre(48, x, w);
    for (std::size_t i = 0; i < x.size(); ++i) {
      m.points.push_back(x[i]);
      m.weights.push_back(w[i] * density(x[i]));
    }
    m.exact = false;
    m.method = method;
  };
  if (spec_.kind == ModelKind::gauss_map && spec_.observation == Observation::orbit) {
    quadrature([](double x) { return 1.0 / ((1.0 + x) * std::numbers::ln2); },
               "gauss_legendre_48");
    return m;
  }
  if (spec_.kind == ModelKind::doubling_map && spec_.observation == Observation::orbit) {
    quadrature([](double) { return 1.0; }, "gauss_legendre_48");
    return m;
  }
  m.method = "exact_atoms";
  if (lookahead() == 1) {
    int atoms = 0;
    for (int s = 0; s < alphabet_; ++s) atoms = std::max(atoms, atom_of_symbol_[s] + 1);
    m.points.assign(static_cast<std::size_t>(atoms) * dim_, 0.0);
    m.weights.assign(atoms, 0.0);
    for (int s = 0; s < alphabet_; ++s) {
      int a = atom_of_symbol_[s];
      m.weights[a] += pi_[s];
      auto v = symbol_value(s);
      std::copy(v.begin(), v.end(), m.points.begin() + static_cast<std::ptrdiff_t>(a) * dim_);
    }
    return m;
  }
  // Smeared: enumerate windows of length L under the stationary chain.
  const int L = lookahead();
  double count = std::pow(static_cast<double>(alphabet_), L);
  if (count > (1 << 20)) throw BudgetError("marginal enumeration exceeds budget");
  std::map<std::vector<double>, double> atoms;
  std::vector<int> window(L, 0);
  std::vector<double> v(dim_);
  while (true) {
    double p = pi_[window[0]];
    for (int j = 1; j < L && p > 0.0; ++j) p *= P_(window[j - 1], window[j]);
    if (p > 0.0) {
      value_from_window(window, v);
      atoms[v] += p;
    }
    int j = L - 1;
    while (j >= 0 && ++window[j] == alphabet_) window[j--] = 0;
    if (j < 0) break;
  }
  for (const auto& [val, p] : atoms) {
    m.points.insert(m.points.end(), val.begin(), val.end());
    m.weights.push_back(p);
  }
  return m;
}

ProcessModel build_process(const ModelSpec& spec) { return ProcessModel(spec); }

Trajectory sample_path(const ProcessModel& model, std::int64_t length, std::uint64_t seed) {
  if (length < 1) throw ConfigError("trajectory length must be >= 1");
  Trajectory t;
  t.model_id = model.id();
  t.seed = seed;
  t.dimension = model.dimension();
  Rng rng(seed);
  const int dim = model.dimension();
  t.values.assign(static_cast<std::size_t>(length + 1) * dim, 0.0);

  if (model.kind() == ModelKind::gauss_map) {
    const std::int64_t total = length + kGaussLookahead;
    t.symbols.resize(total + 1);
    GaussDigitSampler sampler;
    for (auto& d : t.symbols) d = sampler.next(rng);
    const bool digit = model.spec().observation == Observation::digit;
    const double cap = model.spec().digits + 1.0;
    for (std::int64_t n = 0; n <= length; ++n) {
      t.values[n] = digit ? std::min(static_cast<double>(t.symbols[n]), cap)
                          : continued_fraction(&t.symbols[n], kGaussLookahead);
    }
    return t;
  }

  const int S = model.alphabet_size();
  const int L = model.lookahead();
  const std::int64_t total = length + L - 1;
  t.symbols.resize(total + 1);
  std::vector<int> q(total + 1);
  q[0] = sample_categorical(model.stationary_law().data(), S, rng);
  for (std::int64_t n = 1; n <= total; ++n)
    q[n] = sample_categorical(model.power_row(1, q[n - 1]), S, rng);
  for (std::int64_t n = 0; n <= total; ++n) t.symbols[n] = q[n];
  for (std::int64_t n = 0; n <= length; ++n)
    model.value_from_window(std::span<const int>(q.data() + n, L),
                            std::span<double>(t.values.data() + n * dim, dim));
  return t;
}

namespace {

constexpr char kMagic[4] = {'N', 'C', 'S', 'P'};

template <class T>
void put_le(std::ostream& out, T v) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw Error("truncated trajectory file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

}  // namespace

void write_binary(const Trajectory& path, std::ostream& out) {
  out.write(kMagic, 4);
  put_le<std::uint16_t>(out, 1);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(path.dimension));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(path.length() + 1));
  for (double v : path.values) put_le<double>(out, v);
}

Trajectory read_binary(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw Error("not a trajectory file");
  auto version = get_le<std::uint16_t>(in);
  if (version != 1) throw Error("unsupported trajectory file version");
  Trajectory t;
  t.dimension = get_le<std::uint16_t>(in);
  auto points = get_le<std::uint64_t>(in);
  t.values.resize(points * t.dimension);
  for (double& v : t.values) v = get_le<double>(in);
  return t;
}

Path Path::from_trajectory(const ProcessModel& model, const Trajectory& t) {
  Path p;
  p.dim_ = t.dimension;
  p.dense_ = true;
  p.syms_.resize(t.symbols.size());
  for (std::size_t i = 0; i < t.symbols.size(); ++i) p.syms_[i] = model.quotient_symbol(t.symbols[i]);
  p.vals_ = t.values;
  return p;
}

std::ptrdiff_t Path::symbol_index(std::int64_t pos) const {
  if (dense_) return pos >= 0 && pos < static_cast<std::int64_t>(syms_.size()) ? pos : -1;
  auto it = std::lower_bound(sym_pos_.begin(), sym_pos_.end(), pos);
  if (it == sym_pos_.end() || *it != pos) return -1;
  return it - sym_pos_.begin();
}

std::ptrdiff_t Path::value_index(std::int64_t pos) const {
  if (dense_)
    return pos >= 0 && pos < static_cast<std::int64_t>(vals_.size()) / dim_ ? pos : -1;
  auto it = std::lower_bound(val_pos_.begin(), val_pos_.end(), pos);
  if (it == val_pos_.end() || *it != pos) return -1;
  return it - val_pos_.begin();
}

bool Path::has_symbol(std::int64_t pos) const { return symbol_index(pos) >= 0; }
bool Path::has_value(std::int64_t pos) const { return value_index(pos) >= 0; }

int Path::symbol(std::int64_t pos) const {
  auto i = symbol_index(pos);
  if (i < 0) throw Error("path has no symbol at position " + std::to_string(pos));
  return syms_[i];
}

std::span<const double> Path::value(std::int64_t pos) const {
  auto i = value_index(pos);
  if (i < 0) throw Error("path has no value at position " + std::to_string(pos));
  return {vals_.data() + i * dim_, static_cast<std::size_t>(dim_)};
}

std::int64_t Path::last_symbol_position() const {
  if (dense_) return static_cast<std::int64_t>(syms_.size()) - 1;
  return sym_pos_.empty() ? -1 : sym_pos_.back();
}

std::int64_t Path::last_value_position() const {
  if (dense_) return static_cast<std::int64_t>(vals_.size()) / dim_ - 1;
  return val_pos_.empty() ? -1 : val_pos_.back();
}

Path sample_sparse(const ProcessModel& model, std::vector<std::int64_t> value_positions,
                   std::vector<std::int64_t> symbol_positions, std::uint64_t seed) {
  std::sort(value_positions.begin(), value_positions.end());
  value_positions.erase(std::unique(value_positions.begin(), value_positions.end()),
                        value_positions.end());
  if (!value_positions.empty() && value_positions.front() < 0)
    throw ConfigError("negative path position");
  if (!model.markov()) {
    std::int64_t hi = 1;
    if (!value_positions.empty()) hi = std::max(hi, value_positions.back());
    for (auto p : symbol_positions) hi = std::max(hi, p);
    if (hi > 50'000'000) throw BudgetError("gauss_map paths are simulated densely; horizon too large");
    return Path::from_trajectory(model, sample_path(model, hi, seed));
  }
  const int L = model.lookahead();
  const int S = model.alphabet_size();
  const int dim = model.dimension();
  for (auto v : value_positions)
    for (int j = 0; j < L; ++j) symbol_positions.push_back(v + j);
  std::sort(symbol_positions.begin(), symbol_positions.end());
  symbol_positions.erase(std::unique(symbol_positions.begin(), symbol_positions.end()),
                         symbol_positions.end());
  Path p;
  p.dim_ = dim;
  p.sym_pos_ = std::move(symbol_positions);
  p.syms_.resize(p.sym_pos_.size());
  Rng rng(seed);
  for (std::size_t i = 0; i < p.sym_pos_.size(); ++i) {
    if (i == 0) {
      p.syms_[i] = sample_categorical(model.stationary_law().data(), S, rng);
    } else {
      std::int64_t gap = p.sym_pos_[i] - p.sym_pos_[i - 1];
      p.syms_[i] = sample_categorical(model.power_row(gap, p.syms_[i - 1]), S, rng);
    }
  }
  p.val_pos_ = std::move(value_positions);
  p.vals_.resize(p.val_pos_.size() * dim);
  std::vector<int> window(L);
  std::size_t cursor = 0;
  for (std::size_t k = 0; k < p.val_pos_.size(); ++k) {
    std::int64_t v = p.val_pos_[k];
    while (p.sym_pos_[cursor] < v) ++cursor;
    for (int j = 0; j < L; ++j) window[j] = p.syms_[cursor + j];
    model.value_from_window(window, std::span<double>(p.vals_.data() + k * dim, dim));
  }
  return p;
}

Eigen::MatrixXd symbol_pair_law(const ProcessModel& model, std::int64_t lag) {
  if (lag < 0) throw ConfigError("lag must be >= 0");
  const int S = model.alphabet_size();
  const auto& pi = model.stationary_law();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(S, S);
  if (lag == 0) {
    for (int s = 0; s < S; ++s) J(s, s) = pi[s];
    return J;
  }
  if (model.markov()) {
    for (int a = 0; a < S; ++a) {
      const double* row = model.power_row(lag, a);
      for (int b = 0; b < S; ++b) J(a, b) = pi[a] * row[b];
    }
    return J;
  }
  const GaussTransfer& gt = *model.gauss();
  for (int a = 0; a < S; ++a) {
    auto g = gt.apply(gt.invariant_density(), a);
    for (std::int64_t k = 1; k < lag; ++k) g = gt.apply(g, -1);
    for (int b = 0; b < S; ++b) J(a, b) = gt.integrate(gt.apply(g, b));
  }
  return J;
}

Eigen::MatrixXd pair_distribution(const ProcessModel& model, std::int64_t lag) {
  if (!model.fully_observed())
    throw UnsupportedError("unsupported: use empirical pair law");
  return symbol_pair_law(model, lag);
}

std::vector<double> conditional_expectation(const ProcessModel& model, const Trajectory& path,
                                            std::int64_t m, std::int64_t r) {
  if (r < 0 || m < 0) throw ConfigError("window center and radius must be nonnegative");
  const std::int64_t hi = m + r;
  std::vector<double> out(model.dimension());
  if (model.markov()) {
    const std::int64_t need = m + std::min<std::int64_t>(r, model.lookahead() - 1);
    if (need >= static_cast<std::int64_t>(path.symbols.size()))
      throw ConfigError("window extends past the trajectory");
    windowed_value(model, [&](std::int64_t pos) { return model.quotient_symbol(path.symbols[pos]); },
                   m, r, out);
    return out;
  }
  if (hi >= static_cast<std::int64_t>(path.symbols.size()))
    throw ConfigError("window extends past the trajectory");
  if (model.spec().observation == Observation::digit) {
    out[0] = path.value(m)[0];
    return out;
  }
  // Gauss orbit: digits in [lo, m+r] are known, earlier ones are integrated out.
  const std::int64_t lo = std::max<std::int64_t>(0, m - r);
  double a = 1.0, b = 0.0;
  for (std::int64_t n = lo; n <= hi; ++n) {
    double d = static_cast<double>(path.symbols[n]);
    a = 1.0 / (d + a);
    b = 1.0 / (d + b);
  }
  std::vector<double> x, w;
  gauss_legendre(24, x, w);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double z = x[i];
    double dens = w[i] / ((1.0 + a * z) * (1.0 + b * z));
    double y = z;
    for (std::int64_t n = hi; n >= m; --n) y = 1.0 / (static_cast<double>(path.symbols[n]) + y);
    num += dens * y;
    den += dens;
  }
  out[0] = num / den;
  return out;
}

MomentTable compute_moments(const ProcessModel& model, const std::vector<double>& thetas) {
  Marginal m = model.marginal();
  MomentTable t;
  t.exact = m.exact;
  for (double th : thetas) {
    if (!(th > 0.0)) throw ConfigError("moment order must be positive");
    double acc = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      auto p = m.point(i);
      double norm = 0.0;
      for (double v : p) norm += v * v;
      norm = std::sqrt(norm);
      if (std::isinf(th)) {
        if (m.weights[i] > 0.0) acc = std::max(acc, norm);
      } else {
        acc += m.weights[i] * std::pow(norm, th);
      }
    }
    t.theta.push_back(th);
    t.gamma.push_back(std::isinf(th) ? acc : std::pow(acc, 1.0 / th));
  }
  return t;
}

}  // namespace ncsum
