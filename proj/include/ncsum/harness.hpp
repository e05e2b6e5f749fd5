#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncsum/blocks.hpp"
#include "ncsum/config.hpp"
#include "ncsum/nonconv.hpp"
#include "ncsum/process.hpp"
#include "ncsum/variance.hpp"

namespace ncsum {

struct Section {
  std::string name;
  Verdict verdict = Verdict::pass;
  nlohmann::json stats = nlohmann::json::object();
  std::string note;
};

struct Report {
  std::string name;
  std::vector<Section> sections;
  std::vector<std::string> files;
  Verdict verdict() const;
  const Section* find(const std::string& name) const;
  nlohmann::json to_json() const;
  std::string summary() const;
};

// A validated experiment: model, decomposition and index family built and gated.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig config);

  const ExperimentConfig& config() const { return config_; }
  const ProcessModel& model() const { return *model_; }
  const Decomposition& decomposition() const { return *dec_; }
  const QFamily& q_family() const { return config_.q_family; }
  const QCertificate& q_certificate() const { return qcert_; }
  // Components whose F_i does not vanish.
  const std::vector<int>& components() const { return components_; }
  const VarianceResult& variance(int i) const;
  int threads() const;

 private:
  ExperimentConfig config_;
  std::unique_ptr<ProcessModel> model_;
  std::unique_ptr<Decomposition> dec_;
  QCertificate qcert_;
  std::vector<int> components_;
  mutable std::map<int, VarianceResult> variance_;
};

// Runs body(0..n-1) on up to `threads` workers; results must be written by index.
void parallel_for(std::int64_t n, int threads, const std::function<void(std::int64_t)>& body);

// Seed of replicate r in a named stream.
std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t stream, std::int64_t r);

// xi[c][r][g]: Xi_i(t_grid[g]) for component components[c] in replicate r.
struct SumSamples {
  std::vector<int> components;
  std::vector<std::int64_t> t_grid;
  std::vector<std::vector<std::vector<double>>> xi;
};
SumSamples simulate_sums(const Experiment& exp, const std::vector<std::int64_t>& t_grid,
                         std::int64_t replicates, std::uint64_t stream);

// Smallest schedule whose nu reaches the given block count at its horizon.
BlockSchedule schedule_for_blocks(const BlockParams& params, std::int64_t blocks);

Section run_validate(const Experiment& exp);
Section run_mixing(const Experiment& exp, std::ostream* csv = nullptr);
// Analytic variances and the empirical variance of N^{-1/2} Xi_i(N).
Section run_variance(const Experiment& exp, const SumSamples& samples);
Section run_clt(const Experiment& exp, const SumSamples& samples, std::ostream* csv = nullptr);
Section run_lil(const Experiment& exp, std::ostream* csv = nullptr);
// Martingale-difference bins and the telescoping identity.
Section run_blocks(const Experiment& exp, std::ostream* csv = nullptr);
// Embedded against directly simulated partial sums, and mean stopping time.
Section run_embedding(const Experiment& exp, std::ostream* csv = nullptr);
// Envelope exponents of both approximation errors and the time law of large numbers.
Section run_rates(const Experiment& exp, std::ostream* csv = nullptr);

// Every section, with artifacts written to out_dir.
Report run_full_pipeline(const Experiment& exp, const std::string& out_dir);

}  // namespace ncsum
