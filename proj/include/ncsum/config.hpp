#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncsum/blocks.hpp"
#include "ncsum/nonconv.hpp"
#include "ncsum/process.hpp"

namespace ncsum {

inline constexpr int kSchemaVersion = 1;

struct Tolerances {
  double ks_alpha = 0.01;       // before Bonferroni
  double variance_rel = 0.05;   // empirical vs analytic variance
  double mean_time_rel = 0.03;  // mean embedding time vs E M^2
  double exponent = 0.5;        // CI upper bound for envelope exponents
  double time_lln = 0.05;       // |tau(t)/t - sigma^2|
  double lil_low = 0.5;
  double lil_high = 1.5;
  double lil_fraction = 0.9;
  double identity = 1e-10;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string name = "experiment";
  ModelSpec model;
  int ell = 1;
  int dimension = 1;
  std::vector<Monomial> terms;
  double K = 1.0, iota = 1.0, kappa = 1.0;
  QFamily q_family;
  BlockParams blocks;

  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware concurrency
  std::string output_dir = "out";

  std::int64_t horizon = 10000;  // N for the CLT and variance checks
  std::int64_t replicates = 2000;
  std::int64_t mixing_n = 8;
  int mixing_window = 1;
  std::int64_t mds_blocks = 1000;
  std::int64_t mds_replicates = 2000;
  std::int64_t embed_ks_replicates = 1000;
  std::vector<std::int64_t> embed_ks_steps = {100, 1000};
  std::int64_t rate_horizon = 100000;
  std::int64_t rate_replicates = 100;
  std::int64_t lil_horizon = 1000000;
  std::int64_t lil_replicates = 20;
  Tolerances tol;

  ObservableSpec observable() const;
  nlohmann::json to_json() const;
};

// Throws ConfigError on unknown schema versions, missing fields or ill-typed values.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

}  // namespace ncsum
