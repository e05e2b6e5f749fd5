#include <gtest/gtest.h>

#include "ncsum/config.hpp"
#include "ncsum/harness.hpp"
#include "test_util.hpp"

using namespace ncsum;
using nlohmann::json;

namespace {

json minimal() {
  return json::parse(R"({
    "schema_version": 1,
    "model": {"kind": "iid", "states": [[1], [-1]], "probs": [0.5, 0.5]},
    "observable": {"ell": 1, "terms": [{"powers": [1]}]},
    "q_family": {"k": 1, "q": [{"type": "linear", "multiplier": 1}]}
  })");
}

}  // namespace

TEST(Config, MinimalParsesWithDefaults) {
  ExperimentConfig c = parse_config(minimal());
  EXPECT_EQ(c.ell, 1);
  EXPECT_EQ(c.horizon, 10000);
  EXPECT_EQ(c.replicates, 2000);
}

TEST(Config, RoundTripsThroughJson) {
  ExperimentConfig c = load_named("canonical");
  ExperimentConfig d = parse_config(c.to_json());
  EXPECT_EQ(c.to_json(), d.to_json());
}

TEST(Config, RejectsBadInput) {
  json j = minimal();
  j["schema_version"] = 2;
  EXPECT_THROW(parse_config(j), ConfigError);
  j = minimal();
  j.erase("model");
  EXPECT_THROW(parse_config(j), ConfigError);
  j = minimal();
  j["q_family"]["q"][0]["type"] = "exponential";
  EXPECT_THROW(parse_config(j), ConfigError);
  j = minimal();
  j["observable"]["ell"] = 2;
  EXPECT_THROW(parse_config(j), ConfigError);
  j = minimal();
  j["horizon"] = "long";
  EXPECT_THROW(parse_config(j), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, ExperimentRejectsCollidingIndices) {
  json j = minimal();
  j["observable"] = {{"ell", 2}, {"terms", {{{"powers", {1, 1}}}}}};
  j["q_family"]["q"] = {{{"type", "linear"}, {"multiplier", 1}}, {{"type", "linear"}, {"multiplier", 2}}};
  EXPECT_THROW(Experiment(parse_config(j)), ConfigError);
}

TEST(Harness, SumsAreDeterministic) {
  ExperimentConfig c = load_named("canonical");
  Experiment exp(c);
  std::vector<std::int64_t> grid = {10, 100, 500};
  SumSamples a = simulate_sums(exp, grid, 20, 1), b = simulate_sums(exp, grid, 20, 1);
  EXPECT_EQ(a.xi, b.xi);
  SumSamples other = simulate_sums(exp, grid, 20, 2);
  EXPECT_NE(a.xi, other.xi);
}
