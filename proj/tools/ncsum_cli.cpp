#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "ncsum/config.hpp"
#include "ncsum/harness.hpp"
#include "ncsum/stats.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::int64_t> replicates;
  std::optional<std::int64_t> horizon;
  std::optional<int> threads;
};

ncsum::ExperimentConfig load(const Options& o, const std::string& command) {
  ncsum::ExperimentConfig c = ncsum::load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  if (!o.out.empty()) c.output_dir = o.out;
  if (o.replicates) {
    const std::int64_t r = *o.replicates;
    if (command == "lil") c.lil_replicates = r;
    else if (command == "blocks") c.mds_replicates = r;
    else if (command == "embed") c.embed_ks_replicates = c.rate_replicates = r;
    else c.replicates = r;
  }
  if (o.horizon) {
    const std::int64_t h = *o.horizon;
    if (command == "lil") c.lil_horizon = h;
    else if (command == "blocks") c.mds_blocks = h;
    else if (command == "embed") c.rate_horizon = h;
    else c.horizon = h;
  }
  return c;
}

// Runs the sections of one subcommand; csv artifacts go next to the report when --out is set.
ncsum::Report run_command(const std::string& command, const ncsum::Experiment& exp,
                          const std::string& out) {
  namespace fs = std::filesystem;
  if (command == "pipeline") return ncsum::run_full_pipeline(exp, out.empty() ? exp.config().output_dir : out);
  ncsum::Report rep;
  rep.name = exp.config().name + ":" + command;
  std::optional<std::ofstream> csv;
  auto sink = [&](const std::string& file) -> std::ostream* {
    if (out.empty()) return nullptr;
    fs::create_directories(out);
    rep.files.push_back(file);
    csv.emplace(fs::path(out) / file, std::ios::binary);
    return &*csv;
  };
  auto sums = [&] {
    const auto& cfg = exp.config();
    auto grid = ncsum::geometric_grid(std::min<std::int64_t>(100, cfg.horizon / 10), cfg.horizon, 12);
    return ncsum::simulate_sums(exp, grid, cfg.replicates, 1);
  };
  if (command == "validate") {
    rep.sections.push_back(ncsum::run_validate(exp));
  } else if (command == "mixing") {
    rep.sections.push_back(ncsum::run_mixing(exp, sink("mixing.csv")));
  } else if (command == "variance") {
    rep.sections.push_back(ncsum::run_variance(exp, sums()));
  } else if (command == "clt") {
    rep.sections.push_back(ncsum::run_clt(exp, sums(), sink("clt.csv")));
  } else if (command == "lil") {
    rep.sections.push_back(ncsum::run_lil(exp, sink("lil.csv")));
  } else if (command == "blocks") {
    rep.sections.push_back(ncsum::run_blocks(exp, sink("blocks_errors.csv")));
  } else if (command == "embed") {
    rep.sections.push_back(ncsum::run_embedding(exp, sink("embedding_trace.csv")));
    rep.sections.push_back(ncsum::run_rates(exp, sink("rates.csv")));
  }
  if (!out.empty()) {
    fs::create_directories(out);
    rep.files.push_back("report.json");
    std::ofstream(fs::path(out) / "report.json", std::ios::binary) << rep.to_json().dump(2) << '\n';
  }
  return rep;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonconventional sums: simulation, mixing, variance and strong approximation checks"};
  app.require_subcommand(1);
  Options opt;
  const char* commands[][2] = {
      {"validate", "check the index family, decomposition and block schedule"},
      {"mixing", "exact mixing coefficients and their orderings"},
      {"variance", "analytic limiting variances against simulation"},
      {"blocks", "martingale-difference bins and the telescoping identity"},
      {"embed", "Skorokhod embedding fidelity, error exponents and the time law"},
      {"clt", "Kolmogorov-Smirnov test of the normalized sums"},
      {"lil", "iterated-logarithm envelope of the sums"},
      {"pipeline", "every check, with all artifacts written to the output directory"},
  };
  for (auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c[0], c[1]);
    sub->add_option("--config", opt.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "master seed");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--replicates", opt.replicates, "replicate count")->check(CLI::PositiveNumber);
    sub->add_option("--horizon", opt.horizon, "horizon or block count")->check(CLI::PositiveNumber);
    sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    ncsum::Experiment exp(load(opt, command));
    ncsum::Report rep = run_command(command, exp, opt.out);
    std::cout << rep.summary();
    return rep.verdict() == ncsum::Verdict::fail ? 1 : 0;
  } catch (const ncsum::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
