#include "ncsum/config.hpp"

#include <fstream>

namespace ncsum {

namespace {

using nlohmann::json;

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

template <class T>
T require(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("config is missing '") + key + "'");
  return get_or<T>(j, key, T{});
}

ModelSpec parse_model(const json& j) {
  ModelSpec m;
  m.kind = model_kind_from_string(require<std::string>(j, "kind"));
  m.id = get_or<std::string>(j, "id", std::string(to_string(m.kind)));
  m.states = get_or(j, "states", m.states);
  m.probs = get_or(j, "probs", m.probs);
  m.transition = get_or(j, "transition", m.transition);
  m.smear_weights = get_or(j, "smear_weights", m.smear_weights);
  m.smear_length = get_or(j, "smear_length", m.smear_length);
  std::string obs = get_or<std::string>(j, "observation", "orbit");
  if (obs == "orbit") m.observation = Observation::orbit;
  else if (obs == "digit") m.observation = Observation::digit;
  else throw ConfigError("unknown observation '" + obs + "'");
  m.digits = get_or(j, "digits", m.digits);
  return m;
}

json model_json(const ModelSpec& m) {
  json j = {{"kind", to_string(m.kind)}, {"id", m.id}};
  if (!m.states.empty()) j["states"] = m.states;
  if (!m.probs.empty()) j["probs"] = m.probs;
  if (!m.transition.empty()) j["transition"] = m.transition;
  if (m.kind == ModelKind::smeared_markov) {
    j["smear_weights"] = m.smear_weights;
    j["smear_length"] = m.smear_length;
  }
  if (m.kind == ModelKind::doubling_map || m.kind == ModelKind::gauss_map) {
    j["observation"] = m.observation == Observation::orbit ? "orbit" : "digit";
    j["digits"] = m.digits;
  }
  return j;
}

IndexFunction parse_index(const json& j) {
  const std::string type = require<std::string>(j, "type");
  if (type == "linear") return IndexFunction::linear(require<std::int64_t>(j, "multiplier"));
  if (type == "polynomial")
    return IndexFunction::polynomial(require<std::vector<std::int64_t>>(j, "coefficients"));
  if (type == "table") return IndexFunction::tabulated(require<std::vector<std::int64_t>>(j, "values"));
  throw ConfigError("unknown index function type '" + type + "'");
}

}  // namespace

ObservableSpec ExperimentConfig::observable() const {
  ObservableSpec s = ObservableSpec::polynomial(ell, dimension, terms);
  s.K = K;
  s.iota = iota;
  s.kappa = kappa;
  return s;
}

json ExperimentConfig::to_json() const {
  json terms_j = json::array();
  for (const auto& t : terms) terms_j.push_back({{"coefficient", t.coefficient}, {"powers", t.powers}});
  json q = json::array();
  for (const auto& f : q_family.q) q.push_back(f.to_json());
  return {
      {"schema_version", schema_version},
      {"name", name},
      {"model", model_json(model)},
      {"observable",
       {{"ell", ell}, {"dimension", dimension}, {"terms", terms_j}, {"K", K}, {"iota", iota}, {"kappa", kappa}}},
      {"q_family", {{"k", q_family.k}, {"q", q}, {"growth_delta", q_family.growth_delta}}},
      {"blocks", {{"eta", blocks.eta}, {"theta", blocks.theta}, {"tau", blocks.tau}}},
      {"seed", seed},
      {"output_dir", output_dir},
      {"horizon", horizon},
      {"replicates", replicates},
      {"mixing", {{"n_max", mixing_n}, {"window", mixing_window}}},
      {"martingale", {{"blocks", mds_blocks}, {"replicates", mds_replicates}}},
      {"embedding",
       {{"ks_replicates", embed_ks_replicates}, {"ks_steps", embed_ks_steps},
        {"rate_horizon", rate_horizon}, {"rate_replicates", rate_replicates}}},
      {"lil", {{"horizon", lil_horizon}, {"replicates", lil_replicates}}},
      {"tolerances",
       {{"ks_alpha", tol.ks_alpha}, {"variance_rel", tol.variance_rel},
        {"mean_time_rel", tol.mean_time_rel}, {"exponent", tol.exponent},
        {"time_lln", tol.time_lln}, {"lil_low", tol.lil_low}, {"lil_high", tol.lil_high},
        {"lil_fraction", tol.lil_fraction}, {"identity", tol.identity}}},
  };
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  c.schema_version = require<int>(j, "schema_version");
  if (c.schema_version != kSchemaVersion)
    throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version));
  c.name = get_or(j, "name", c.name);
  c.model = parse_model(require<json>(j, "model"));

  const json obs = require<json>(j, "observable");
  c.ell = require<int>(obs, "ell");
  c.dimension = get_or(obs, "dimension", 1);
  for (const auto& t : require<json>(obs, "terms")) {
    Monomial m;
    m.coefficient = get_or(t, "coefficient", 1.0);
    m.powers = require<std::vector<int>>(t, "powers");
    c.terms.push_back(std::move(m));
  }
  c.K = get_or(obs, "K", c.K);
  c.iota = get_or(obs, "iota", c.iota);
  c.kappa = get_or(obs, "kappa", c.kappa);

  const json qj = require<json>(j, "q_family");
  c.q_family.k = require<int>(qj, "k");
  c.q_family.growth_delta = get_or(qj, "growth_delta", c.q_family.growth_delta);
  for (const auto& f : require<json>(qj, "q")) c.q_family.q.push_back(parse_index(f));
  if (c.q_family.ell() != c.ell) throw ConfigError("q family size differs from ell");

  if (j.contains("blocks")) {
    const json& b = j.at("blocks");
    c.blocks.eta = get_or(b, "eta", c.blocks.eta);
    c.blocks.theta = get_or(b, "theta", c.blocks.theta);
    c.blocks.tau = get_or(b, "tau", c.blocks.tau);
  }
  c.seed = get_or(j, "seed", c.seed);
  c.threads = get_or(j, "threads", c.threads);
  c.output_dir = get_or(j, "output_dir", c.output_dir);
  c.horizon = get_or(j, "horizon", c.horizon);
  c.replicates = get_or(j, "replicates", c.replicates);
  if (j.contains("mixing")) {
    c.mixing_n = get_or(j.at("mixing"), "n_max", c.mixing_n);
    c.mixing_window = get_or(j.at("mixing"), "window", c.mixing_window);
  }
  if (j.contains("martingale")) {
    c.mds_blocks = get_or(j.at("martingale"), "blocks", c.mds_blocks);
    c.mds_replicates = get_or(j.at("martingale"), "replicates", c.mds_replicates);
  }
  if (j.contains("embedding")) {
    const json& e = j.at("embedding");
    c.embed_ks_replicates = get_or(e, "ks_replicates", c.embed_ks_replicates);
    c.embed_ks_steps = get_or(e, "ks_steps", c.embed_ks_steps);
    c.rate_horizon = get_or(e, "rate_horizon", c.rate_horizon);
    c.rate_replicates = get_or(e, "rate_replicates", c.rate_replicates);
  }
  if (j.contains("lil")) {
    c.lil_horizon = get_or(j.at("lil"), "horizon", c.lil_horizon);
    c.lil_replicates = get_or(j.at("lil"), "replicates", c.lil_replicates);
  }
  if (j.contains("tolerances")) {
    const json& t = j.at("tolerances");
    Tolerances& o = c.tol;
    o.ks_alpha = get_or(t, "ks_alpha", o.ks_alpha);
    o.variance_rel = get_or(t, "variance_rel", o.variance_rel);
    o.mean_time_rel = get_or(t, "mean_time_rel", o.mean_time_rel);
    o.exponent = get_or(t, "exponent", o.exponent);
    o.time_lln = get_or(t, "time_lln", o.time_lln);
    o.lil_low = get_or(t, "lil_low", o.lil_low);
    o.lil_high = get_or(t, "lil_high", o.lil_high);
    o.lil_fraction = get_or(t, "lil_fraction", o.lil_fraction);
    o.identity = get_or(t, "identity", o.identity);
  }
  if (c.horizon < 10 || c.replicates < 1 || c.mds_blocks < 1 || c.rate_horizon < 10 ||
      c.lil_horizon < 10 || c.mixing_n < 1)
    throw ConfigError("horizons and replicate counts must be positive");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

}  // namespace ncsum
