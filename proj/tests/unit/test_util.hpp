#pragma once

#include <string>

#include "ncsum/config.hpp"
#include "ncsum/process.hpp"

inline ncsum::ModelSpec flip_chain(double flip) {
  ncsum::ModelSpec m;
  m.kind = ncsum::ModelKind::markov_chain;
  m.id = "flip";
  m.states = {{1.0}, {-1.0}};
  m.transition = {{1.0 - flip, flip}, {flip, 1.0 - flip}};
  return m;
}

inline ncsum::ModelSpec rademacher() {
  ncsum::ModelSpec m;
  m.kind = ncsum::ModelKind::iid;
  m.id = "rademacher";
  m.states = {{1.0}, {-1.0}};
  m.probs = {0.5, 0.5};
  return m;
}

inline ncsum::ExperimentConfig load_named(const std::string& name) {
  return ncsum::load_config(std::string(NCSUM_CONFIG_DIR) + "/" + name + ".json");
}
