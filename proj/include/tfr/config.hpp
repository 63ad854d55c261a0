#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>

#include "tfr/likelihood.hpp"
#include "tfr/sampler.hpp"
#include "tfr/simulator.hpp"

namespace tfr {

// One structured config file drives every subcommand; sections are optional
// and defaulted.  See README for the schema and shipped examples.
struct FitSettings {
  std::map<std::string, std::pair<double, double>> bound_overrides;
  int n_walkers = 0;           // 0 -> 2x parameter count
  int step_cap = 50000;
  int check_every = 256;
  int grid_nodes = 1024;

  // Per-model defaults with any overrides applied.
  PriorBounds bounds_for(ModelKind kind) const;
};

struct DebiasSettings {
  double sigma_m = 0.0;
  double tol = 0.005;
  int max_iterations = 10;
};

struct RunConfig {
  std::uint64_t seed = 0;
  int threads = 0;
  std::string output_dir = ".";
  Cosmology cosmology;
  std::optional<SimConfig> simulate;
  FitSettings fit;
  DebiasSettings debias;
  SelectionSpec selection = SelectionSpec::step(5.736);

  std::string resolved_json() const;  // full config with defaults applied
};

RunConfig load_run_config(const std::string& path);

} // namespace tfr
