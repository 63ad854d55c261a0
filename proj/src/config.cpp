#include "tfr/config.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace tfr {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

ModelParams parse_params(const json& j) {
  ModelParams p;
  p.beta = j.at("beta").get<double>();
  p.gamma = j.at("gamma").get<double>();
  p.sigma_m = j.value("sigma_m", 0.0);
  p.sigma_w = j.value("sigma_w", 0.0);
  p.v_star = j.value("v_star", 0.0);
  p.alpha = j.value("alpha", 0.0);
  return p;
}

SelectionSpec parse_selection(const json& j) {
  std::string kind = j.value("kind", "step-in-m");
  if (kind == "none") return SelectionSpec::none();
  if (kind != "step-in-m")
    throw std::runtime_error("config: unknown selection kind '" + kind +
                             "' (expected step-in-m or none)");
  if (!j.contains("m_l")) throw std::runtime_error("config: step selection needs m_l");
  return SelectionSpec::step(j.at("m_l").get<double>());
}

Cosmology parse_cosmology(const json& j) {
  Cosmology c;
  c.H0 = j.value("H0", 70.0);
  c.q0 = j.value("q0", -0.53);
  c.j0 = j.value("j0", 1.0);
  if (!(c.H0 > 0.0)) throw std::runtime_error("config: H0 must be > 0");
  return c;
}

} // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("config: parse error in " + path + ": " + e.what());
  }

  RunConfig cfg;
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.threads = j.value("threads", 0);
  cfg.output_dir = j.value("output_dir", ".");
  if (j.contains("cosmology")) cfg.cosmology = parse_cosmology(j["cosmology"]);
  if (j.contains("selection")) cfg.selection = parse_selection(j["selection"]);

  if (j.contains("simulate")) {
    const json& s = j["simulate"];
    SimConfig sim;
    sim.params = parse_params(s.at("truth"));
    sim.cz_min = s.value("cz_min", 4000.0);
    sim.cz_max = s.value("cz_max", 18000.0);
    sim.delta_cz = s.value("delta_cz", 100.0);
    sim.scale_a = s.value("scale_a", 1e-6);
    sim.density_n = s.value("density_n", -1.0);
    sim.selection = s.contains("selection") ? parse_selection(s["selection"]) : cfg.selection;
    sim.seed = s.value("seed", cfg.seed);
    sim.sigma_cz = s.value("sigma_cz", 0.0);
    sim.cosmology = cfg.cosmology;
    sim.force_edge_on = s.value("force_edge_on", false);
    sim.emit_per_source_errors = s.value("emit_per_source_errors", false);
    cfg.simulate = sim;
  }

  if (j.contains("fit")) {
    const json& f = j["fit"];
    cfg.fit.n_walkers = f.value("n_walkers", 0);
    cfg.fit.step_cap = f.value("step_cap", 50000);
    cfg.fit.check_every = f.value("check_every", 256);
    cfg.fit.grid_nodes = f.value("grid_nodes", 1024);
    if (f.contains("bounds")) {
      // map of name -> [lo, hi]; applied on top of the per-model defaults
      for (const auto& [name, arr] : f["bounds"].items()) {
        if (!arr.is_array() || arr.size() != 2)
          throw std::runtime_error("config: bounds." + name + " must be [lo, hi]");
        cfg.fit.bound_overrides[name] = {arr[0].get<double>(), arr[1].get<double>()};
      }
    }
  }

  if (j.contains("debias")) {
    const json& d = j["debias"];
    cfg.debias.sigma_m = d.value("sigma_m", 0.0);
    cfg.debias.tol = d.value("tol", 0.005);
    cfg.debias.max_iterations = d.value("max_iterations", 10);
  }
  return cfg;
}

PriorBounds FitSettings::bounds_for(ModelKind kind) const {
  PriorBounds b = PriorBounds::defaults_for(kind);
  auto names = param_names(kind);
  for (const auto& [name, lo_hi] : bound_overrides) {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) continue;  // override for a parameter this model does not fit
    b.lo_hi[static_cast<std::size_t>(it - names.begin())] = lo_hi;
  }
  b.validate();
  return b;
}

std::string RunConfig::resolved_json() const {
  ordered_json j;
  j["seed"] = seed;
  j["threads"] = threads;
  j["output_dir"] = output_dir;
  j["cosmology"] = ordered_json{{"H0", cosmology.H0}, {"q0", cosmology.q0}, {"j0", cosmology.j0}};
  j["selection"] =
      ordered_json{{"kind", selection.kind == SelectionKind::StepInM ? "step-in-m" : "none"},
                   {"m_l", selection.m_l}};
  if (simulate) {
    const SimConfig& s = *simulate;
    j["simulate"] = ordered_json{
        {"truth",
         ordered_json{{"beta", s.params.beta},
                      {"gamma", s.params.gamma},
                      {"sigma_m", s.params.sigma_m},
                      {"sigma_w", s.params.sigma_w},
                      {"v_star", s.params.v_star},
                      {"alpha", s.params.alpha}}},
        {"cz_min", s.cz_min},
        {"cz_max", s.cz_max},
        {"delta_cz", s.delta_cz},
        {"scale_a", s.scale_a},
        {"density_n", s.density_n},
        {"selection",
         ordered_json{{"kind", s.selection.kind == SelectionKind::StepInM ? "step-in-m" : "none"},
                      {"m_l", s.selection.m_l}}},
        {"seed", s.seed},
        {"sigma_cz", s.sigma_cz},
        {"force_edge_on", s.force_edge_on},
        {"emit_per_source_errors", s.emit_per_source_errors}};
  }
  j["fit"] = ordered_json{{"n_walkers", fit.n_walkers},
                          {"step_cap", fit.step_cap},
                          {"check_every", fit.check_every},
                          {"grid_nodes", fit.grid_nodes}};
  j["debias"] = ordered_json{{"sigma_m", debias.sigma_m},
                             {"tol", debias.tol},
                             {"max_iterations", debias.max_iterations}};
  return j.dump(2);
}

} // namespace tfr
