#include "tfr/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace tfr {

using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_catalog_csv(const std::string& path, const std::vector<GalaxyRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_catalog_csv: cannot open " + path);
  bool with_errors = !records.empty() && records.front().sigma_em && records.front().sigma_ew;
  out << (with_errors ? "id,cz,logW,m_app,sigma_em,sigma_ew\n" : "id,cz,logW,m_app\n");
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& r = records[k];
    out << k << ',' << format_double(r.cz) << ',' << format_double(r.w_tilde + 2.5) << ','
        << format_double(r.m_tilde);
    if (with_errors)
      out << ',' << format_double(r.sigma_em.value_or(0.0)) << ','
          << format_double(r.sigma_ew.value_or(0.0));
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_catalog_csv: write failed for " + path);
}

std::vector<GalaxyRecord> read_catalog_csv(const std::string& path, const Cosmology& cosmo) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_catalog_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_catalog_csv: empty file " + path);
  bool with_errors;
  if (line == "id,cz,logW,m_app")
    with_errors = false;
  else if (line == "id,cz,logW,m_app,sigma_em,sigma_ew")
    with_errors = true;
  else
    throw std::runtime_error("read_catalog_csv: unrecognized header in " + path + ": " + line);

  std::vector<GalaxyRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    auto next = [&]() -> std::string {
      if (!std::getline(ss, field, ','))
        throw std::runtime_error("read_catalog_csv: short row at " + path + ":" +
                                 std::to_string(line_no));
      return field;
    };
    next();  // id, positional only
    GalaxyRecord r;
    r.cz = std::stod(next());
    double logW = std::stod(next());
    r.m_tilde = std::stod(next());
    r.w_tilde = logW - 2.5;
    if (with_errors) {
      r.sigma_em = std::stod(next());
      r.sigma_ew = std::stod(next());
    }
    if (!(r.cz > 0.0))
      throw std::runtime_error("read_catalog_csv: cz must be > 0 at " + path + ":" +
                               std::to_string(line_no));
    r.d = distance_parameter(r.cz, cosmo);
    records.push_back(r);
  }
  return records;
}

namespace {

ordered_json params_to_json(const ModelParams& p) {
  return ordered_json{{"beta", p.beta},     {"gamma", p.gamma},   {"sigma_m", p.sigma_m},
                      {"sigma_w", p.sigma_w}, {"v_star", p.v_star}, {"alpha", p.alpha}};
}

} // namespace

void write_sim_sidecar_json(const std::string& path, const MockCatalog& catalog) {
  const SimConfig& c = catalog.provenance;
  ordered_json j;
  j["truth"] = params_to_json(catalog.truth);
  j["config"] = ordered_json{
      {"cz_min", c.cz_min},
      {"cz_max", c.cz_max},
      {"delta_cz", c.delta_cz},
      {"scale_a", c.scale_a},
      {"density_n", c.density_n},
      {"selection",
       ordered_json{{"kind", c.selection.kind == SelectionKind::StepInM ? "step-in-m" : "none"},
                    {"m_l", c.selection.m_l}}},
      {"seed", c.seed},
      {"sigma_cz", c.sigma_cz},
      {"cosmology",
       ordered_json{{"H0", c.cosmology.H0}, {"q0", c.cosmology.q0}, {"j0", c.cosmology.j0}}},
      {"force_edge_on", c.force_edge_on},
      {"emit_per_source_errors", c.emit_per_source_errors}};
  j["n_records"] = catalog.records.size();
  j["pre_selection_count"] = catalog.pre_selection_count;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_sim_sidecar_json: cannot open " + path);
  out << j.dump(2) << '\n';
}

void write_chain_csv(const std::string& path, const Chain& chain,
                     const std::vector<std::string>& names) {
  if (static_cast<int>(names.size()) != chain.n_params)
    throw std::invalid_argument("write_chain_csv: name count mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_chain_csv: cannot open " + path);
  for (std::size_t k = 0; k < names.size(); ++k) out << names[k] << ',';
  out << "log_post\n";
  for (const auto& row : chain.retained()) {
    for (std::size_t k = 0; k < row.size(); ++k)
      out << format_double(row[k]) << (k + 1 < row.size() ? "," : "\n");
  }
  if (!out) throw std::runtime_error("write_chain_csv: write failed for " + path);
}

void write_chain_meta_json(const std::string& path, const Chain& chain,
                           const std::vector<std::string>& names, const std::string& model) {
  ordered_json j;
  j["model"] = model;
  j["params"] = names;
  j["tau"] = chain.tau;
  j["burn"] = chain.burn;
  j["thin"] = chain.thin;
  j["n_walkers"] = chain.n_walkers;
  j["n_steps"] = chain.n_steps;
  j["acceptance_fraction"] = chain.acceptance_fraction;
  j["seed"] = chain.seed;
  j["converged"] = chain.converged;
  ordered_json b = ordered_json::array();
  for (const auto& [lo, hi] : chain.bounds.lo_hi) b.push_back(ordered_json::array({lo, hi}));
  j["bounds"] = b;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_chain_meta_json: cannot open " + path);
  out << j.dump(2) << '\n';
}

} // namespace tfr
