#pragma once

#include <string>
#include <vector>

#include "tfr/core.hpp"
#include "tfr/sampler.hpp"
#include "tfr/simulator.hpp"

namespace tfr {

// Catalog CSV, bit-exact contract: header `id,cz,logW,m_app[,sigma_em,sigma_ew]`,
// doubles encoded with 17 significant digits.  logW = w~ + 2.5; d is never
// stored and is recomputed from cz at load.
void write_catalog_csv(const std::string& path, const std::vector<GalaxyRecord>& records);
std::vector<GalaxyRecord> read_catalog_csv(const std::string& path, const Cosmology& cosmo);

// Sidecar JSON with the generating SimConfig and truth.
void write_sim_sidecar_json(const std::string& path, const MockCatalog& catalog);

// Chain CSV: one row per retained flattened sample (parameters + log_post),
// plus a JSON sidecar with tau, burn, thin, acceptance, seed and bounds.
void write_chain_csv(const std::string& path, const Chain& chain,
                     const std::vector<std::string>& names);
void write_chain_meta_json(const std::string& path, const Chain& chain,
                           const std::vector<std::string>& names, const std::string& model);

std::string format_double(double v);  // 17 significant digits

} // namespace tfr
