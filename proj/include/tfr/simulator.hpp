#pragma once

#include <cstdint>
#include <vector>

#include "tfr/core.hpp"
#include "tfr/rng.hpp"

namespace tfr {

// Recipe for a mock flux-limited catalog.  Galaxies are generated on a grid
// of redshift cells; all galaxies in a cell share the cell-center redshift
// and distance.  Velocity noise on redshifts (sigma_cz) is out of scope and
// must be zero.
struct SimConfig {
  ModelParams params;        // truth
  double cz_min = 4000.0;    // km/s
  double cz_max = 18000.0;   // km/s
  double delta_cz = 100.0;   // redshift grid interval, km/s
  double scale_a = 1e-6;     // sampling scale factor
  double density_n = -1.0;   // power-law index of integrated volume density
  SelectionSpec selection = SelectionSpec::step(5.736);
  std::uint64_t seed = 0;
  double sigma_cz = 0.0;     // out-of-scope guard, must stay 0
  Cosmology cosmology;

  bool force_edge_on = false;          // test hook: pin every inclination to 90 deg
  bool emit_per_source_errors = false; // write constant per-source error columns
};

struct MockCatalog {
  std::vector<GalaxyRecord> records;
  ModelParams truth;
  SimConfig provenance;
  std::size_t pre_selection_count = 0;
};

// cos(inc) uniform on (0,1); returns i = log10 sqrt(1 - cos^2).
std::vector<double> sample_inclinations(std::size_t n, PhiloxStream& rng);

// Inverse-transform sampling of the truncated Schechter velocity function.
// The CDF of x = beta*v - v_star is tabulated once and inverted with
// monotone (piecewise-linear) interpolation.
class SchechterVelocitySampler {
 public:
  SchechterVelocitySampler(double v_star, double alpha, double beta);
  double sample(double u01) const;  // edge-on velocity v, dex
  // Tabulated CDF of x at the table nodes; exposed so tests can use the
  // same table as the KS oracle.
  double cdf_of_x(double x) const;

 private:
  double v_star_, beta_;
  double x_lo_, dx_;
  std::vector<double> cdf_;
};

std::vector<double> sample_schechter_velocities(std::size_t n, double v_star, double alpha,
                                                double beta, PhiloxStream& rng);

MockCatalog simulate(const SimConfig& config);

// One pilot pass plus a linear rescale of scale_a to hit a target survivor
// count; the returned value feeds a final deterministic simulate() call.
double tune_scale_a(const SimConfig& config, std::size_t target_survivors);

} // namespace tfr
