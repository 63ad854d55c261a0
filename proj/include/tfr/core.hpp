#pragma once

#include <optional>
#include <string>
#include <vector>

namespace tfr {

struct Cosmology {
  double H0 = 70.0;   // Hubble constant, km/s/Mpc
  double q0 = -0.53;  // deceleration parameter
  double j0 = 1.0;    // cosmic jerk
};

// One observed galaxy.  m_tilde is log10 apparent baryonic mass, w_tilde is
// log10 velocity width minus 2.5, d = 2 log10(D_L/Mpc) derived from cz.
struct GalaxyRecord {
  double cz = 0.0;       // km/s
  double m_tilde = 0.0;  // dex
  double w_tilde = 0.0;  // dex
  double d = 0.0;        // dex, recomputable from cz
  std::optional<double> sigma_em;  // per-source mass error, dex
  std::optional<double> sigma_ew;  // per-source width error, dex
};

// Inferred parameter vector; model kinds activate subsets.
// sigma_m / sigma_w hold intrinsic dispersions when per-source errors are
// present, totals otherwise (the two combine in quadrature at likelihood
// time).
struct ModelParams {
  double beta = 0.0;     // TFR slope
  double gamma = 0.0;    // intercept at log V0 = 2.5, dex
  double sigma_m = 0.0;  // mass dispersion, dex
  double sigma_w = 0.0;  // width dispersion, dex
  double v_star = 0.0;   // characteristic velocity parameter (= M_star - gamma)
  double alpha = 0.0;    // Schechter faint-end slope

  double m_star() const { return v_star + gamma; }
};

enum class SelectionKind { StepInM, None };

struct SelectionSpec {
  SelectionKind kind = SelectionKind::StepInM;
  double m_l = 0.0;  // standard log-mass limit, dex (step case)

  // Records exactly at the limit are kept (closed selection set).
  bool passes(double m_tilde) const {
    return kind == SelectionKind::None || m_tilde >= m_l;
  }
  static SelectionSpec none() { return {SelectionKind::None, 0.0}; }
  static SelectionSpec step(double m_l) { return {SelectionKind::StepInM, m_l}; }
};

struct RawPhotometry {
  double S21 = 0.0;          // integrated 21-cm flux, Jy km/s
  double m_lambda = 0.0;     // apparent magnitude
  double M_sun_lambda = 0.0; // solar absolute magnitude in band
  double ML = 1.0;           // mass-to-light ratio, solar units
  double Kg = 1.33;          // HI-to-gas factor
};

// Second-order Taylor expansion of the luminosity distance, valid for
// z < 0.1.  Rejects cz <= 0; warns once on stderr for z >= 0.1.
double luminosity_distance(double cz, const Cosmology& cosmo);

// d = 2 log10 D_L(cz).
double distance_parameter(double cz, const Cosmology& cosmo);

struct Shorthands {
  double d = 0.0;  // 2 log10 D_L
  double w = 0.0;  // log10 W - 2.5
  double i = 0.0;  // log10 sin(inc), always <= 0
};

// inc in degrees, (0, 90].
Shorthands to_shorthands(double D_L, double W, double inc_deg);

// Linear apparent baryonic mass (gas + stellar term).
double apparent_baryonic_mass(const RawPhotometry& phot);

// m + d = beta*(w - i) + gamma, anchored at log V0 = 2.5.
double tfr_predict(double w_minus_i, const ModelParams& params);
double tfr_invert(double m_plus_d, const ModelParams& params);

// Schechter pdfs truncated to the fixed support (see constants.hpp); the
// normalization phi_star is computed by quadrature so each integrates to one
// over its support.  The velocity and mass forms are related by
// d(m+d) = beta d(w-i).
double schechter_mass_pdf(double m_plus_d, double M_star, double alpha);
double schechter_velocity_pdf(double w_minus_i, double v_star, double alpha, double beta);

// 1 / integral of 10^((alpha+1)x) exp(-10^x) over the support.
double schechter_phi_star(double alpha, double support_lo, double support_hi);
double schechter_phi_star(double alpha);

} // namespace tfr
