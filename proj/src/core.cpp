#include "tfr/core.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "tfr/constants.hpp"
#include "tfr/numerics.hpp"

namespace tfr {

double luminosity_distance(double cz, const Cosmology& cosmo) {
  if (!(cz > 0.0)) throw std::domain_error("luminosity_distance: cz must be > 0");
  if (!(cosmo.H0 > 0.0)) throw std::domain_error("luminosity_distance: H0 must be > 0");
  double z = cz / kSpeedOfLight;
  if (z >= 0.1) {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true))
      std::fprintf(stderr,
                   "warning: luminosity_distance called with z = %.4f >= 0.1; "
                   "the second-order expansion degrades beyond this range\n", z);
  }
  double q0 = cosmo.q0, j0 = cosmo.j0;
  return cz / cosmo.H0 *
         (1.0 + 0.5 * (1.0 - q0) * z - (1.0 - q0 - 3.0 * q0 * q0 + j0) * z * z / 6.0);
}

double distance_parameter(double cz, const Cosmology& cosmo) {
  return 2.0 * std::log10(luminosity_distance(cz, cosmo));
}

Shorthands to_shorthands(double D_L, double W, double inc_deg) {
  if (!(D_L > 0.0)) throw std::domain_error("to_shorthands: D_L must be > 0");
  if (!(W > 0.0)) throw std::domain_error("to_shorthands: W must be > 0");
  if (!(inc_deg > 0.0) || inc_deg > 90.0)
    throw std::domain_error("to_shorthands: inc must be in (0, 90] degrees");
  Shorthands s;
  s.d = 2.0 * std::log10(D_L);
  s.w = std::log10(W) - 2.5;
  s.i = std::log10(std::sin(inc_deg * kPi / 180.0));
  if (s.i > 0.0) s.i = 0.0;  // inc = 90 exactly
  return s;
}

double apparent_baryonic_mass(const RawPhotometry& phot) {
  if (!(phot.S21 >= 0.0)) throw std::domain_error("apparent_baryonic_mass: S21 must be >= 0");
  if (!(phot.ML > 0.0)) throw std::domain_error("apparent_baryonic_mass: M/L must be > 0");
  if (!(phot.Kg >= 1.0)) throw std::domain_error("apparent_baryonic_mass: Kg must be >= 1");
  double gas = 2.356e5 * phot.Kg * phot.S21;
  double stellar = std::pow(10.0, -0.4 * (phot.m_lambda - phot.M_sun_lambda - 25.0)) * phot.ML;
  return gas + stellar;
}

double tfr_predict(double w_minus_i, const ModelParams& params) {
  return params.beta * w_minus_i + params.gamma;
}

double tfr_invert(double m_plus_d, const ModelParams& params) {
  if (params.beta == 0.0) throw std::domain_error("tfr_invert: beta must be nonzero");
  return (m_plus_d - params.gamma) / params.beta;
}

namespace {

// integral of 10^((alpha+1)x) exp(-10^x) dx over [lo, hi], split so the
// exponential cutoff near the top is resolved.
double schechter_norm_integral(double alpha, double lo, double hi) {
  const GaussRule& rule = gauss_rule_16();
  double edges_rel[] = {0.0, 0.35, 0.6, 0.75, 0.85, 0.91, 0.95, 0.975, 0.99, 1.0};
  double c1 = (alpha + 1.0) * kLn10;
  double total = 0.0;
  int n_seg = static_cast<int>(sizeof(edges_rel) / sizeof(double)) - 1;
  for (int s = 0; s < n_seg; ++s) {
    double a = lo + (hi - lo) * edges_rel[s];
    double b = lo + (hi - lo) * edges_rel[s + 1];
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double acc = 0.0;
    for (int q = 0; q < rule.n; ++q) {
      double x = mid + half * rule.nodes[q];
      acc += rule.weights[q] * std::exp(c1 * x - std::exp(kLn10 * x));
    }
    total += acc * half;
  }
  return total;
}

} // namespace

double schechter_phi_star(double alpha, double support_lo, double support_hi) {
  if (!(support_lo < support_hi))
    throw std::invalid_argument("schechter_phi_star: empty or inverted support");
  return 1.0 / schechter_norm_integral(alpha, support_lo, support_hi);
}

double schechter_phi_star(double alpha) {
  // The normalization depends only on alpha; cache the last value since
  // sampling and normalization checks hit the same parameters repeatedly.
  thread_local double cached_alpha = std::numeric_limits<double>::quiet_NaN();
  thread_local double cached_phi = 0.0;
  if (alpha != cached_alpha) {
    cached_phi = schechter_phi_star(alpha, kSchechterSupportLo, kSchechterSupportHi);
    cached_alpha = alpha;
  }
  return cached_phi;
}

double schechter_mass_pdf(double m_plus_d, double M_star, double alpha) {
  double x = m_plus_d - M_star;
  if (x <= kSchechterSupportLo || x >= kSchechterSupportHi) return 0.0;
  double c1 = (alpha + 1.0) * kLn10;
  return schechter_phi_star(alpha) * std::exp(c1 * x - std::exp(kLn10 * x));
}

double schechter_velocity_pdf(double w_minus_i, double v_star, double alpha, double beta) {
  if (!(beta > 0.0)) throw std::domain_error("schechter_velocity_pdf: beta must be > 0");
  double x = beta * w_minus_i - v_star;
  if (x <= kSchechterSupportLo || x >= kSchechterSupportHi) return 0.0;
  double c1 = (alpha + 1.0) * kLn10;
  return beta * schechter_phi_star(alpha) * std::exp(c1 * x - std::exp(kLn10 * x));
}

} // namespace tfr
