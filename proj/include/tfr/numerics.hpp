#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tfr {

// Batched exponential.  Same contract as std::exp for finite doubles with
// |x| <= 708; arguments below -745 flush to zero, above +709 saturate to
// +inf.  Accuracy ~2 ulp.  The loop body is branchless so the compiler can
// vectorize it.
void vexp(const double* x, double* out, std::size_t n);
double fast_exp(double x);

// Scaled complementary error function exp(x^2) * erfc(x).
// Relative accuracy better than 1e-14 on [-6, 30]; overflows to +inf for
// x < -26.6 where 2*exp(x^2) is not representable.
double erfc_scaled(double x);

// Gauss-Legendre nodes/weights on [-1, 1].
struct GaussRule {
  const double* nodes;
  const double* weights;
  int n;
};
const GaussRule& gauss_rule_8();
const GaussRule& gauss_rule_12();
const GaussRule& gauss_rule_16();

// Linear convolution of two uniformly sampled functions via FFT.
// Returns samples of (f*g)(w) = integral f(i) g(w-i) di, i.e. spacing times
// the discrete full convolution, length f.size()+g.size()-1.  Inputs are
// zero-padded internally to the next power of two, so the convolution is
// linear, not circular.
std::vector<double> fft_convolve(std::span<const double> f,
                                 std::span<const double> g,
                                 double f_spacing, double g_spacing);
inline std::vector<double> fft_convolve(std::span<const double> f,
                                        std::span<const double> g,
                                        double spacing) {
  return fft_convolve(f, g, spacing, spacing);
}

// In-place complex FFT, radix-2, size must be a power of two.
// re/im hold the real and imaginary parts; inverse=true applies the 1/n
// scaled inverse transform.
void fft_pow2(double* re, double* im, std::size_t n, bool inverse);

// Quadrature/FFT grid layout shared by the likelihood module.
//
// The inclination axis carries n_i midpoint nodes on [i_min, 0); the node at
// the singular endpoint i = 0 is never sampled, and the prior is represented
// by exact per-cell masses so the integrable 1/sqrt singularity costs no
// accuracy.  The width axis uses the same spacing.
struct GridSpec {
  int n_i = 1024;        // inclination nodes, power of two
  double i_min = 0.0;    // lower inclination cutoff, dex (negative)
  double w_lo = 0.0;     // width-axis extent, dex
  double w_hi = 0.0;
  double spacing = 0.0;  // uniform, shared by the i and w axes

  std::vector<double> i_nodes;   // cell midpoints
  std::vector<double> i_masses;  // exact prior mass per cell
  // First and second prior moments about the cell midpoint.  Convolving with
  // (G, G', G''/2) against (mass, m1, m2) integrates the prior measure
  // exactly through second order, which matters in the cell carrying the
  // integrable 1/sqrt edge at i = 0.
  std::vector<double> i_m1;
  std::vector<double> i_m2;
};

struct CatalogSummary {
  double w_min = 0.0;
  double w_max = 0.0;
  std::size_t n_records = 0;
};

// Default lower inclination cutoff: inc_min = 1 degree.  The truncated prior
// mass P(inc < 1 deg) ~ 1.5e-4 is folded into normalization tolerances.
double default_i_min();

GridSpec build_grids(const CatalogSummary& summary, double max_sigma_w,
                     int n_nodes = 1024);

// Inclination prior in i = log10 sin(inc) for isotropic orientations.
double inclination_prior_pdf(double i);
// P(I <= i) = 1 - sqrt(1 - 10^(2i)).
double inclination_prior_cdf(double i);
// Exact prior mass of the cell [a, b], b <= 0.
double inclination_cell_mass(double a, double b);

// u = cos(inc) parameterization of the prior: u is uniform on (0, 1) and
// i(u) = 0.5*log10(1 - u^2).  The map is tabulated on [0, u(-1)] for cheap
// Hermite interpolation inside quadrature loops; u_of_i inverts it.
double u_of_i(double i);
double i_of_u(double u);          // exact (log1p based)
double i_of_u_interp(double u);   // tabulated, |error| < 1e-12, u in [0, u_of_i(-1)]

} // namespace tfr
