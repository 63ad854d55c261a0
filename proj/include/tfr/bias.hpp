#pragma once

#include <optional>
#include <string>

namespace tfr {

enum class FitModelTag { Forward, Inverse, Dual };

std::string to_string(FitModelTag tag);

struct FitSummary {
  double beta_hat = 0.0;
  double gamma_hat = 0.0;
  double beta_err = 0.0;   // 1-sigma credible half-width
  double gamma_err = 0.0;
  FitModelTag model_tag = FitModelTag::Forward;
};

struct AnchorResult {
  double logV0 = 0.0;   // unbiased anchor abscissa, dex
  double gamma0 = 0.0;  // intercept at the anchor, dex
};

// Mean shift of the observed dependent variable above a step limit:
// y(x) - <y~>_x for delta = y_l - y(x).  Always negative; safe deep in the
// censored tail via the scaled erfc form.
double malmquist_shift(double delta, double sigma_y);

// General Eddington shift of the mean dependent variable,
// -beta * sigma_x^2 * dln p/dx~.  beta = 1 reduces to the classic form.
double eddington_shift_y(double beta, double sigma_x, double dlnp_dx);

// d ln p / dw of the Schechter velocity function at projected width w
// (per-unit-w gradient used by the shift above).
double schechter_dlnp_dw(double w, double v_star, double alpha, double beta);

// Width correction reversing the Eddington bias of the inverse model:
// w~ - (ln10/beta) sigma_m^2 [(alpha+1) - 10^((m~+d)-M_star)].
double eddington_correct_w(double w_tilde, double m_tilde, double d, double sigma_m,
                           double beta, double M_star, double alpha);

// Hubble-constant bias from an intercept bias: 35 ln10 B_gamma, km/s/Mpc.
double h0_bias(double B_gamma);

// Empirical power laws linking coefficient biases to the scatter of the
// model's independent variable.  Advisory: fitted on one fiducial family of
// simulations (beta = 3.33, gamma = 10.5, step selection); treat outside
// that configuration as an order-of-magnitude guide only.
struct BiasScaling {
  double B_gamma = 0.0;
  double B_beta = 0.0;
};
BiasScaling bias_scaling_predict(double sigma, FitModelTag model_tag);

// Anchor abscissa where the forward- and inverse-fitted lines intersect;
// empty when the slopes are equal (no anchor).
std::optional<AnchorResult> unbiased_anchor(const FitSummary& fwd, const FitSummary& inv);

} // namespace tfr
