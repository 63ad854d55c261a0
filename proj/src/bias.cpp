#include "tfr/bias.hpp"

#include <cmath>
#include <stdexcept>

#include "tfr/constants.hpp"
#include "tfr/numerics.hpp"

namespace tfr {

std::string to_string(FitModelTag tag) {
  switch (tag) {
    case FitModelTag::Forward: return "forward";
    case FitModelTag::Inverse: return "inverse";
    case FitModelTag::Dual: return "dual";
  }
  return "unknown";
}

double malmquist_shift(double delta, double sigma_y) {
  if (!(sigma_y > 0.0)) throw std::domain_error("malmquist_shift: sigma_y must be > 0");
  // -sigma sqrt(2/pi) exp(-t^2/2)/erfc(t/sqrt(2)) = -sigma sqrt(2/pi)/erfcx(t/sqrt(2)),
  // which stays finite for any truncation depth.
  double t = delta / sigma_y;
  return -sigma_y * std::sqrt(2.0 / kPi) / erfc_scaled(t / std::sqrt(2.0));
}

double eddington_shift_y(double beta, double sigma_x, double dlnp_dx) {
  if (!(sigma_x >= 0.0)) throw std::domain_error("eddington_shift_y: sigma_x must be >= 0");
  return -beta * sigma_x * sigma_x * dlnp_dx;
}

double schechter_dlnp_dw(double w, double v_star, double alpha, double beta) {
  double x = beta * w - v_star;
  return kLn10 * beta * ((alpha + 1.0) - std::exp(kLn10 * x));
}

double eddington_correct_w(double w_tilde, double m_tilde, double d, double sigma_m,
                           double beta, double M_star, double alpha) {
  return w_tilde - kLn10 / beta * sigma_m * sigma_m *
                       ((alpha + 1.0) - std::exp(kLn10 * (m_tilde + d - M_star)));
}

double h0_bias(double B_gamma) {
  return 35.0 * kLn10 * B_gamma;
}

BiasScaling bias_scaling_predict(double sigma, FitModelTag model_tag) {
  if (!(sigma >= 0.0)) throw std::domain_error("bias_scaling_predict: sigma must be >= 0");
  BiasScaling out;
  switch (model_tag) {
    case FitModelTag::Forward: {
      double s = std::pow(sigma / 0.05, 1.8);
      out.B_gamma = -0.058 * s;
      out.B_beta = -0.246 * s;
      break;
    }
    case FitModelTag::Inverse: {
      double s = std::pow(sigma / 0.15, 1.8);
      out.B_gamma = 0.060 * s;
      out.B_beta = 0.237 * s;
      break;
    }
    case FitModelTag::Dual:
      throw std::invalid_argument("bias_scaling_predict: no scaling law for the dual model");
  }
  return out;
}

std::optional<AnchorResult> unbiased_anchor(const FitSummary& fwd, const FitSummary& inv) {
  double d_beta = inv.beta_hat - fwd.beta_hat;
  double d_gamma = inv.gamma_hat - fwd.gamma_hat;
  if (d_beta == 0.0) return std::nullopt;
  AnchorResult r;
  r.logV0 = 2.5 - d_gamma / d_beta;
  // Both fitted lines pass through the anchor by construction; average the
  // two evaluations for symmetric rounding.
  double g_fwd = fwd.gamma_hat + fwd.beta_hat * (r.logV0 - 2.5);
  double g_inv = inv.gamma_hat + inv.beta_hat * (r.logV0 - 2.5);
  r.gamma0 = 0.5 * (g_fwd + g_inv);
  return r;
}

} // namespace tfr
