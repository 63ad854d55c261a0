#include "tfr/debias.hpp"

#include <cmath>
#include <cstdio>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "tfr/likelihood.hpp"

namespace tfr {

std::pair<FitSummary, MomentShiftState> moment_shift_fit(
    const std::vector<GalaxyRecord>& catalog, double sigma_m_user,
    const MomentShiftInputs& inputs, const InverseFitter& fit_inverse,
    const MomentShiftOptions& opts) {
  if (!(sigma_m_user >= 0.0))
    throw std::invalid_argument("moment_shift_fit: sigma_m must be >= 0");
  if (inputs.sigma_m_upper > 0.0 && sigma_m_user > inputs.sigma_m_upper)
    std::fprintf(stderr,
                 "warning: sigma_m = %.4g exceeds the forward-model estimate %.4g; "
                 "expect over-correction\n", sigma_m_user, inputs.sigma_m_upper);

  MomentShiftState st;
  st.beta_j = inputs.inverse_fit.beta_hat;
  st.gamma_j = inputs.inverse_fit.gamma_hat;
  st.v_star = inputs.v_star;
  st.alpha = inputs.alpha;
  st.sigma_m_user = sigma_m_user;
  st.history.emplace_back(st.beta_j, st.gamma_j);

  st.corrected_widths.resize(catalog.size());
  for (std::size_t k = 0; k < catalog.size(); ++k)
    st.corrected_widths[k] = catalog[k].w_tilde;

  if (sigma_m_user == 0.0) {
    // The correction is identically zero, so iteration 1 would just re-fit
    // the unchanged widths.
    st.converged = true;
    return {inputs.inverse_fit, st};
  }

  FitSummary fit = inputs.inverse_fit;
  std::vector<GalaxyRecord> work = catalog;
  double prev_d_beta = 0.0;
  int alternations = 0;

  for (int j = 1; j <= opts.max_iterations; ++j) {
    double M_star = st.v_star + st.gamma_j;
    for (std::size_t k = 0; k < catalog.size(); ++k) {
      const auto& r = catalog[k];
      st.corrected_widths[k] = eddington_correct_w(r.w_tilde, r.m_tilde, r.d, sigma_m_user,
                                                   st.beta_j, M_star, st.alpha);
      work[k].w_tilde = st.corrected_widths[k];
    }
    fit = fit_inverse(work);
    double d_beta = fit.beta_hat - st.beta_j;
    double d_gamma = fit.gamma_hat - st.gamma_j;
    st.iteration = j;
    st.beta_j = fit.beta_hat;
    st.gamma_j = fit.gamma_hat;
    st.history.emplace_back(st.beta_j, st.gamma_j);

    if (j > 1 && d_beta * prev_d_beta < 0.0 && std::fabs(d_beta) >= std::fabs(prev_d_beta)) {
      if (++alternations >= 2) {
        std::ostringstream os;
        os << "oscillation detected at iteration " << j << ": d_beta history "
           << prev_d_beta << " -> " << d_beta << " (sign-alternating, non-decreasing)";
        st.oscillating = true;
        st.diagnostics = os.str();
        return {fit, st};
      }
    } else if (j > 1) {
      alternations = 0;
    }
    prev_d_beta = d_beta;

    if (std::max(std::fabs(d_beta), fit.beta_hat * std::fabs(d_gamma)) < opts.tol) {
      st.converged = true;
      break;
    }
  }
  if (!st.converged && st.diagnostics.empty())
    st.diagnostics = "iteration cap reached before the stop tolerance";
  return {fit, st};
}

InverseFitter make_mcmc_inverse_fitter(InverseRefitConfig cfg) {
  auto warm = std::make_shared<std::vector<std::vector<double>>>();
  return [cfg, warm](const std::vector<GalaxyRecord>& records) -> FitSummary {
    auto ctx = LikelihoodContext::build(records, cfg.selection, ModelKind::Inverse, 1024,
                                        cfg.threads);
    auto logpost = [&ctx](std::span<const double> theta) {
      return log_likelihood(ctx, unpack_params(ModelKind::Inverse, theta));
    };
    EnsembleOptions opts = cfg.ensemble;
    if (!warm->empty()) opts.init = *warm;
    Chain chain = ensemble_run(logpost, cfg.bounds, opts);
    *warm = chain.final_positions();

    auto s = summarize(chain, /*allow_nonconverged=*/true);
    FitSummary out;
    out.model_tag = FitModelTag::Inverse;
    out.beta_hat = s[0].p50;
    out.gamma_hat = s[1].p50;
    out.beta_err = 0.5 * (s[0].p84 - s[0].p16);
    out.gamma_err = 0.5 * (s[1].p84 - s[1].p16);
    return out;
  };
}

} // namespace tfr
