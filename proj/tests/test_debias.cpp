#include <doctest.h>

#include <cmath>
#include <vector>

#include "tfr/debias.hpp"

using namespace tfr;

namespace {

std::vector<GalaxyRecord> toy_catalog(std::size_t n) {
  std::vector<GalaxyRecord> recs(n);
  for (std::size_t k = 0; k < n; ++k) {
    recs[k].cz = 5000.0 + 10.0 * static_cast<double>(k);
    recs[k].m_tilde = 6.0 + 0.001 * static_cast<double>(k);
    recs[k].w_tilde = -0.2 + 0.002 * static_cast<double>(k);
    recs[k].d = 3.7;
  }
  return recs;
}

MomentShiftInputs fiducial_inputs() {
  MomentShiftInputs in;
  in.inverse_fit = {3.593, 10.554, 0.03, 0.005, FitModelTag::Inverse};
  in.v_star = 0.25;
  in.alpha = -1.2;
  in.sigma_m_upper = 0.21;
  return in;
}

} // namespace

TEST_SUITE("debias") {

TEST_CASE("sigma_m = 0 returns the plain inverse fit immediately") {
  auto recs = toy_catalog(32);
  auto inputs = fiducial_inputs();
  int calls = 0;
  auto fitter = [&](const std::vector<GalaxyRecord>&) -> FitSummary {
    ++calls;
    return {3.0, 10.0, 0.01, 0.01, FitModelTag::Inverse};
  };
  auto [fit, state] = moment_shift_fit(recs, 0.0, inputs, fitter);
  CHECK(calls == 0);
  CHECK(state.converged);
  CHECK(state.iteration == 0);
  CHECK(state.history.size() == 1);
  CHECK(fit.beta_hat == inputs.inverse_fit.beta_hat);
  CHECK(fit.gamma_hat == inputs.inverse_fit.gamma_hat);
  for (std::size_t k = 0; k < recs.size(); ++k)
    CHECK(state.corrected_widths[k] == recs[k].w_tilde);
}

TEST_CASE("iteration applies the width correction and converges on a contraction") {
  auto recs = toy_catalog(16);
  auto inputs = fiducial_inputs();
  // synthetic fitter relaxing geometrically toward a fixed point
  const double beta_star = 3.35, gamma_star = 10.51;
  auto fitter = [&](const std::vector<GalaxyRecord>& cat) -> FitSummary {
    double mean_shift = 0.0;
    for (std::size_t k = 0; k < cat.size(); ++k)
      mean_shift += cat[k].w_tilde - recs[k].w_tilde;
    mean_shift /= static_cast<double>(cat.size());
    // widths were corrected upward; pull the estimates toward the target
    FitSummary s;
    s.model_tag = FitModelTag::Inverse;
    s.beta_hat = beta_star + 0.3 * (3.593 - beta_star) * std::exp(-40.0 * mean_shift);
    s.gamma_hat = gamma_star + 0.3 * (10.554 - gamma_star) * std::exp(-40.0 * mean_shift);
    s.beta_err = 0.03;
    s.gamma_err = 0.005;
    return s;
  };
  auto [fit, state] = moment_shift_fit(recs, 0.15, inputs, fitter);
  CHECK(state.converged);
  CHECK(!state.oscillating);
  CHECK(state.iteration <= 10);
  CHECK(state.history.size() == static_cast<std::size_t>(state.iteration) + 1);
  CHECK(fit.beta_hat == doctest::Approx(beta_star).epsilon(0.02));

  // the widths really moved by the analytic correction at the last iterate
  auto [prev_beta, prev_gamma] = state.history[state.history.size() - 2];
  for (std::size_t k = 0; k < recs.size(); ++k) {
    double expect = eddington_correct_w(recs[k].w_tilde, recs[k].m_tilde, recs[k].d, 0.15,
                                        prev_beta, inputs.v_star + prev_gamma, inputs.alpha);
    CHECK(state.corrected_widths[k] == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("idempotence at the fixed point") {
  auto recs = toy_catalog(16);
  auto inputs = fiducial_inputs();
  // fitter that always returns the same values: fixed point after one pass
  auto fitter = [](const std::vector<GalaxyRecord>&) -> FitSummary {
    return {3.4, 10.5, 0.03, 0.005, FitModelTag::Inverse};
  };
  auto [fit1, st1] = moment_shift_fit(recs, 0.1, inputs, fitter);
  CHECK(st1.converged);
  MomentShiftInputs again = inputs;
  again.inverse_fit = fit1;
  auto [fit2, st2] = moment_shift_fit(recs, 0.1, again, fitter);
  CHECK(st2.converged);
  CHECK(st2.iteration == 1);
  CHECK(std::fabs(fit2.beta_hat - fit1.beta_hat) < 0.005);
  CHECK(std::fabs(fit2.gamma_hat - fit1.gamma_hat) < 0.005 / fit1.beta_hat);
}

TEST_CASE("oscillation detection aborts with diagnostics") {
  auto recs = toy_catalog(8);
  auto inputs = fiducial_inputs();
  int call = 0;
  // alternating-sign, growing steps in beta
  auto fitter = [&](const std::vector<GalaxyRecord>&) -> FitSummary {
    ++call;
    double delta = (call % 2 == 0 ? 1.0 : -1.0) * 0.1 * (1.0 + 0.5 * call);
    return {3.5 + delta, 10.5, 0.03, 0.005, FitModelTag::Inverse};
  };
  auto [fit, state] = moment_shift_fit(recs, 0.15, inputs, fitter);
  (void)fit;
  CHECK(state.oscillating);
  CHECK(!state.converged);
  CHECK(!state.diagnostics.empty());
}

TEST_CASE("iteration cap flags non-convergence") {
  auto recs = toy_catalog(8);
  auto inputs = fiducial_inputs();
  int call = 0;
  auto fitter = [&](const std::vector<GalaxyRecord>&) -> FitSummary {
    ++call;  // drifting monotonically, never settling
    return {3.5 + 0.05 * call, 10.5, 0.03, 0.005, FitModelTag::Inverse};
  };
  MomentShiftOptions opts;
  opts.max_iterations = 5;
  auto [fit, state] = moment_shift_fit(recs, 0.15, inputs, fitter, opts);
  (void)fit;
  CHECK(!state.converged);
  CHECK(!state.oscillating);
  CHECK(state.iteration == 5);
}

TEST_CASE("negative sigma_m rejected") {
  auto recs = toy_catalog(4);
  auto fitter = [](const std::vector<GalaxyRecord>&) -> FitSummary { return {}; };
  CHECK_THROWS_AS(moment_shift_fit(recs, -0.1, fiducial_inputs(), fitter),
                  std::invalid_argument);
}

} // TEST_SUITE
