#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tfr/bias.hpp"
#include "tfr/core.hpp"
#include "tfr/sampler.hpp"

namespace tfr {

struct MomentShiftState {
  int iteration = 0;
  double beta_j = 0.0, gamma_j = 0.0;   // current estimates
  double v_star = 0.0, alpha = 0.0;     // fixed from the forward fit
  double sigma_m_user = 0.0;
  std::vector<double> corrected_widths; // per-record w~_c at the final iterate
  std::vector<std::pair<double, double>> history;  // (beta_j, gamma_j), j = 0..iteration
  bool converged = false;
  bool oscillating = false;
  std::string diagnostics;
};

// Starting points: the inverse fit supplies (beta_0, gamma_0); the forward
// fit supplies (v_star, alpha) and an upper bound on sigma_m.
struct MomentShiftInputs {
  FitSummary inverse_fit;
  double v_star = 0.0;
  double alpha = 0.0;
  double sigma_m_upper = 0.0;
};

struct MomentShiftOptions {
  double tol = 0.005;       // stop when max(|d beta|, beta |d gamma|) < tol
  int max_iterations = 10;
};

// Re-fit of the inverse model on a width-corrected catalog.
using InverseFitter = std::function<FitSummary(const std::vector<GalaxyRecord>&)>;

// Iterative moment shifting: correct every width for the predicted Eddington
// bias with the current (beta_j, gamma_j), re-fit the inverse model, repeat.
// sigma_m must be supplied by the user; zero reproduces the plain inverse
// fit immediately.
std::pair<FitSummary, MomentShiftState> moment_shift_fit(
    const std::vector<GalaxyRecord>& catalog, double sigma_m_user,
    const MomentShiftInputs& inputs, const InverseFitter& fit_inverse,
    const MomentShiftOptions& opts = {});

// Standard MCMC-backed inverse fitter.  Successive calls warm-start from the
// previous chain's final walker positions, since iterates stay nearby.
struct InverseRefitConfig {
  PriorBounds bounds = PriorBounds::defaults_for(ModelKind::Inverse);
  EnsembleOptions ensemble;
  SelectionSpec selection;
  int threads = 0;
};
InverseFitter make_mcmc_inverse_fitter(InverseRefitConfig cfg);

} // namespace tfr
