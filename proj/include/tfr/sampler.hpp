#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tfr/likelihood.hpp"

namespace tfr {

struct PriorBounds {
  std::vector<std::pair<double, double>> lo_hi;

  int dim() const { return static_cast<int>(lo_hi.size()); }
  bool contains(std::span<const double> theta) const;
  void validate() const;

  // Flat-prior boxes: 2.5<beta<4.5, 10<gamma<11, 0.001<sigma_m<0.3,
  // 0.001<sigma_w<0.1, -1<v_star<1, -2<alpha<0, subset per model kind.
  static PriorBounds defaults_for(ModelKind kind);
};

struct TauEstimate {
  double tau = 1.0;
  bool reliable = false;  // false when the chain is too short to trust it
};

// Integrated autocorrelation time of one scalar series per walker, via FFT
// autocovariance and the self-consistent window (window = 5 tau).
TauEstimate autocorr_time(const std::vector<std::vector<double>>& walker_series);

struct Chain {
  int n_walkers = 0;
  int n_steps = 0;
  int n_params = 0;
  std::vector<double> samples;   // [step][walker][param]
  std::vector<double> log_post;  // [step][walker]
  std::vector<double> tau;       // per parameter
  int burn = 0;                  // ceil(2 max tau)
  int thin = 1;                  // ceil(max tau / 2)
  std::vector<double> acceptance_fraction;  // per walker
  std::uint64_t seed = 0;
  bool converged = false;
  PriorBounds bounds;

  double sample(int walker, int step, int param) const {
    return samples[(static_cast<std::size_t>(step) * n_walkers + walker) * n_params + param];
  }
  double lp(int walker, int step) const {
    return log_post[static_cast<std::size_t>(step) * n_walkers + walker];
  }
  // Burned, thinned, flattened samples; each row is params followed by the
  // log posterior.
  std::vector<std::vector<double>> retained() const;
  std::vector<std::vector<double>> final_positions() const;
};

struct EnsembleOptions {
  int n_walkers = 0;  // 0 -> 2*dim (even by construction)
  std::uint64_t seed = 0;
  int step_cap = 50000;
  int check_every = 256;
  double stretch_a = 2.0;
  double length_factor = 50.0;  // require n_steps >= factor * max(tau)
  std::vector<std::vector<double>> init;  // optional walker starting positions
};

using LogPostFn = std::function<double(std::span<const double>)>;

// Goodman-Weare stretch move with complementary-half updates; runs until the
// retained-length criterion is met or the step cap is hit (flagged in
// Chain::converged).
Chain ensemble_run(const LogPostFn& logpost, const PriorBounds& bounds,
                   const EnsembleOptions& opts);

struct ParamSummary {
  double p16 = 0.0, p50 = 0.0, p84 = 0.0;
};

// Percentile with linear interpolation between order statistics.
double percentile(std::vector<double> values, double q);

// Per-parameter (p16, p50, p84) of the retained sample set.  Requires a
// converged chain unless allow_nonconverged.
std::vector<ParamSummary> summarize(const Chain& chain, bool allow_nonconverged = false);

} // namespace tfr
