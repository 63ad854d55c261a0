#include "tfr/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "tfr/numerics.hpp"
#include "tfr/rng.hpp"

namespace tfr {

bool PriorBounds::contains(std::span<const double> theta) const {
  if (static_cast<int>(theta.size()) != dim()) return false;
  for (int k = 0; k < dim(); ++k)
    if (!(theta[k] > lo_hi[k].first) || !(theta[k] < lo_hi[k].second)) return false;
  return true;
}

void PriorBounds::validate() const {
  for (const auto& [lo, hi] : lo_hi)
    if (!(lo < hi)) throw std::invalid_argument("PriorBounds: need lo < hi");
}

PriorBounds PriorBounds::defaults_for(ModelKind kind) {
  auto box = [](const std::string& name) -> std::pair<double, double> {
    if (name == "beta") return {2.5, 4.5};
    if (name == "gamma") return {10.0, 11.0};
    if (name == "sigma_m") return {0.001, 0.3};
    if (name == "sigma_w") return {0.001, 0.1};
    if (name == "v_star") return {-1.0, 1.0};
    return {-2.0, 0.0};  // alpha
  };
  PriorBounds b;
  for (const auto& name : param_names(kind)) b.lo_hi.push_back(box(name));
  return b;
}

TauEstimate autocorr_time(const std::vector<std::vector<double>>& walker_series) {
  if (walker_series.empty() || walker_series.front().empty())
    throw std::invalid_argument("autocorr_time: empty chain");
  std::size_t n = walker_series.front().size();
  for (const auto& s : walker_series)
    if (s.size() != n) throw std::invalid_argument("autocorr_time: ragged walker series");

  std::size_t m = 1;
  while (m < 2 * n) m <<= 1;

  std::vector<double> rho(n, 0.0);
  std::vector<double> re(m), im(m);
  int used = 0;
  for (const auto& series : walker_series) {
    double mean = 0.0;
    for (double v : series) mean += v;
    mean /= static_cast<double>(n);
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    for (std::size_t t = 0; t < n; ++t) re[t] = series[t] - mean;
    fft_pow2(re.data(), im.data(), m, false);
    for (std::size_t k = 0; k < m; ++k) {
      re[k] = re[k] * re[k] + im[k] * im[k];
      im[k] = 0.0;
    }
    fft_pow2(re.data(), im.data(), m, true);
    if (re[0] <= 0.0) continue;  // constant series carries no information
    double inv0 = 1.0 / re[0];
    for (std::size_t t = 0; t < n; ++t) rho[t] += re[t] * inv0;
    ++used;
  }
  TauEstimate est;
  if (used == 0) {
    est.tau = 1.0;
    est.reliable = false;
    return est;
  }
  for (double& r : rho) r /= static_cast<double>(used);

  // taus_M = 2 cumsum(rho) - 1; pick the smallest window M >= 5 * taus_M.
  double cum = 0.0;
  double tau = 2.0 * static_cast<double>(n) - 1.0;
  for (std::size_t t = 0; t < n; ++t) {
    cum += rho[t];
    double tau_m = 2.0 * cum - 1.0;
    if (static_cast<double>(t) >= 5.0 * tau_m) {
      tau = tau_m;
      break;
    }
  }
  est.tau = std::max(tau, 1e-6);
  est.reliable = n >= 50 && static_cast<double>(n) >= 20.0 * est.tau;
  return est;
}

std::vector<std::vector<double>> Chain::retained() const {
  std::vector<std::vector<double>> rows;
  for (int w = 0; w < n_walkers; ++w) {
    for (int s = burn; s < n_steps; s += thin) {
      std::vector<double> row(n_params + 1);
      for (int p = 0; p < n_params; ++p) row[p] = sample(w, s, p);
      row[n_params] = lp(w, s);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<std::vector<double>> Chain::final_positions() const {
  std::vector<std::vector<double>> pos(n_walkers, std::vector<double>(n_params));
  for (int w = 0; w < n_walkers; ++w)
    for (int p = 0; p < n_params; ++p) pos[w][p] = sample(w, n_steps - 1, p);
  return pos;
}

namespace {

constexpr std::uint64_t kStreamSampler = 0x73616d706c657221ULL;
constexpr std::uint64_t kStreamInit = 0x696e6974706f7321ULL;

std::string format_theta(std::span<const double> theta) {
  std::ostringstream os;
  os << "(";
  for (std::size_t k = 0; k < theta.size(); ++k) os << (k ? ", " : "") << theta[k];
  os << ")";
  return os.str();
}

std::vector<double> per_param_tau(const Chain& c) {
  std::vector<double> taus(c.n_params, 1.0);
  std::vector<std::vector<double>> series(c.n_walkers, std::vector<double>(c.n_steps));
  for (int p = 0; p < c.n_params; ++p) {
    for (int w = 0; w < c.n_walkers; ++w)
      for (int s = 0; s < c.n_steps; ++s) series[w][s] = c.sample(w, s, p);
    taus[p] = autocorr_time(series).tau;
  }
  return taus;
}

} // namespace

Chain ensemble_run(const LogPostFn& logpost, const PriorBounds& bounds,
                   const EnsembleOptions& opts) {
  bounds.validate();
  int dim = bounds.dim();
  int n_walkers = opts.n_walkers > 0 ? opts.n_walkers : 2 * dim;
  if (n_walkers % 2 != 0 || n_walkers < 2 * dim || n_walkers > 3 * dim)
    throw std::invalid_argument("ensemble_run: n_walkers must be even and within [2, 3] x dim");
  double a = opts.stretch_a;
  if (!(a > 1.0)) throw std::invalid_argument("ensemble_run: stretch scale must be > 1");

  Chain chain;
  chain.n_walkers = n_walkers;
  chain.n_params = dim;
  chain.seed = opts.seed;
  chain.bounds = bounds;

  auto eval = [&](std::span<const double> theta) {
    double v = logpost(theta);
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
      throw std::runtime_error("ensemble_run: non-finite log posterior at bounded point theta=" +
                               format_theta(theta));
    return v;
  };

  // Walker state
  std::vector<std::vector<double>> pos(n_walkers, std::vector<double>(dim));
  std::vector<double> lp(n_walkers);
  if (!opts.init.empty()) {
    if (static_cast<int>(opts.init.size()) != n_walkers)
      throw std::invalid_argument("ensemble_run: init must supply one position per walker");
    for (int w = 0; w < n_walkers; ++w) {
      pos[w] = opts.init[w];
      if (!bounds.contains(pos[w]))
        throw std::invalid_argument("ensemble_run: init position outside bounds");
    }
  } else {
    for (int w = 0; w < n_walkers; ++w) {
      PhiloxStream rng(opts.seed, kStreamInit, static_cast<std::uint64_t>(w));
      for (int p = 0; p < dim; ++p) {
        auto [lo, hi] = bounds.lo_hi[p];
        double u;
        do {
          u = rng.next_unit();
        } while (u == 0.0);  // keep strictly inside the open box
        pos[w][p] = lo + u * (hi - lo);
      }
    }
  }
  for (int w = 0; w < n_walkers; ++w) lp[w] = eval(pos[w]);

  std::vector<std::uint64_t> accepted(n_walkers, 0);
  auto push_state = [&]() {
    for (int w = 0; w < n_walkers; ++w) {
      chain.samples.insert(chain.samples.end(), pos[w].begin(), pos[w].end());
      chain.log_post.push_back(lp[w]);
    }
    ++chain.n_steps;
  };
  push_state();

  int half = n_walkers / 2;
  std::vector<double> proposal(dim);
  double max_tau = std::numeric_limits<double>::infinity();

  while (chain.n_steps < opts.step_cap) {
    std::uint64_t s = static_cast<std::uint64_t>(chain.n_steps);
    for (int ph = 0; ph < 2; ++ph) {
      int lo_w = ph == 0 ? 0 : half;
      int hi_w = ph == 0 ? half : n_walkers;
      int other_lo = ph == 0 ? half : 0;
      for (int w = lo_w; w < hi_w; ++w) {
        auto words = Philox4x64::block({s, static_cast<std::uint64_t>(w),
                                        static_cast<std::uint64_t>(ph), 0},
                                       {opts.seed, kStreamSampler});
        double u_z = u64_to_unit(words[0]);
        double u_k = u64_to_unit(words[1]);
        double u_acc = u64_to_unit(words[2]);

        int k = other_lo + std::min(half - 1, static_cast<int>(u_k * half));
        double z = (1.0 + (a - 1.0) * u_z);
        z = z * z / a;
        for (int p = 0; p < dim; ++p)
          proposal[p] = pos[k][p] + z * (pos[w][p] - pos[k][p]);

        if (!bounds.contains(proposal)) continue;
        double lp_new = eval(proposal);
        double ln_q = (dim - 1) * std::log(z) + lp_new - lp[w];
        if (std::log(u_acc) < ln_q) {
          pos[w] = proposal;
          lp[w] = lp_new;
          ++accepted[w];
        }
      }
    }
    push_state();

    if (chain.n_steps % opts.check_every == 0 && chain.n_steps >= 64) {
      chain.tau = per_param_tau(chain);
      max_tau = *std::max_element(chain.tau.begin(), chain.tau.end());
      if (static_cast<double>(chain.n_steps) >= opts.length_factor * max_tau) {
        chain.converged = true;
        break;
      }
    }
  }

  if (chain.tau.empty() || !chain.converged) {
    chain.tau = per_param_tau(chain);
    max_tau = *std::max_element(chain.tau.begin(), chain.tau.end());
    chain.converged = static_cast<double>(chain.n_steps) >= opts.length_factor * max_tau;
  }
  chain.burn = static_cast<int>(std::ceil(2.0 * max_tau));
  chain.thin = std::max(1, static_cast<int>(std::ceil(max_tau / 2.0)));
  if (chain.burn >= chain.n_steps) chain.burn = chain.n_steps / 2;  // non-converged fallback

  chain.acceptance_fraction.resize(n_walkers);
  double n_prop = static_cast<double>(chain.n_steps - 1);
  for (int w = 0; w < n_walkers; ++w)
    chain.acceptance_fraction[w] = n_prop > 0 ? static_cast<double>(accepted[w]) / n_prop : 0.0;
  return chain;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile: empty sample");
  std::sort(values.begin(), values.end());
  double posn = q / 100.0 * static_cast<double>(values.size() - 1);
  std::size_t lo = static_cast<std::size_t>(posn);
  if (lo + 1 >= values.size()) return values.back();
  double fr = posn - static_cast<double>(lo);
  return values[lo] + fr * (values[lo + 1] - values[lo]);
}

std::vector<ParamSummary> summarize(const Chain& chain, bool allow_nonconverged) {
  if (!chain.converged && !allow_nonconverged)
    throw std::runtime_error("summarize: chain not converged (override to proceed)");
  auto rows = chain.retained();
  if (rows.empty()) throw std::runtime_error("summarize: no retained samples");
  std::vector<ParamSummary> out(chain.n_params);
  std::vector<double> col(rows.size());
  for (int p = 0; p < chain.n_params; ++p) {
    for (std::size_t r = 0; r < rows.size(); ++r) col[r] = rows[r][p];
    out[p].p16 = percentile(col, 16.0);
    out[p].p50 = percentile(col, 50.0);
    out[p].p84 = percentile(col, 84.0);
  }
  return out;
}

} // namespace tfr
