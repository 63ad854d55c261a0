#include "tfr/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tfr/constants.hpp"
#include "tfr/numerics.hpp"

namespace tfr {

namespace {

void validate(const SimConfig& c) {
  if (!(c.cz_min > 0.0) || !(c.cz_min < c.cz_max))
    throw std::invalid_argument("simulate: need 0 < cz_min < cz_max");
  if (!(c.delta_cz > 0.0)) throw std::invalid_argument("simulate: delta_cz must be > 0");
  if (!(c.scale_a > 0.0)) throw std::invalid_argument("simulate: scale_a must be > 0");
  if (c.sigma_cz != 0.0)
    throw std::invalid_argument("simulate: sigma_cz != 0 is not supported in this version");
  if (!(c.params.beta > 0.0)) throw std::invalid_argument("simulate: beta must be > 0");
  if (!(c.params.sigma_m >= 0.0) || !(c.params.sigma_w >= 0.0))
    throw std::invalid_argument("simulate: scatters must be >= 0");
  if (c.selection.kind == SelectionKind::StepInM && !std::isfinite(c.selection.m_l))
    throw std::invalid_argument("simulate: step selection needs a finite m_l");
}

} // namespace

std::vector<double> sample_inclinations(std::size_t n, PhiloxStream& rng) {
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    double c = rng.next_unit();
    out[k] = 0.5 * std::log1p(-c * c) / kLn10;
  }
  return out;
}

SchechterVelocitySampler::SchechterVelocitySampler(double v_star, double alpha, double beta)
    : v_star_(v_star), beta_(beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("SchechterVelocitySampler: beta must be > 0");
  constexpr int kN = 8192;
  x_lo_ = kSchechterSupportLo;
  dx_ = (kSchechterSupportHi - kSchechterSupportLo) / kN;
  cdf_.resize(kN + 1);
  double c1 = (alpha + 1.0) * kLn10;
  auto pdf = [&](double x) { return std::exp(c1 * x - std::exp(kLn10 * x)); };
  cdf_[0] = 0.0;
  double prev = pdf(x_lo_);
  for (int k = 1; k <= kN; ++k) {
    double cur = pdf(x_lo_ + k * dx_);
    cdf_[k] = cdf_[k - 1] + 0.5 * (prev + cur) * dx_;
    prev = cur;
  }
  double total = cdf_.back();
  for (double& v : cdf_) v /= total;
}

double SchechterVelocitySampler::cdf_of_x(double x) const {
  if (x <= x_lo_) return 0.0;
  double s = (x - x_lo_) / dx_;
  int k = static_cast<int>(s);
  if (k >= static_cast<int>(cdf_.size()) - 1) return 1.0;
  double t = s - k;
  return cdf_[k] + t * (cdf_[k + 1] - cdf_[k]);
}

double SchechterVelocitySampler::sample(double u01) const {
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u01);
  std::size_t k = it == cdf_.begin() ? 1 : static_cast<std::size_t>(it - cdf_.begin());
  if (k >= cdf_.size()) k = cdf_.size() - 1;
  double c0 = cdf_[k - 1], c1 = cdf_[k];
  double t = c1 > c0 ? (u01 - c0) / (c1 - c0) : 0.0;
  double x = x_lo_ + (static_cast<double>(k - 1) + t) * dx_;
  return (x + v_star_) / beta_;
}

std::vector<double> sample_schechter_velocities(std::size_t n, double v_star, double alpha,
                                                double beta, PhiloxStream& rng) {
  SchechterVelocitySampler sampler(v_star, alpha, beta);
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = sampler.sample(rng.next_unit());
  return out;
}

MockCatalog simulate(const SimConfig& config) {
  validate(config);
  const ModelParams& p = config.params;

  MockCatalog cat;
  cat.truth = p;
  cat.provenance = config;

  int n_cells = static_cast<int>(std::floor((config.cz_max - config.cz_min) / config.delta_cz + 1e-9));
  if (n_cells < 1) throw std::invalid_argument("simulate: redshift range shorter than delta_cz");

  SchechterVelocitySampler sampler(p.v_star, p.alpha, p.beta);

  for (int cell = 0; cell < n_cells; ++cell) {
    double cz0 = config.cz_min + (cell + 0.5) * config.delta_cz;
    double d0 = distance_parameter(cz0, config.cosmology);

    // Real-valued target count, realized by stochastic rounding so the
    // expectation matches the continuous formula.
    double n0 = config.scale_a * std::pow(cz0, 2.0 + config.density_n) * config.delta_cz;
    std::uint64_t count = static_cast<std::uint64_t>(std::floor(n0));
    PhiloxStream cell_rng(config.seed, static_cast<std::uint64_t>(cell), 1);
    if (cell_rng.next_unit() < n0 - std::floor(n0)) ++count;

    cat.pre_selection_count += count;
    PhiloxStream rng(config.seed, static_cast<std::uint64_t>(cell), 0);
    for (std::uint64_t g = 0; g < count; ++g) {
      // Four words per galaxy: velocity, cos(inc), and one normal pair.
      double v = sampler.sample(rng.next_unit());
      double c = rng.next_unit();
      auto [n_m, n_w] = rng.next_normal_pair();

      double i = config.force_edge_on ? 0.0 : 0.5 * std::log1p(-c * c) / kLn10;
      double m_tilde = p.beta * v + p.gamma - d0 + p.sigma_m * n_m;
      // Snap widths to the catalog CSV representation (logW = w~ + 2.5), so
      // written catalogs round-trip bit-exactly.
      double w_tilde = (v + i + p.sigma_w * n_w + 2.5) - 2.5;

      if (!config.selection.passes(m_tilde)) continue;
      GalaxyRecord rec;
      rec.cz = cz0;
      rec.m_tilde = m_tilde;
      rec.w_tilde = w_tilde;
      rec.d = d0;
      if (config.emit_per_source_errors) {
        rec.sigma_em = 0.0;
        rec.sigma_ew = 0.0;
      }
      cat.records.push_back(rec);
    }
  }
  return cat;
}

double tune_scale_a(const SimConfig& config, std::size_t target_survivors) {
  if (target_survivors == 0) throw std::invalid_argument("tune_scale_a: target must be > 0");
  SimConfig trial = config;
  for (int grow = 0; grow < 12; ++grow) {
    if (simulate(trial).records.size() >= 50) break;
    trial.scale_a *= 10.0;
  }
  for (int pass = 0; pass < 2; ++pass) {
    std::size_t got = simulate(trial).records.size();
    if (got == 0) throw std::runtime_error("tune_scale_a: no survivors even after growth passes");
    trial.scale_a *= static_cast<double>(target_survivors) / static_cast<double>(got);
  }
  return trial.scale_a;
}

} // namespace tfr
