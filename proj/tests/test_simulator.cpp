#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "oracles.hpp"
#include "tfr/constants.hpp"
#include "tfr/simulator.hpp"

using namespace tfr;

namespace {

double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  double n = static_cast<double>(sample.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < sample.size(); ++k) {
    double F = cdf(sample[k]);
    worst = std::max(worst, std::fabs(F - static_cast<double>(k) / n));
    worst = std::max(worst, std::fabs(static_cast<double>(k + 1) / n - F));
  }
  return worst;
}

SimConfig base_config() {
  SimConfig c;
  c.params.beta = 3.33;
  c.params.gamma = 10.5;
  c.params.sigma_m = 0.15;
  c.params.sigma_w = 0.045;
  c.params.v_star = 0.3;
  c.params.alpha = -1.27;
  c.selection = SelectionSpec::step(5.736);
  c.seed = 11;
  return c;
}

} // namespace

TEST_SUITE("simulator") {

TEST_CASE("sample_inclinations: median and sine distribution") {
  PhiloxStream rng(5, 0);
  auto is = sample_inclinations(100000, rng);
  // P(inc > 60 deg) = 0.5 <=> P(i > log10 sin 60) = 0.5
  double thr = std::log10(std::sin(kPi / 3.0));
  std::size_t above = 0;
  for (double i : is)
    if (i > thr) ++above;
  double frac = static_cast<double>(above) / static_cast<double>(is.size());
  CHECK(std::fabs(frac - 0.5) < 4.0 * 0.5 / std::sqrt(static_cast<double>(is.size())));

  // KS against the analytic CDF of inc: F(inc) = 1 - cos(inc)
  std::vector<double> incs(is.size());
  for (std::size_t k = 0; k < is.size(); ++k) incs[k] = std::asin(std::pow(10.0, is[k]));
  double d = ks_distance(incs, [](double inc) { return 1.0 - std::cos(inc); });
  CHECK(d < 1.63 / std::sqrt(static_cast<double>(is.size())));
}

TEST_CASE("sample_schechter_velocities: support, KS, first moment") {
  const double v_star = 0.3, alpha = -1.27, beta = 3.33;
  PhiloxStream rng(5, 1);
  auto vs = sample_schechter_velocities(100000, v_star, alpha, beta, rng);
  for (double v : vs) {
    CHECK(beta * v - v_star > kSchechterSupportLo);
    CHECK(beta * v - v_star < kSchechterSupportHi);
  }

  // KS against the same tabulated CDF used by the sampler
  SchechterVelocitySampler oracle_table(v_star, alpha, beta);
  double d = ks_distance(vs, [&](double v) { return oracle_table.cdf_of_x(beta * v - v_star); });
  CHECK(d < 1.63 / std::sqrt(static_cast<double>(vs.size())));

  // sample mean of beta v - v_star vs an adaptive-quadrature first moment
  double c1 = (alpha + 1.0) * kLn10;
  auto pdf = [&](double x) { return std::exp(c1 * x - std::exp(kLn10 * x)); };
  double norm = oracles::integrate(pdf, kSchechterSupportLo, kSchechterSupportHi, 1e-12);
  double mean_x = oracles::integrate([&](double x) { return x * pdf(x); }, kSchechterSupportLo,
                                     kSchechterSupportHi, 1e-12) /
                  norm;
  double var_x = oracles::integrate([&](double x) { return (x - mean_x) * (x - mean_x) * pdf(x); },
                                    kSchechterSupportLo, kSchechterSupportHi, 1e-12) /
                 norm;
  double smean = 0.0;
  for (double v : vs) smean += beta * v - v_star;
  smean /= static_cast<double>(vs.size());
  double se = std::sqrt(var_x / static_cast<double>(vs.size()));
  CHECK(std::fabs(smean - mean_x) < 3.0 * se);
}

TEST_CASE("simulate: reproducibility is byte-level") {
  SimConfig c = base_config();
  c.scale_a = 2e-4;
  auto a = simulate(c);
  auto b = simulate(c);
  REQUIRE(a.records.size() == b.records.size());
  CHECK(a.pre_selection_count == b.pre_selection_count);
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    CHECK(a.records[k].cz == b.records[k].cz);
    CHECK(a.records[k].m_tilde == b.records[k].m_tilde);
    CHECK(a.records[k].w_tilde == b.records[k].w_tilde);
    CHECK(a.records[k].d == b.records[k].d);
  }
  SimConfig c2 = c;
  c2.seed = 12;
  auto other = simulate(c2);
  CHECK(a.records.size() != other.records.size());
}

TEST_CASE("simulate: zero scatter + edge-on hook gives the exact relation") {
  SimConfig c = base_config();
  c.params.sigma_m = 0.0;
  c.params.sigma_w = 0.0;
  c.force_edge_on = true;
  c.scale_a = 3e-4;
  auto cat = simulate(c);
  REQUIRE(cat.records.size() > 100);
  for (const auto& r : cat.records) {
    CHECK(r.m_tilde + r.d ==
          doctest::Approx(c.params.beta * r.w_tilde + c.params.gamma).epsilon(1e-12));
  }
}

TEST_CASE("simulate: selection") {
  SimConfig c = base_config();
  c.scale_a = 2e-4;
  auto cat = simulate(c);
  REQUIRE(!cat.records.empty());
  double min_m = 1e300;
  for (const auto& r : cat.records) min_m = std::min(min_m, r.m_tilde);
  CHECK(min_m >= c.selection.m_l);
  CHECK(cat.pre_selection_count > cat.records.size());

  SimConfig open = c;
  open.selection = SelectionSpec::none();
  auto cat2 = simulate(open);
  CHECK(cat2.pre_selection_count == cat2.records.size());
}

TEST_CASE("simulate: censoring boundary rises with distance") {
  SimConfig c = base_config();
  c.scale_a = 3e-3;
  auto cat = simulate(c);
  // per redshift cell, min(m~ + d) should hug m_l + d(cz0)
  std::map<double, std::pair<double, std::size_t>> cell_min;  // cz -> (min m~, count)
  for (const auto& r : cat.records) {
    auto& e = cell_min.try_emplace(r.cz, 1e300, 0).first->second;
    e.first = std::min(e.first, r.m_tilde);
    ++e.second;
  }
  Cosmology cosmo;
  for (const auto& [cz, e] : cell_min) {
    if (e.second < 150) continue;
    double d = distance_parameter(cz, cosmo);
    double boundary = c.selection.m_l + d;
    double min_mass = e.first + d;
    CHECK(min_mass >= boundary);
    CHECK(min_mass - boundary < 0.2);
  }
}

TEST_CASE("simulate: mass function KS at zero scatter without selection") {
  SimConfig c = base_config();
  c.params.sigma_m = 0.0;
  c.params.sigma_w = 0.0;
  c.selection = SelectionSpec::none();
  c.scale_a = 6.5e-4;  // ~1e5 records
  auto cat = simulate(c);
  REQUIRE(cat.records.size() > 50000);
  const double M_star = c.params.v_star + c.params.gamma;
  std::vector<double> masses(cat.records.size());
  for (std::size_t k = 0; k < masses.size(); ++k)
    masses[k] = cat.records[k].m_tilde + cat.records[k].d;

  SchechterVelocitySampler table(c.params.v_star, c.params.alpha, c.params.beta);
  double d = ks_distance(masses, [&](double M) { return table.cdf_of_x(M - M_star); });
  CHECK(d < 1.63 / std::sqrt(static_cast<double>(masses.size())));
}

TEST_CASE("stochastic rounding matches the continuous count in expectation") {
  SimConfig c = base_config();
  c.selection = SelectionSpec::none();
  c.cz_max = 4300.0;  // 3 cells
  c.scale_a = 3.7e-6;
  double expected = 0.0;
  for (double cz0 : {4050.0, 4150.0, 4250.0}) expected += c.scale_a * cz0 * c.delta_cz;
  double total = 0.0;
  const int reps = 300;
  for (int s = 0; s < reps; ++s) {
    c.seed = 1000 + static_cast<std::uint64_t>(s);
    total += static_cast<double>(simulate(c).pre_selection_count);
  }
  double mean = total / reps;
  // each cell count has Bernoulli-rounding variance <= 1/4
  double se = std::sqrt(3.0 * 0.25 / reps);
  CHECK(std::fabs(mean - expected) < 4.0 * se + 0.05);
}

TEST_CASE("tune_scale_a hits the target") {
  SimConfig c = base_config();
  c.scale_a = 1e-9;
  c.seed = 99;
  double a = tune_scale_a(c, 5000);
  c.scale_a = a;
  auto cat = simulate(c);
  CHECK(std::fabs(static_cast<double>(cat.records.size()) - 5000.0) < 0.05 * 5000.0);
}

TEST_CASE("simulate validates its config") {
  SimConfig c = base_config();
  c.sigma_cz = 10.0;
  CHECK_THROWS_AS(simulate(c), std::invalid_argument);
  c = base_config();
  c.cz_max = c.cz_min;
  CHECK_THROWS_AS(simulate(c), std::invalid_argument);
  c = base_config();
  c.scale_a = 0.0;
  CHECK_THROWS_AS(simulate(c), std::invalid_argument);
}

} // TEST_SUITE
