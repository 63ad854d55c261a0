#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "tfr/constants.hpp"
#include "tfr/numerics.hpp"

using namespace tfr;

TEST_SUITE("numerics") {

TEST_CASE("gauss rules integrate polynomials exactly") {
  for (const GaussRule* rule : {&gauss_rule_8(), &gauss_rule_12(), &gauss_rule_16()}) {
    for (int deg = 0; deg < 2 * rule->n; ++deg) {
      double acc = 0.0;
      for (int q = 0; q < rule->n; ++q)
        acc += rule->weights[q] * std::pow(rule->nodes[q], deg);
      double exact = deg % 2 == 1 ? 0.0 : 2.0 / (deg + 1);
      CHECK(acc == doctest::Approx(exact).epsilon(1e-13).scale(1.0));
    }
  }
}

TEST_CASE("vexp matches std::exp") {
  std::mt19937_64 gen(12345);
  std::uniform_real_distribution<double> wide(-700.0, 700.0);
  std::vector<double> x(200000), out(200000);
  for (auto& v : x) v = wide(gen);
  x[0] = 0.0; x[1] = 1.0; x[2] = -1.0; x[3] = 700.0; x[4] = -700.0; x[5] = 1e-15;
  vexp(x.data(), out.data(), x.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    double ref = std::exp(x[k]);
    worst = std::max(worst, std::fabs(out[k] - ref) / ref);
  }
  CHECK(worst < 4e-15);
  CHECK(fast_exp(-800.0) == 0.0);
  CHECK(std::isinf(fast_exp(800.0)));
}

TEST_CASE("erfc_scaled against a long-double oracle on [-6, 30]") {
  double worst = 0.0;
  for (double x = -6.0; x <= 30.0; x += 0.01220703125) {
    long double ref = oracles::erfcx_ref(static_cast<long double>(x));
    double rel = std::fabs((erfc_scaled(x) - static_cast<double>(ref)) / static_cast<double>(ref));
    worst = std::max(worst, rel);
  }
  CHECK(worst < 1e-14);
}

TEST_CASE("erfc identities") {
  auto erfc_of = [](double x) { return erfc_scaled(x) * std::exp(-x * x); };
  CHECK(erfc_of(0.0) == doctest::Approx(1.0).epsilon(1e-15));
  for (double x : {0.5, 1.0, 2.0})
    CHECK(erfc_of(-x) == doctest::Approx(2.0 - erfc_of(x)).epsilon(1e-14));
  // erfc(sqrt 2) = 0.0455003, high-precision oracle agreeing with the rounded value
  double v = erfc_of(std::sqrt(2.0));
  CHECK(v == doctest::Approx(0.0455003).epsilon(2e-6));
  long double ref = erfcl(sqrtl(2.0L));
  CHECK(v == doctest::Approx(static_cast<double>(ref)).epsilon(1e-14));
}

TEST_CASE("fft_convolve: delta identity") {
  const double h = 0.01;
  std::vector<double> f(64, 0.0), g(100);
  f[17] = 1.0 / h;  // unit-mass discrete delta
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = std::sin(0.08 * k) + 2.0;
  auto out = fft_convolve(f, g, h);
  REQUIRE(out.size() == f.size() + g.size() - 1);
  for (std::size_t k = 0; k < g.size(); ++k)
    CHECK(out[17 + k] == doctest::Approx(g[k]).epsilon(1e-12));
}

TEST_CASE("fft_convolve: linearity") {
  const double h = 0.05;
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> f(80), g1(50), g2(50), gsum(50);
  for (auto& v : f) v = u(gen);
  for (std::size_t k = 0; k < g1.size(); ++k) {
    g1[k] = u(gen);
    g2[k] = u(gen);
    gsum[k] = g1[k] + g2[k];
  }
  auto a = fft_convolve(f, g1, h);
  auto b = fft_convolve(f, g2, h);
  auto s = fft_convolve(f, gsum, h);
  for (std::size_t k = 0; k < s.size(); ++k)
    CHECK(s[k] == doctest::Approx(a[k] + b[k]).epsilon(1e-12).scale(1.0));
}

TEST_CASE("fft_convolve agrees with direct summation at N=256") {
  const double h = 0.003;
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> f(256), g(256);
  for (auto& v : f) v = u(gen);
  for (auto& v : g) v = u(gen);
  auto fast = fft_convolve(f, g, h);
  double scale = 0.0;
  std::vector<double> slow(f.size() + g.size() - 1, 0.0);
  for (std::size_t a = 0; a < f.size(); ++a)
    for (std::size_t b = 0; b < g.size(); ++b) slow[a + b] += f[a] * g[b] * h;
  for (double v : slow) scale = std::max(scale, std::fabs(v));
  for (std::size_t k = 0; k < slow.size(); ++k)
    CHECK(std::fabs(fast[k] - slow[k]) / scale < 1e-10);
}

TEST_CASE("fft_convolve conserves mass of unit-mass inputs") {
  const double h = 0.01;
  std::vector<double> f(300), g(200);
  for (std::size_t k = 0; k < f.size(); ++k)
    f[k] = std::exp(-0.5 * (k * h - 1.5) * (k * h - 1.5) / 0.04);
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = 1.0 + std::cos(0.02 * k);
  auto normalize = [&](std::vector<double>& v) {
    double mass = std::accumulate(v.begin(), v.end(), 0.0) * h;
    for (auto& x : v) x /= mass;
  };
  normalize(f);
  normalize(g);
  auto out = fft_convolve(f, g, h);
  double mass = std::accumulate(out.begin(), out.end(), 0.0) * h;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("fft_convolve rejects mismatched spacing") {
  std::vector<double> f(8, 1.0), g(8, 1.0);
  CHECK_THROWS_AS(fft_convolve(f, g, 0.1, 0.2), std::invalid_argument);
}

TEST_CASE("inclination prior: closed forms and unit mass") {
  // inc = 30 deg -> i = log10(0.5); p(i) = ln10 * 0.25 / sqrt(0.75)
  double i30 = std::log10(0.5);
  long double ref = 2.302585092994045684L * 0.25L / sqrtl(0.75L);
  CHECK(inclination_prior_pdf(i30) == doctest::Approx(static_cast<double>(ref)).epsilon(1e-14));
  CHECK(static_cast<double>(ref) == doctest::Approx(0.66470).epsilon(1e-4));

  CHECK(inclination_prior_pdf(-40.0) == doctest::Approx(0.0).scale(1.0));
  CHECK(std::isinf(inclination_prior_pdf(0.0)));
  CHECK_THROWS_AS(inclination_prior_pdf(0.5), std::domain_error);

  // unit mass over (-inf, 0]: the integrable endpoint singularity is handled
  // by the substitution i = -t^2 on the last stretch
  double delta = 0.04;
  double mass = oracles::integrate([](double i) { return inclination_prior_pdf(i); }, -12.0,
                                   -delta, 1e-12, 20) +
                oracles::integrate(
                    [](double t) { return 2.0 * t * inclination_prior_pdf(-t * t); }, 0.0,
                    std::sqrt(delta), 1e-12, 20);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));

  // CDF consistent with the pdf
  for (double i : {-2.0, -0.7, -0.1, -0.01}) {
    double m = oracles::integrate([](double x) { return inclination_prior_pdf(x); }, -12.0, i);
    CHECK(inclination_prior_cdf(i) == doctest::Approx(m).epsilon(1e-8));
  }
}

TEST_CASE("u <-> i maps") {
  // the cosine coordinate saturates toward u = 1, so the round trip is only
  // meaningful on the near-edge region where the quadrature actually uses it
  for (double i : {-2.0, -1.0, -0.5, -0.1, -1e-4}) {
    double u = u_of_i(i);
    CHECK(i_of_u(u) == doctest::Approx(i).epsilon(1e-12));
  }
  double worst = 0.0;
  for (double u = 0.0; u < u_of_i(-1.0); u += 1e-4)
    worst = std::max(worst, std::fabs(i_of_u_interp(u) - i_of_u(u)));
  CHECK(worst < 1e-12);
}

TEST_CASE("build_grids invariants") {
  CatalogSummary summary{-1.4, 0.5, 1000};
  GridSpec g = build_grids(summary, 0.1, 1024);
  // n_nodes=1024 over i in [-1.76, 0) -> spacing ~ 1.72e-3
  CHECK(g.spacing == doctest::Approx(1.72e-3).epsilon(5e-3));
  CHECK(g.i_min == doctest::Approx(std::log10(std::sin(kPi / 180.0))).epsilon(1e-15));
  CHECK(g.n_i == 1024);
  CHECK(g.w_lo <= summary.w_min - 0.5);
  CHECK(g.w_hi >= summary.w_max + 0.5);

  // prior cell masses sum to 1 - P(inc < 1 deg) = cos(1 deg), here exactly
  double mass = std::accumulate(g.i_masses.begin(), g.i_masses.end(), 0.0);
  CHECK(mass == doctest::Approx(std::cos(kPi / 180.0)).epsilon(1e-12));
  CHECK(std::fabs(mass - std::cos(kPi / 180.0)) < 1e-4);  // stated tolerance

  GridSpec g2 = build_grids(summary, 0.1, 2048);
  CHECK(g2.spacing == doctest::Approx(g.spacing / 2.0).epsilon(1e-15));

  CHECK_THROWS_AS(build_grids(summary, 0.1, 1000), std::invalid_argument);
  CHECK_THROWS_AS(build_grids(CatalogSummary{0, 0, 0}, 0.1, 1024), std::invalid_argument);
}

TEST_CASE("midpoint cell masses match the analytic cell integrals") {
  CatalogSummary summary{-1.0, 0.5, 10};
  GridSpec g = build_grids(summary, 0.05, 256);
  // change-of-variables oracle: integrate sin(inc) over the cell in inc-space
  for (int j : {0, 100, 200, 255}) {
    double left = g.i_min + j * g.spacing;
    double right = (j + 1 == g.n_i) ? 0.0 : g.i_min + (j + 1) * g.spacing;
    double inc_l = std::asin(std::pow(10.0, left));
    double inc_r = right == 0.0 ? kPi / 2.0 : std::asin(std::pow(10.0, right));
    double ref = oracles::integrate([](double inc) { return std::sin(inc); }, inc_l, inc_r);
    CHECK(g.i_masses[j] == doctest::Approx(ref).epsilon(1e-10));
  }
}

} // TEST_SUITE
