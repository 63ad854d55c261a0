#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "likelihood_oracles.hpp"
#include "oracles.hpp"
#include "tfr/constants.hpp"
#include "tfr/likelihood.hpp"
#include "tfr/simulator.hpp"

using namespace tfr;

namespace {

ModelParams fiducial() {
  ModelParams p;
  p.beta = 3.33;
  p.gamma = 10.5;
  p.sigma_m = 0.15;
  p.sigma_w = 0.045;
  p.v_star = 0.3;
  p.alpha = -1.27;
  return p;
}

std::vector<GalaxyRecord> tiny_catalog(std::size_t n, std::uint64_t seed) {
  SimConfig c;
  c.params = fiducial();
  c.selection = SelectionSpec::step(5.736);
  c.seed = seed;
  c.scale_a = 3e-5;
  auto cat = simulate(c);
  REQUIRE(cat.records.size() >= n);
  cat.records.resize(n);
  return cat.records;
}

} // namespace

TEST_SUITE("likelihood") {

TEST_CASE("inverse pdf: self-normalization and mean") {
  std::mt19937_64 gen(31415);
  std::uniform_real_distribution<double> ub(2.5, 4.5), ug(10.0, 11.0), us(0.001, 0.1);
  std::uniform_real_distribution<double> um(9.0, 12.0), ud(3.4, 4.9);
  for (int t = 0; t < 50; ++t) {
    ModelParams p = fiducial();
    p.beta = ub(gen);
    p.gamma = ug(gen);
    p.sigma_w = us(gen);
    double m = um(gen), d = ud(gen);
    double mu = (m + d - p.gamma) / p.beta;
    auto pdf = [&](double wt) { return conditional_pdf_inverse(wt, m, d, p); };
    std::vector<double> pts{mu - 6.0, mu + 1.0};
    for (double k : {-4.0, -2.0, -1.0, -0.5, -0.25, -0.1, -0.03, 0.0})
      pts.push_back(mu + k);
    for (double k : {-8.0, -4.0, -1.0, 0.0, 1.0, 4.0, 8.0}) pts.push_back(mu + k * p.sigma_w);
    double mass = oracles::integrate_split(pdf, pts, 1e-10);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));

    if (t < 10) {
      double mean = oracles::integrate_split([&](double wt) { return wt * pdf(wt); }, pts, 1e-10);
      double e_i = (std::log(2.0) - 1.0) / kLn10;  // analytic mean inclination
      CHECK(mean == doctest::Approx(mu + e_i).epsilon(1e-5));
    }
  }
}

TEST_CASE("inverse pdf: sigma_w -> 0 recovers the inclination prior") {
  ModelParams p = fiducial();
  p.sigma_w = 1e-6;
  double m = 10.3, d = 4.2;
  double mu = (m + d - p.gamma) / p.beta;
  for (double t : {-1.0, -0.3, -0.05}) {
    double lhs = conditional_pdf_inverse(mu + t, m, d, p);
    double rhs = inclination_prior_pdf(t);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-3));
  }
}

TEST_CASE("forward pdf: pinned-inclination hook is the plain Gaussian") {
  ModelParams p = fiducial();
  ForwardPdfOptions opt;
  opt.pinned_inclination = 0.0;
  double w = 0.05, d = 4.0;
  double mu = p.beta * w + p.gamma - d;
  for (double m : {mu - 0.2, mu, mu + 0.33}) {
    double v = conditional_pdf_forward(m, w, d, p, SelectionSpec::none(), opt);
    double ref = std::exp(-0.5 * (m - mu) * (m - mu) / (p.sigma_m * p.sigma_m)) /
                 (p.sigma_m * std::sqrt(2.0 * kPi));
    CHECK(v == doctest::Approx(ref).epsilon(1e-12));
  }
  // with a step limit: truncated Gaussian
  SelectionSpec sel = SelectionSpec::step(mu - 0.1);
  double v = conditional_pdf_forward(mu, w, d, p, sel, opt);
  double norm = 0.5 * std::erfc((sel.m_l - mu) / (std::sqrt(2.0) * p.sigma_m));
  CHECK(v == doctest::Approx(1.0 / (p.sigma_m * std::sqrt(2.0 * kPi)) / norm).epsilon(1e-12));
  CHECK(conditional_pdf_forward(sel.m_l - 1e-9, w, d, p, sel, opt) == 0.0);
}

TEST_CASE("forward pdf agrees with the 2-D adaptive-quadrature oracle") {
  std::mt19937_64 gen(2718);
  std::uniform_real_distribution<double> ub(2.8, 4.2), ug(10.1, 10.9), usm(0.01, 0.3);
  std::uniform_real_distribution<double> uv(-0.6, 0.8), ua(-1.9, -0.2);
  std::uniform_real_distribution<double> uw(-0.9, 0.4), ud(3.4, 4.9), um_off(-1.5, 1.2);
  SelectionSpec sel = SelectionSpec::step(5.736);
  int checked = 0;
  for (int t = 0; t < 20; ++t) {
    ModelParams p = fiducial();
    p.beta = ub(gen);
    p.gamma = ug(gen);
    p.sigma_m = usm(gen);
    p.v_star = uv(gen);
    p.alpha = ua(gen);
    double w = uw(gen), d = ud(gen);
    double m = p.beta * w + p.gamma - d + um_off(gen);
    if (m < sel.m_l) m = sel.m_l + 0.05;
    double ours = conditional_pdf_forward(m, w, d, p, sel);
    double ref = likelihood_oracles::forward_pdf_oracle(m, w, d, p, sel);
    if (ref <= 0.0) {
      CHECK(ours <= 1e-280);
      continue;
    }
    CHECK(ours == doctest::Approx(ref).epsilon(1e-6));
    ++checked;
  }
  CHECK(checked >= 12);  // most draws must exercise the live region
}

TEST_CASE("forward pdf: self-normalization over the selected range") {
  std::mt19937_64 gen(65537);
  std::uniform_real_distribution<double> ub(2.5, 4.5), ug(10.0, 11.0), usm(0.001, 0.3);
  std::uniform_real_distribution<double> uv(-1.0, 1.0), ua(-2.0, -0.01);
  std::uniform_real_distribution<double> uw(-0.9, 0.4), ud(3.4, 4.9);
  SelectionSpec sel = SelectionSpec::step(5.736);
  for (int t = 0; t < 50; ++t) {
    ModelParams p = fiducial();
    p.beta = ub(gen);
    p.gamma = ug(gen);
    p.sigma_m = usm(gen);
    p.v_star = uv(gen);
    p.alpha = ua(gen);
    double w = uw(gen), d = ud(gen);
    if (p.beta * w - p.v_star >= kSchechterSupportHi) continue;  // empty support
    double cap = p.v_star + kSchechterSupportHi + p.gamma - d + 10.0 * p.sigma_m;
    if (cap <= sel.m_l) continue;  // fully censored configuration
    auto pdf = [&](double m) { return conditional_pdf_forward(m, w, d, p, sel); };
    std::vector<double> pts{sel.m_l, cap};
    double mu0 = p.beta * w + p.gamma - d;
    for (double k : {-8.0, -3.0, 0.0, 3.0, 8.0}) {
      double m = mu0 + k * p.sigma_m;
      if (m > sel.m_l && m < cap) pts.push_back(m);
    }
    double mass = oracles::integrate_split(pdf, pts, 1e-9);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("forward denominator is monotone in the mass limit") {
  ModelParams p = fiducial();
  double w = -0.1, d = 4.2;
  double prev = std::numeric_limits<double>::infinity();
  for (double m_l = 4.0; m_l <= 8.0; m_l += 0.25) {
    double den = detail::forward_denominator(w, d, p, SelectionSpec::step(m_l));
    // the panel layout shifts with m_l, so allow quadrature-level jitter
    CHECK(den <= prev * (1.0 + 1e-9));
    CHECK(den >= 0.0);
    prev = den;
  }
}

TEST_CASE("dual pdf: sigma_w -> 0 reproduces the forward pdf") {
  ModelParams p = fiducial();
  p.sigma_w = 1e-6;
  SelectionSpec sel = SelectionSpec::step(5.736);
  double d = 4.2;
  for (double w : {-0.4, -0.1, 0.2}) {
    for (double moff : {-0.15, 0.0, 0.2}) {
      double m = p.beta * w + p.gamma - d + moff;
      if (m < sel.m_l) continue;
      double dual = conditional_pdf_dual(m, w, d, p, sel);
      ModelParams pf = p;
      pf.sigma_w = 0.0;
      double fwd = conditional_pdf_forward(m, w, d, pf, sel);
      CHECK(dual == doctest::Approx(fwd).epsilon(1e-3));
    }
  }
}

TEST_CASE("dual pdf matches the alternative factorization on a spot grid") {
  ModelParams p = fiducial();
  SelectionSpec sel = SelectionSpec::step(5.736);
  double d = 4.2;
  int n_checked = 0;
  for (double w : {-0.05, 0.05, 0.15, 0.25}) {
    for (double moff : {-0.2, -0.05, 0.12, 0.3}) {
      double m = p.beta * w + p.gamma - d + moff;
      if (m < sel.m_l) continue;
      double ours = conditional_pdf_dual(m, w, d, p, sel);
      double ref = likelihood_oracles::dual_pdf_oracle_b(m, w, d, p, sel);
      REQUIRE(ref > 0.0);
      CHECK(ours == doctest::Approx(ref).epsilon(1e-6));
      ++n_checked;
    }
  }
  CHECK(n_checked == 16);
}

TEST_CASE("dual pdf: self-normalization above the limit") {
  std::mt19937_64 gen(8191);
  std::uniform_real_distribution<double> usm(0.05, 0.25), usw(0.02, 0.09);
  SelectionSpec sel = SelectionSpec::step(5.736);
  for (int t = 0; t < 6; ++t) {
    ModelParams p = fiducial();
    p.sigma_m = usm(gen);
    p.sigma_w = usw(gen);
    double w = -0.2 + 0.1 * t, d = 4.0 + 0.1 * t;
    double cap = p.v_star + kSchechterSupportHi + p.gamma - d + 10.0 * p.sigma_m;
    auto pdf = [&](double m) { return conditional_pdf_dual(m, w, d, p, sel); };
    std::vector<double> pts{sel.m_l, cap};
    double mu0 = p.beta * w + p.gamma - d;
    for (double k : {-8.0, -3.0, 0.0, 3.0, 8.0}) {
      double m = mu0 + k * std::hypot(p.sigma_m, p.beta * p.sigma_w);
      if (m > sel.m_l && m < cap) pts.push_back(m);
    }
    double mass = oracles::integrate_split(pdf, pts, 1e-8);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("dual: FFT path equals the direct-quadrature path") {
  auto records = tiny_catalog(50, 4242);
  ModelParams p = fiducial();
  SelectionSpec sel = SelectionSpec::step(5.736);
  auto ctx = LikelihoodContext::build(records, sel, ModelKind::DualScatter, 1024);
  for (const auto& r : records) {
    double fft = detail::dual_log_pdf_fft(r.m_tilde, r.w_tilde, r.d, p, sel, ctx.grids);
    double direct = detail::dual_log_pdf_direct(r.m_tilde, r.w_tilde, r.d, p, sel, ctx.grids);
    CHECK(fft == doctest::Approx(direct).epsilon(1e-6));
  }
}

TEST_CASE("log_likelihood: single record, permutation, determinism") {
  auto records = tiny_catalog(64, 777);
  SelectionSpec sel = SelectionSpec::step(5.736);
  ModelParams p = fiducial();

  for (ModelKind kind : {ModelKind::Forward, ModelKind::Inverse, ModelKind::DualScatter}) {
    auto one = LikelihoodContext::build({records[0]}, sel, kind, 1024);
    double ll = log_likelihood(one, p);
    double pdf;
    if (kind == ModelKind::Forward)
      pdf = conditional_pdf_forward(records[0].m_tilde, records[0].w_tilde, records[0].d, p, sel);
    else if (kind == ModelKind::Inverse)
      pdf = conditional_pdf_inverse(records[0].w_tilde, records[0].m_tilde, records[0].d, p);
    else
      pdf = conditional_pdf_dual(records[0].m_tilde, records[0].w_tilde, records[0].d, p, sel);
    CHECK(ll == doctest::Approx(std::log(pdf)).epsilon(1e-10));

    auto ctx = LikelihoodContext::build(records, sel, kind, 1024);
    double base = log_likelihood(ctx, p);
    auto shuffled = records;
    std::mt19937_64 gen(5);
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    auto ctx2 = LikelihoodContext::build(shuffled, sel, kind, 1024);
    CHECK(log_likelihood(ctx2, p) == base);  // bit-identical under permutation
    CHECK(log_likelihood(ctx, p) == base);   // and across repeated calls
  }
}

TEST_CASE("log_likelihood: zero-density records clamp to a finite barrier") {
  auto records = tiny_catalog(8, 99);
  // poison one record: width far beyond the support even edge-on
  records[3].w_tilde = 5.0;
  SelectionSpec sel = SelectionSpec::step(5.736);
  auto ctx = LikelihoodContext::build(records, sel, ModelKind::Forward, 1024);
  auto res = log_likelihood_detailed(ctx, fiducial());
  CHECK(std::isfinite(res.value));
  CHECK(res.clamped == 1);
}

TEST_CASE("per-source errors combine in quadrature") {
  auto records = tiny_catalog(4, 123);
  SelectionSpec sel = SelectionSpec::step(5.736);
  ModelParams p = fiducial();

  // attach a per-source width error and compare against the inflated total
  auto with_err = records;
  for (auto& r : with_err) r.sigma_ew = 0.03;
  auto ctx_err = LikelihoodContext::build(with_err, sel, ModelKind::Inverse, 1024);
  auto ctx_tot = LikelihoodContext::build(records, sel, ModelKind::Inverse, 1024);
  ModelParams p_tot = p;
  p_tot.sigma_w = std::hypot(p.sigma_w, 0.03);
  CHECK(log_likelihood(ctx_err, p) == doctest::Approx(log_likelihood(ctx_tot, p_tot)).epsilon(1e-12));
}

TEST_CASE("matched-model likelihoods peak near the truth on 1-D slices") {
  // forward on a sample with sigma_w = 0, inverse on one with sigma_m = 0
  SimConfig c;
  c.params = fiducial();
  c.selection = SelectionSpec::step(5.736);
  c.seed = 11;

  SimConfig ca = c;
  ca.params.sigma_w = 0.0;
  ca.scale_a = 0.00134690688;  // ~1e4 survivors
  auto cat_a = simulate(ca).records;
  SimConfig cb = c;
  cb.params.sigma_m = 0.0;
  cb.scale_a = 0.00138040874;
  auto cat_b = simulate(cb).records;

  auto argmax_slice = [](auto&& eval, double center, double half, int n) {
    double best = center, best_v = -1e300;
    for (int k = 0; k <= n; ++k) {
      double x = center - half + 2.0 * half * k / n;
      double v = eval(x);
      if (v > best_v) {
        best_v = v;
        best = x;
      }
    }
    return best;
  };

  auto ctx_a = LikelihoodContext::build(cat_a, c.selection, ModelKind::Forward, 1024, 2);
  ModelParams pa = ca.params;
  double g_hat = argmax_slice(
      [&](double g) {
        ModelParams p = pa;
        p.gamma = g;
        return log_likelihood(ctx_a, p);
      },
      10.5, 0.06, 24);
  CHECK(std::fabs(g_hat - 10.5) < 0.02);
  double b_hat = argmax_slice(
      [&](double b) {
        ModelParams p = pa;
        p.beta = b;
        return log_likelihood(ctx_a, p);
      },
      3.33, 0.25, 25);
  CHECK(std::fabs(b_hat - 3.33) < 0.1);

  auto ctx_b = LikelihoodContext::build(cat_b, c.selection, ModelKind::Inverse, 1024, 2);
  ModelParams pb = cb.params;
  double g_hat_b = argmax_slice(
      [&](double g) {
        ModelParams p = pb;
        p.gamma = g;
        return log_likelihood(ctx_b, p);
      },
      10.5, 0.06, 24);
  CHECK(std::fabs(g_hat_b - 10.5) < 0.02);
  double b_hat_b = argmax_slice(
      [&](double b) {
        ModelParams p = pb;
        p.beta = b;
        return log_likelihood(ctx_b, p);
      },
      3.33, 0.25, 25);
  CHECK(std::fabs(b_hat_b - 3.33) < 0.1);
}

TEST_CASE("dual-scatter log-likelihood is flat along the dispersion ellipse") {
  SimConfig c;
  c.params = fiducial();
  c.selection = SelectionSpec::step(5.736);
  c.seed = 11;
  c.scale_a = 0.00134610926;  // sample-C configuration
  auto cat = simulate(c).records;
  auto ctx = LikelihoodContext::build(cat, c.selection, ModelKind::DualScatter, 1024, 2);

  ModelParams truth = c.params;
  double L0 = log_likelihood(ctx, truth);
  // coordinates (a, b) = (sigma_m, beta sigma_w); the ellipse a^2+b^2 = const
  double a0 = truth.sigma_m, b0 = truth.beta * truth.sigma_w;
  double r = std::hypot(a0, b0);
  double eps = 0.02;
  auto eval_ab = [&](double a, double b) {
    ModelParams p = truth;
    p.sigma_m = a;
    p.sigma_w = b / truth.beta;
    return log_likelihood(ctx, p);
  };
  double tangent = 0.0, normal = 0.0;
  for (double s : {-1.0, 1.0}) {
    tangent = std::max(tangent,
                       std::fabs(eval_ab(a0 - s * eps * b0 / r, b0 + s * eps * a0 / r) - L0));
    normal = std::max(normal,
                      std::fabs(eval_ab(a0 + s * eps * a0 / r, b0 + s * eps * b0 / r) - L0));
  }
  CHECK(tangent < normal);
}

TEST_CASE("context validates selection") {
  auto records = tiny_catalog(4, 1);
  records[1].m_tilde = 5.0;  // below the limit
  CHECK_THROWS_AS(
      LikelihoodContext::build(records, SelectionSpec::step(5.736), ModelKind::Forward, 1024),
      std::invalid_argument);
}

} // TEST_SUITE
