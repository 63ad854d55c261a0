#include "tfr/likelihood.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstring>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "tfr/constants.hpp"

namespace tfr {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Forward: return "forward";
    case ModelKind::Inverse: return "inverse";
    case ModelKind::DualScatter: return "dual";
  }
  return "unknown";
}

std::optional<ModelKind> model_kind_from_string(const std::string& name) {
  if (name == "forward") return ModelKind::Forward;
  if (name == "inverse") return ModelKind::Inverse;
  if (name == "dual") return ModelKind::DualScatter;
  return std::nullopt;
}

std::vector<std::string> param_names(ModelKind kind) {
  switch (kind) {
    case ModelKind::Forward: return {"beta", "gamma", "sigma_m", "v_star", "alpha"};
    case ModelKind::Inverse: return {"beta", "gamma", "sigma_w"};
    case ModelKind::DualScatter:
      return {"beta", "gamma", "sigma_m", "sigma_w", "v_star", "alpha"};
  }
  return {};
}

int param_count(ModelKind kind) { return static_cast<int>(param_names(kind).size()); }

ModelParams unpack_params(ModelKind kind, std::span<const double> theta) {
  if (static_cast<int>(theta.size()) != param_count(kind))
    throw std::invalid_argument("unpack_params: wrong parameter count");
  ModelParams p;
  switch (kind) {
    case ModelKind::Forward:
      p.beta = theta[0]; p.gamma = theta[1]; p.sigma_m = theta[2];
      p.v_star = theta[3]; p.alpha = theta[4];
      break;
    case ModelKind::Inverse:
      p.beta = theta[0]; p.gamma = theta[1]; p.sigma_w = theta[2];
      break;
    case ModelKind::DualScatter:
      p.beta = theta[0]; p.gamma = theta[1]; p.sigma_m = theta[2];
      p.sigma_w = theta[3]; p.v_star = theta[4]; p.alpha = theta[5];
      break;
  }
  return p;
}

std::vector<double> pack_params(ModelKind kind, const ModelParams& p) {
  switch (kind) {
    case ModelKind::Forward: return {p.beta, p.gamma, p.sigma_m, p.v_star, p.alpha};
    case ModelKind::Inverse: return {p.beta, p.gamma, p.sigma_w};
    case ModelKind::DualScatter:
      return {p.beta, p.gamma, p.sigma_m, p.sigma_w, p.v_star, p.alpha};
  }
  return {};
}

namespace {

constexpr double kTailZ = 8.6;        // Gaussian half-support in sigmas
constexpr double kUSpaceSplit = -1.0; // integrate in u above, in i below
constexpr double kLogClamp = -690.0;

// Scratch buffers reused across records within a thread.
struct Scratch {
  std::vector<double> node_i;   // node position in i
  std::vector<double> weight;   // quadrature weight including measure factor
  std::vector<double> phi;      // log integrand pieces
  std::vector<double> expv;
  std::vector<double> aux;
  void reserve(std::size_t n) {
    if (node_i.capacity() < n) {
      node_i.reserve(n); weight.reserve(n); phi.reserve(n); expv.reserve(n); aux.reserve(n);
    }
  }
};

Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

struct Edges {
  static constexpr int kMax = 48;
  double e[kMax];
  int n = 0;
  void add(double v) {
    if (n < kMax) e[n++] = v;
  }
  // clip to [lo, hi], sort, drop near-duplicates
  void finalize(double lo, double hi) {
    add(lo);
    add(hi);
    int m = 0;
    for (int k = 0; k < n; ++k) {
      double v = std::min(hi, std::max(lo, e[k]));
      e[m++] = v;
    }
    std::sort(e, e + m);
    int out = 0;
    for (int k = 0; k < m; ++k) {
      if (out == 0 || e[k] - e[out - 1] > 1e-13) e[out++] = e[k];
    }
    n = out;
  }
};

// Append GL-8 nodes for the i-interval [a, b] (a < b <= 0).  Weights carry
// the inclination measure: du on panels near the singular endpoint (u is the
// cosine coordinate, where the prior is uniform), p(i) di further out.
// `measure_f` divides weights by ln10 to integrate against
// f(i) = 10^(2i)/sqrt(1-10^(2i)) instead of the prior pdf.
void emit_panel(double a, double b, bool measure_f, Scratch& s) {
  const GaussRule& rule = gauss_rule_8();
  double scale = measure_f ? 1.0 / kLn10 : 1.0;
  if (a >= kUSpaceSplit) {
    double ua = u_of_i(b), ub = u_of_i(a);  // u decreases with i
    double mid = 0.5 * (ua + ub), half = 0.5 * (ub - ua);
    if (half <= 0.0) return;
    for (int q = 0; q < rule.n; ++q) {
      double u = mid + half * rule.nodes[q];
      s.node_i.push_back(i_of_u_interp(u));
      s.weight.push_back(rule.weights[q] * half * scale);
    }
  } else {
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int q = 0; q < rule.n; ++q) {
      double i = mid + half * rule.nodes[q];
      double e2i = std::exp(2.0 * kLn10 * i);
      double f = e2i / std::sqrt(1.0 - e2i);
      s.node_i.push_back(i);
      // f for the f-measure, ln10 * f = p(i) for the prior measure
      s.weight.push_back(rule.weights[q] * half * f * (measure_f ? 1.0 : kLn10));
    }
  }
}

void emit_panels(const Edges& edges, bool measure_f, Scratch& s) {
  for (int k = 0; k + 1 < edges.n; ++k) {
    double a = edges.e[k], b = edges.e[k + 1];
    if (b <= a) continue;
    if (a < kUSpaceSplit && b > kUSpaceSplit) continue;  // finalize() inserts the split
    emit_panel(a, b, measure_f, s);
  }
}

// log of sum of weight[q]*aux[q]*exp(phi[q]) with max-factoring; aux may be
// null (treated as 1).  Returns -inf for an empty or all-zero sum.
double log_sum(const Scratch& s, const double* aux) {
  std::size_t n = s.phi.size();
  if (n == 0) return -std::numeric_limits<double>::infinity();
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < n; ++q) mx = std::max(mx, s.phi[q]);
  if (!std::isfinite(mx)) return -std::numeric_limits<double>::infinity();
  thread_local std::vector<double> shifted, ex;
  shifted.resize(n);
  ex.resize(n);
  for (std::size_t q = 0; q < n; ++q) shifted[q] = s.phi[q] - mx;
  vexp(shifted.data(), ex.data(), n);
  double acc = 0.0;
  for (std::size_t q = 0; q < n; ++q) acc += s.weight[q] * (aux ? aux[q] : 1.0) * ex[q];
  if (!(acc > 0.0)) return -std::numeric_limits<double>::infinity();
  return mx + std::log(acc);
}

// ---------------------------------------------------------------------------
// Inverse model: log p(w~|m,d) = log \int p(i) G_sigma(t - i) di,
// t = w~ - (m + d - gamma)/beta.
// ---------------------------------------------------------------------------
double inverse_log_pdf(double t, double sigma) {
  if (t - kTailZ * sigma > 0.0) return -std::numeric_limits<double>::infinity();
  double lo = t - kTailZ * sigma;
  double hi = std::min(0.0, t + kTailZ * sigma);

  Edges edges;
  static const double kLadder[] = {-8.6, -6.0, -3.8, -2.2, -1.0, 0.0, 1.0, 2.2, 3.8, 6.0, 8.6};
  for (double k : kLadder) edges.add(t + k * sigma);
  edges.add(kUSpaceSplit);
  edges.finalize(lo, hi);

  Scratch& s = scratch();
  s.node_i.clear(); s.weight.clear();
  emit_panels(edges, /*measure_f=*/false, s);

  std::size_t n = s.node_i.size();
  if (n == 0) return -std::numeric_limits<double>::infinity();
  s.phi.resize(n);
  double inv2 = 0.5 / (sigma * sigma);
  for (std::size_t q = 0; q < n; ++q) {
    double z = t - s.node_i[q];
    s.phi[q] = -z * z * inv2;
  }
  double ls = log_sum(s, nullptr);
  return ls - std::log(sigma * std::sqrt(2.0 * kPi));
}

// ---------------------------------------------------------------------------
// Forward model.  Works in log space with f-measure weights; the constant
// sqrt(2)/(sqrt(pi) sigma_m) prefactor comes from the unnormalized mass
// Gaussian in the numerator against the unhalved erfc in the denominator.
// ---------------------------------------------------------------------------
struct ForwardParts {
  double log_num = -std::numeric_limits<double>::infinity();
  double log_den = -std::numeric_limits<double>::infinity();
};

// Numerator: \int f(i) exp(-(A - beta(w-i))^2/(2 sm^2)) S(beta(w-i)-v*) di
double forward_log_numerator(double A, double w, const ModelParams& p, double sm) {
  double beta = p.beta;
  double dom_hi = std::min(0.0, w - (p.v_star + kSchechterSupportLo) / beta);
  double dom_lo = w - (p.v_star + kSchechterSupportHi) / beta;
  if (!(dom_lo < dom_hi)) return -std::numeric_limits<double>::infinity();

  double sigma_i = sm / beta;
  double i_star = w - A / beta;  // Gaussian center in i

  Edges edges;
  double lo, hi;
  if (i_star >= dom_lo - kTailZ * sigma_i && i_star <= dom_hi + kTailZ * sigma_i) {
    static const double kLadder[] = {0.0, 1.0, -1.0, 2.2, -2.2, 3.8, -3.8, 6.0, -6.0, 8.6, -8.6};
    for (double k : kLadder) edges.add(i_star + k * sigma_i);
    lo = std::max(dom_lo, i_star - kTailZ * sigma_i);
    hi = std::min(dom_hi, i_star + kTailZ * sigma_i);
  } else {
    // Gaussian center outside the support: only a steep tail survives;
    // ladder with the local decay length at the nearest edge.
    double edge = i_star < dom_lo ? dom_lo : dom_hi;
    double sgn = i_star < dom_lo ? 1.0 : -1.0;
    double dist = std::fabs(edge - i_star);
    double phi_edge = 0.5 * dist * dist / (sigma_i * sigma_i);
    if (phi_edge > 760.0) return -std::numeric_limits<double>::infinity();
    double delta = sigma_i * sigma_i / dist;  // e-folds per unit i at the edge
    for (double k : {0.0, 0.5, 1.5, 4.0, 10.0, 22.0, 45.0}) edges.add(edge + sgn * k * delta);
    lo = std::max(dom_lo, std::min(edge, edge + sgn * 45.0 * delta));
    hi = std::min(dom_hi, std::max(edge, edge + sgn * 45.0 * delta));
  }
  static const double kXImages[] = {-3.5, -2.0, -1.0, 0.0, 0.75, 1.125, 1.3, 1.4, 1.5};
  for (double x : kXImages) edges.add(w - (x + p.v_star) / beta);
  edges.add(kUSpaceSplit);
  if (!(lo < hi)) return -std::numeric_limits<double>::infinity();
  edges.finalize(lo, hi);

  Scratch& s = scratch();
  s.node_i.clear(); s.weight.clear();
  emit_panels(edges, /*measure_f=*/true, s);
  std::size_t n = s.node_i.size();
  if (n == 0) return -std::numeric_limits<double>::infinity();

  s.phi.resize(n);
  s.aux.resize(n);
  double c1 = (p.alpha + 1.0) * kLn10;
  double inv2 = 0.5 / (sm * sm);
  for (std::size_t q = 0; q < n; ++q) {
    double x = beta * (w - s.node_i[q]) - p.v_star;
    s.aux[q] = kLn10 * x;  // exponent of 10^x
  }
  thread_local std::vector<double> e10;
  e10.resize(n);
  vexp(s.aux.data(), e10.data(), n);
  for (std::size_t q = 0; q < n; ++q) {
    double x = s.aux[q] / kLn10;
    double dm = A - beta * (w - s.node_i[q]);
    s.phi[q] = c1 * x - e10[q] - dm * dm * inv2;
  }
  return log_sum(s, nullptr);
}

// Denominator: \int f(i) erfc((L - beta(w-i))/(sqrt2 sm)) S(beta(w-i)-v*) di
// (erfc -> 2 when there is no selection).
double forward_log_denominator(double w, const ModelParams& p, double sm, bool step, double L) {
  double beta = p.beta;
  double dom_hi = std::min(0.0, w - (p.v_star + kSchechterSupportLo) / beta);
  double dom_lo = w - (p.v_star + kSchechterSupportHi) / beta;
  if (!(dom_lo < dom_hi)) return -std::numeric_limits<double>::infinity();

  Edges edges;
  static const double kXImages[] = {-3.5, -2.0, -0.75, 0.25, 0.875, 1.2, 1.375, 1.5};
  for (double x : kXImages) edges.add(w - (x + p.v_star) / beta);
  edges.add(kUSpaceSplit);

  double tau = 0.0, i_t = 0.0;
  if (step) {
    // erfc argument zeta = (beta*i - (beta*w - L)) / (sqrt2 sm); zeta rises
    // with i, saturating at 2 far below the limit and 0 far above.
    tau = std::sqrt(2.0) * sm / beta;  // i-interval per unit zeta
    i_t = w - L / beta;
    static const double kZLadder[] = {0.0, 1.5, -1.5, 3.5, -3.5, 6.2, -6.2};
    for (double k : kZLadder) edges.add(i_t + k * tau);
    // integrand vanishes once erfc underflows
    double zero_from = i_t + 27.2 * tau;
    edges.finalize(dom_lo, std::min(dom_hi, std::max(dom_lo, zero_from)));
  } else {
    edges.finalize(dom_lo, dom_hi);
  }

  Scratch& s = scratch();
  s.node_i.clear(); s.weight.clear();
  emit_panels(edges, /*measure_f=*/true, s);
  std::size_t n = s.node_i.size();
  if (n == 0) return -std::numeric_limits<double>::infinity();

  s.phi.resize(n);
  s.aux.resize(n);
  thread_local std::vector<double> erfcv;
  erfcv.resize(n);
  double c1 = (p.alpha + 1.0) * kLn10;
  for (std::size_t q = 0; q < n; ++q) {
    double x = beta * (w - s.node_i[q]) - p.v_star;
    s.aux[q] = kLn10 * x;
    if (step) {
      double zeta = (s.node_i[q] - i_t) / tau;
      erfcv[q] = zeta < -6.2 ? 2.0 : (zeta > 27.2 ? 0.0 : std::erfc(zeta));
    } else {
      erfcv[q] = 2.0;
    }
  }
  thread_local std::vector<double> e10;
  e10.resize(n);
  vexp(s.aux.data(), e10.data(), n);
  for (std::size_t q = 0; q < n; ++q) s.phi[q] = c1 * (s.aux[q] / kLn10) - e10[q];
  return log_sum(s, erfcv.data());
}

double forward_log_pdf(double m_tilde, double w, double d, const ModelParams& p,
                       const SelectionSpec& sel, double sm) {
  bool step = sel.kind == SelectionKind::StepInM;
  if (step && m_tilde < sel.m_l) return -std::numeric_limits<double>::infinity();
  double A = m_tilde + d - p.gamma;
  double L = step ? sel.m_l + d - p.gamma : 0.0;
  double ln_num = forward_log_numerator(A, w, p, sm);
  double ln_den = forward_log_denominator(w, p, sm, step, L);
  if (!std::isfinite(ln_den)) return -std::numeric_limits<double>::infinity();
  return std::log(std::sqrt(2.0) / (std::sqrt(kPi) * sm)) + ln_num - ln_den;
}

double forward_log_pdf_pinned(double m_tilde, double w, double d, const ModelParams& p,
                              const SelectionSpec& sel, double sm, double i0) {
  bool step = sel.kind == SelectionKind::StepInM;
  if (step && m_tilde < sel.m_l) return -std::numeric_limits<double>::infinity();
  double x = p.beta * (w - i0) - p.v_star;
  if (x <= kSchechterSupportLo || x >= kSchechterSupportHi)
    return -std::numeric_limits<double>::infinity();
  double mu = p.beta * (w - i0) + p.gamma - d;
  double z = (m_tilde - mu) / sm;
  double lp = -0.5 * z * z - std::log(sm * std::sqrt(2.0 * kPi));
  if (step) {
    double zeta = (sel.m_l - mu) / (std::sqrt(2.0) * sm);
    double norm = 0.5 * (zeta < -6.2 ? 2.0 : std::erfc(zeta));
    if (!(norm > 0.0)) return -std::numeric_limits<double>::infinity();
    lp -= std::log(norm);
  }
  return lp;
}

} // namespace

double conditional_pdf_inverse(double w_tilde, double m, double d, const ModelParams& params) {
  if (!(params.beta > 0.0)) throw std::domain_error("conditional_pdf_inverse: beta must be > 0");
  if (!(params.sigma_w > 0.0))
    throw std::domain_error("conditional_pdf_inverse: sigma_w must be > 0");
  double t = w_tilde - (m + d - params.gamma) / params.beta;
  return std::exp(inverse_log_pdf(t, params.sigma_w));
}

double conditional_pdf_forward(double m_tilde, double w, double d, const ModelParams& params,
                               const SelectionSpec& selection, const ForwardPdfOptions& options) {
  if (!(params.beta > 0.0)) throw std::domain_error("conditional_pdf_forward: beta must be > 0");
  if (!(params.sigma_m > 0.0))
    throw std::domain_error("conditional_pdf_forward: sigma_m must be > 0");
  double lp = options.pinned_inclination
                  ? forward_log_pdf_pinned(m_tilde, w, d, params, selection, params.sigma_m,
                                           *options.pinned_inclination)
                  : forward_log_pdf(m_tilde, w, d, params, selection, params.sigma_m);
  double v = std::exp(lp);
  if (std::isnan(v))
    throw std::runtime_error("conditional_pdf_forward: non-finite density (check grids/params)");
  return v;
}

namespace detail {

double forward_denominator(double w, double d, const ModelParams& params,
                           const SelectionSpec& selection) {
  bool step = selection.kind == SelectionKind::StepInM;
  double L = step ? selection.m_l + d - params.gamma : 0.0;
  double ld = forward_log_denominator(w, params, params.sigma_m, step, L);
  return 0.5 * std::exp(ld);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Dual-scatter model on the convolution grids.
//
// p(m~|w~,d) = sqrt2/(sqrt pi sm) * N/D with
//   N = \int dv Gm(A - beta v) S(beta v - v*) Psi(v - w~)
//   D = \int dv erfc((L - beta v)/(sqrt2 sm)) S(beta v - v*) Psi(v - w~)
//   Psi(tau) = \int f(i) Gw(tau + i) di,
// where Psi is shared by every record and computed once per parameter vector
// with the FFT convolution engine.
// ---------------------------------------------------------------------------

namespace {

// 4-point Lagrange interpolation weights at fractional offset fr in [0,1).
inline void cubic_weights(double fr, double c[4]) {
  double f0 = fr, f1 = fr - 1.0, f2 = fr + 1.0, f3 = fr - 2.0;
  c[0] = -f0 * f1 * f3 / 6.0;
  c[1] = f2 * f1 * f3 / 2.0;
  c[2] = -f0 * f2 * f3 / 2.0;
  c[3] = f0 * f2 * f1 / 6.0;
}

inline double dot(const double* a, const double* b, int n) {
  double acc = 0.0;
  for (int k = 0; k < n; ++k) acc += a[k] * b[k];
  return acc;
}

// W(t) = int p(i) Phi((t+i)/sigma) di, the prior CDF smoothed by the width
// kernel.  Above the kernel window Phi saturates at 1 and the integral is an
// exact prior mass; the transition strip uses the panel quadrature.
double prior_phi_integral(double t, double sigma) {
  if (sigma <= 1e-4 && std::fabs(t) > kTailZ * sigma) {
    // Kernel sharper than any structure of the prior CDF: W(t) -> P(-I <= t).
    if (t <= 0.0) return 0.0;
    return std::sqrt(-std::expm1(-2.0 * kLn10 * t));
  }
  double a = -t - kTailZ * sigma;
  double b = std::min(0.0, -t + kTailZ * sigma);
  if (b <= -40.0) return 0.0;
  double w = 0.0;
  if (a >= 0.0) return 0.0;  // Phi ~ 0 everywhere on i <= 0
  if (b < 0.0) w += 1.0 - inclination_prior_cdf(b);  // saturated region above b
  a = std::max(a, -40.0);
  if (a < b) {
    Edges edges;
    for (double k : {-8.6, -6.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 6.0, 8.6})
      edges.add(-t + k * sigma);
    edges.add(kUSpaceSplit);
    edges.finalize(a, b);
    Scratch& s = scratch();
    s.node_i.clear();
    s.weight.clear();
    emit_panels(edges, /*measure_f=*/false, s);
    double inv = 1.0 / (std::sqrt(2.0) * sigma);
    for (std::size_t q = 0; q < s.node_i.size(); ++q)
      w += s.weight[q] * 0.5 * std::erfc(-(t + s.node_i[q]) * inv);
  }
  return w;
}

// Exact average and first moment (about the cell center) of
// Psi(tau) = int p(i) G_sigma(tau + i) di over a lattice cell, used where an
// unresolved kernel meets the singular prior edge.  The moment comes from
// integrating W by parts with a Simpson estimate of its cell integral.
struct PsiCell {
  double avg = 0.0;
  double m1 = 0.0;
};
PsiCell exact_psi_cell(double tau_center, double sigma, double h) {
  double wl = prior_phi_integral(tau_center - 0.5 * h, sigma);
  double wm = prior_phi_integral(tau_center, sigma);
  double wr = prior_phi_integral(tau_center + 0.5 * h, sigma);
  PsiCell out;
  out.avg = (wr - wl) / h;
  out.m1 = h / 3.0 * (wl + wr - 2.0 * wm);
  return out;
}

// Gaussian samples on the lattice, pointwise when resolved, cell-averaged
// (exact erf differences) when sigma drops below 3 cells.
void gaussian_lattice_samples(double center, double sigma, double first, double h, int n,
                              double* out) {
  if (sigma >= 3.0 * h) {
    thread_local std::vector<double> arg;
    arg.resize(n);
    double inv2 = 0.5 / (sigma * sigma);
    for (int k = 0; k < n; ++k) {
      double z = first + k * h - center;
      arg[k] = -z * z * inv2;
    }
    vexp(arg.data(), out, n);
    double norm = 1.0 / (sigma * std::sqrt(2.0 * kPi));
    for (int k = 0; k < n; ++k) out[k] *= norm;
  } else {
    double inv = 1.0 / (std::sqrt(2.0) * sigma);
    double prev = 0.5 * std::erfc(-(first - 0.5 * h - center) * inv);
    for (int k = 0; k < n; ++k) {
      double cur = 0.5 * std::erfc(-(first + (k + 0.5) * h - center) * inv);
      out[k] = (cur - prev) / h;
      prev = cur;
    }
  }
}

} // namespace

class DualEvaluator {
 public:
  DualEvaluator(GridSpec grids, SelectionSpec sel) : grids_(std::move(grids)), sel_(sel) {}

  struct ThetaState {
    ModelParams p;
    double sm = 0.0, sw = 0.0;
    double v_lo = 0.0;
    int n_v = 0;
    std::vector<double> sch;       // S~ at v nodes
    std::vector<double> psi;       // Psi on the lattice, zero-padded
    long ell_min = 0;              // lattice index of psi[0]
    int half_g = 0;
    bool small_sigma_w = false;    // width kernel narrower than the lattice
    std::vector<double> den_rows;  // one row per distinct d
    std::vector<double> row_d;     // the d value of each row
  };

  ThetaState make_state(const ModelParams& p, std::span<const double> distinct_d,
                        bool use_fft = true) const {
    if (!(p.sigma_m > 0.0) || !(p.sigma_w > 0.0) || !(p.beta > 0.0))
      throw std::domain_error("dual model: needs beta, sigma_m, sigma_w > 0");
    ThetaState st;
    st.p = p;
    st.sm = p.sigma_m;
    st.sw = p.sigma_w;
    double h = grids_.spacing;

    st.v_lo = (p.v_star + kSchechterSupportLo) / p.beta;
    double v_hi = (p.v_star + kSchechterSupportHi) / p.beta;
    st.n_v = std::max(1, static_cast<int>(std::floor((v_hi - st.v_lo) / h)));

    st.sch.resize(st.n_v);
    {
      std::vector<double> arg(st.n_v), e10(st.n_v);
      double c1 = (p.alpha + 1.0) * kLn10;
      for (int j = 0; j < st.n_v; ++j) {
        double x = p.beta * (st.v_lo + (j + 0.5) * h) - p.v_star;
        arg[j] = kLn10 * x;
      }
      vexp(arg.data(), e10.data(), st.n_v);
      for (int j = 0; j < st.n_v; ++j) {
        double x = arg[j] / kLn10;
        st.sch[j] = std::exp(c1 * x - e10[j]);
      }
    }

    // Psi(tau) = int f(i) Gw(tau + i) di on the lattice.  For a resolved
    // kernel the prior cells enter through their (mass, m1, m2) moments
    // against (G, G', G''), keeping the singular edge cell second-order
    // exact; an unresolved kernel falls back to exact cell averages of G,
    // with the near-edge values patched per record.
    int n_i = grids_.n_i;
    st.half_g = static_cast<int>(std::ceil(kTailZ * st.sw / h)) + 1;
    st.small_sigma_w = st.sw < 3.0 * h;
    int n_g = 2 * st.half_g + 1;
    std::vector<double> conv;
    if (st.small_sigma_w) {
      std::vector<double> w0(n_i), g0(n_g);
      for (int j = 0; j < n_i; ++j) w0[j] = grids_.i_masses[n_i - 1 - j] / h;
      gaussian_lattice_samples(0.0, st.sw, -st.half_g * h, h, n_g, g0.data());
      conv = convolve(w0, g0, h, use_fft);
    } else {
      std::vector<double> w0(n_i), w1(n_i), w2(n_i);
      for (int j = 0; j < n_i; ++j) {
        w0[j] = grids_.i_masses[n_i - 1 - j] / h;
        w1[j] = grids_.i_m1[n_i - 1 - j] / h;
        w2[j] = 0.5 * grids_.i_m2[n_i - 1 - j] / h;
      }
      std::vector<double> g0(n_g), g1(n_g), g2(n_g);
      double norm = 1.0 / (st.sw * std::sqrt(2.0 * kPi));
      double inv_s2 = 1.0 / (st.sw * st.sw);
      for (int k = 0; k < n_g; ++k) {
        double y = (k - st.half_g) * h;
        double G = norm * std::exp(-0.5 * y * y * inv_s2);
        g0[k] = G;
        g1[k] = -y * inv_s2 * G;
        g2[k] = (y * y * inv_s2 - 1.0) * inv_s2 * G;
      }
      conv = convolve(w0, g0, h, use_fft);
      auto c1v = convolve(w1, g1, h, use_fft);
      auto c2v = convolve(w2, g2, h, use_fft);
      for (std::size_t k = 0; k < conv.size(); ++k) conv[k] += c1v[k] + c2v[k];
    }

    // conv[p] = Psi((p + 0.5 - half_g) h); embed in a zero-padded lattice
    // window that covers every v_j - w~ the catalog can request.
    long ell_lo = static_cast<long>(std::floor((st.v_lo - grids_.w_hi) / h)) + st.half_g - 4;
    long ell_hi = static_cast<long>(std::ceil((st.v_lo - grids_.w_lo) / h)) + st.half_g + st.n_v + 4;
    st.ell_min = ell_lo;
    st.psi.assign(static_cast<std::size_t>(ell_hi - ell_lo + 1), 0.0);
    for (long pidx = 0; pidx < static_cast<long>(conv.size()); ++pidx) {
      if (pidx >= ell_lo && pidx <= ell_hi)
        st.psi[static_cast<std::size_t>(pidx - ell_lo)] = conv[static_cast<std::size_t>(pidx)];
    }

    // Selection rows, one per distinct distance.
    st.row_d.assign(distinct_d.begin(), distinct_d.end());
    st.den_rows.resize(distinct_d.size() * static_cast<std::size_t>(st.n_v));
    for (std::size_t r = 0; r < distinct_d.size(); ++r) {
      double* row = st.den_rows.data() + r * st.n_v;
      fill_den_row(st, distinct_d[r], row);
    }
    return st;
  }

  static std::vector<double> convolve(std::span<const double> f, std::span<const double> g,
                                      double h, bool use_fft) {
    if (use_fft) return fft_convolve(f, g, h, h);
    std::vector<double> out(f.size() + g.size() - 1, 0.0);
    for (std::size_t a = 0; a < f.size(); ++a)
      for (std::size_t b = 0; b < g.size(); ++b) out[a + b] += f[a] * g[b] * h;
    return out;
  }

  void fill_den_row(const ThetaState& st, double d, double* row) const {
    double h = grids_.spacing;
    if (sel_.kind == SelectionKind::None) {
      for (int j = 0; j < st.n_v; ++j) row[j] = 2.0 * st.sch[j];
      return;
    }
    double L = sel_.m_l + d - st.p.gamma;
    double sv = st.sm / st.p.beta;           // erfc transition scale in v
    double inv = 1.0 / (std::sqrt(2.0) * sv);
    if (sv >= 3.0 * h) {
      for (int j = 0; j < st.n_v; ++j) {
        double zeta = (L / st.p.beta - (st.v_lo + (j + 0.5) * h)) * inv;
        double e = zeta < -6.2 ? 2.0 : (zeta > 27.2 ? 0.0 : std::erfc(zeta));
        row[j] = e * st.sch[j];
      }
    } else {
      // cell-averaged erfc via its antiderivative z erfc z - exp(-z^2)/sqrt(pi)
      auto anti = [&](double z) {
        if (z < -8.0) return 2.0 * z;
        if (z > 28.0) return 0.0;
        return z * std::erfc(z) - std::exp(-z * z) / std::sqrt(kPi);
      };
      double vc = L / st.p.beta;
      double prev = anti((vc - st.v_lo) * inv);
      for (int j = 0; j < st.n_v; ++j) {
        double cur = anti((vc - (st.v_lo + (j + 1) * h)) * inv);
        // integral of erfc over the cell = (prev - cur)/inv
        row[j] = (prev - cur) / (inv * h) * st.sch[j];
        prev = cur;
      }
    }
  }

  // Log conditional density of one record given a prepared state.
  double log_pdf(const ThetaState& st, double m_tilde, double w_tilde, double d,
                 const double* den_row) const {
    if (sel_.kind == SelectionKind::StepInM && m_tilde < sel_.m_l)
      return -std::numeric_limits<double>::infinity();
    double h = grids_.spacing;
    if (w_tilde < grids_.w_lo || w_tilde > grids_.w_hi)
      throw std::runtime_error("dual model: record width outside the grid span (w=" +
                               std::to_string(w_tilde) + ", grid [" + std::to_string(grids_.w_lo) +
                               ", " + std::to_string(grids_.w_hi) + "])");

    double base = (st.v_lo - w_tilde) / h + st.half_g;
    long j0 = static_cast<long>(std::floor(base));
    double fr = base - static_cast<double>(j0);
    double c[4];
    cubic_weights(fr, c);
    long off = j0 - 1 - st.ell_min;  // psi index of r = -1 at j = 0

    // Interpolated Psi at every node's tau, shared by numerator, denominator
    // and the small-sigma patch.
    thread_local std::vector<double> psi_b;
    psi_b.resize(st.n_v);
    {
      const double* pd = st.psi.data() + off;
      for (int j = 0; j < st.n_v; ++j)
        psi_b[j] = c[0] * pd[j] + c[1] * pd[j + 1] + c[2] * pd[j + 2] + c[3] * pd[j + 3];
    }
    double den = dot(den_row, psi_b.data(), st.n_v);

    double A = m_tilde + d - st.p.gamma;
    double vc = A / st.p.beta;
    double sv = st.sm / st.p.beta;
    int ja = std::max(0, static_cast<int>(std::floor((vc - kTailZ * sv - st.v_lo) / h)) - 1);
    int jb = std::min(st.n_v, static_cast<int>(std::ceil((vc + kTailZ * sv - st.v_lo) / h)) + 1);
    if (ja >= jb) return -std::numeric_limits<double>::infinity();

    thread_local std::vector<double> q;
    q.resize(jb - ja);
    gaussian_lattice_samples(vc, sv, st.v_lo + (ja + 0.5) * h, h, jb - ja, q.data());
    for (int j = 0; j < jb - ja; ++j) q[j] *= st.sch[ja + j];

    double num = dot(q.data(), psi_b.data() + ja, jb - ja);

    if (st.small_sigma_w) {
      // The lattice cannot resolve the width kernel; patch the nodes near
      // the tau = 0 prior edge with exact cell averages of Psi plus the
      // first-moment covariance against the integrand's in-cell slope.
      double h_w = grids_.spacing;
      double win = 16.0 * h_w + kTailZ * st.sw;
      int pa = std::max(0, static_cast<int>(std::floor((w_tilde - win - st.v_lo) / h_w)));
      int pb = std::min(st.n_v, static_cast<int>(std::ceil((w_tilde + win - st.v_lo) / h_w)) + 1);
      bool step = sel_.kind == SelectionKind::StepInM;
      double L_over_beta = step ? (sel_.m_l + d - st.p.gamma) / st.p.beta : 0.0;
      double inv_e = 1.0 / (std::sqrt(2.0) * sv);
      bool gm_resolved = sv >= 3.0 * h_w;
      for (int j = pa; j < pb; ++j) {
        double v = st.v_lo + (j + 0.5) * h_w;
        double tau = v - w_tilde;
        PsiCell cell = exact_psi_cell(tau, st.sw, h_w);
        double delta = cell.avg - psi_b[j];
        double m1h = cell.m1 / h_w;

        double x = st.p.beta * v - st.p.v_star;
        double sch_der = st.sch[j] * st.p.beta * kLn10 *
                         ((st.p.alpha + 1.0) - std::exp(kLn10 * x));
        double erfc_v = 2.0, erfc_der = 0.0;
        if (step) {
          double zeta = (L_over_beta - v) * inv_e;
          erfc_v = zeta < -6.2 ? 2.0 : (zeta > 27.2 ? 0.0 : std::erfc(zeta));
          erfc_der = inv_e * 2.0 / std::sqrt(kPi) * std::exp(-std::min(zeta * zeta, 700.0));
        }
        den += den_row[j] * delta + (erfc_der * st.sch[j] + erfc_v * sch_der) * m1h;
        if (j >= ja && j < jb) {
          num += q[j - ja] * delta;
          if (gm_resolved) {
            double gm = q[j - ja] / st.sch[j];
            double q_der = sch_der * gm + st.sch[j] * gm * (vc - v) / (sv * sv);
            num += q_der * m1h;
          }
        }
      }
    }
    if (!(den > 0.0) || !(num > 0.0)) return -std::numeric_limits<double>::infinity();

    // num carries the v-normalized mass Gaussian; the analytic form wants it
    // unnormalized against the unhalved erfc, hence the sv sqrt(2 pi) factor.
    return std::log(std::sqrt(2.0) / (std::sqrt(kPi) * st.sm)) + std::log(num) +
           std::log(sv * std::sqrt(2.0 * kPi)) - std::log(den);
  }

  const GridSpec& grids() const { return grids_; }
  const SelectionSpec& selection() const { return sel_; }

 private:
  GridSpec grids_;
  SelectionSpec sel_;
};

namespace detail {

double dual_log_pdf_fft(double m_tilde, double w_tilde, double d, const ModelParams& params,
                        const SelectionSpec& selection, const GridSpec& grids) {
  DualEvaluator ev(grids, selection);
  double dd[1] = {d};
  auto st = ev.make_state(params, std::span<const double>(dd, 1), true);
  return ev.log_pdf(st, m_tilde, w_tilde, d, st.den_rows.data());
}

double dual_log_pdf_direct(double m_tilde, double w_tilde, double d, const ModelParams& params,
                           const SelectionSpec& selection, const GridSpec& grids) {
  // Same quadrature as the FFT path, with the inner inclination integral
  // summed explicitly per width node: O(n_i * n_v) per record.
  if (selection.kind == SelectionKind::StepInM && m_tilde < selection.m_l)
    return -std::numeric_limits<double>::infinity();
  double h = grids.spacing;
  double beta = params.beta, sm = params.sigma_m, sw = params.sigma_w;
  double v_lo = (params.v_star + kSchechterSupportLo) / beta;
  double v_hi = (params.v_star + kSchechterSupportHi) / beta;
  int n_v = std::max(1, static_cast<int>(std::floor((v_hi - v_lo) / h)));
  int n_i = grids.n_i;

  double c1 = (params.alpha + 1.0) * kLn10;
  double A = m_tilde + d - params.gamma;
  double L = selection.m_l + d - params.gamma;
  double sv = sm / beta;
  double inv_erfc = 1.0 / (std::sqrt(2.0) * sv);

  std::vector<double> psi_dir(n_v, 0.0);
  std::vector<double> arg(n_i), ex(n_i);
  bool pointwise = sw >= 3.0 * h;
  double gnorm = 1.0 / (sw * std::sqrt(2.0 * kPi));
  double inv_s2 = 1.0 / (sw * sw);
  double win = 16.0 * h + kTailZ * sw;
  std::vector<double> psi_m1(n_v, 0.0);
  for (int j = 0; j < n_v; ++j) {
    double tau = v_lo + (j + 0.5) * h - w_tilde;
    if (pointwise) {
      for (int l = 0; l < n_i; ++l) {
        double z = tau + grids.i_nodes[l];
        arg[l] = -0.5 * z * z * inv_s2;
      }
      vexp(arg.data(), ex.data(), n_i);
      double acc = 0.0;
      for (int l = 0; l < n_i; ++l) {
        double z = tau + grids.i_nodes[l];
        double G = gnorm * ex[l];
        double G1 = -z * inv_s2 * G;
        double G2 = (z * z * inv_s2 - 1.0) * inv_s2 * G;
        acc += grids.i_masses[l] * G + grids.i_m1[l] * G1 + 0.5 * grids.i_m2[l] * G2;
      }
      psi_dir[j] = acc;
    } else if (std::fabs(tau) <= win) {
      PsiCell cell = exact_psi_cell(tau, sw, h);
      psi_dir[j] = cell.avg;
      psi_m1[j] = cell.m1 / h;
    } else {
      double inv = 1.0 / (std::sqrt(2.0) * sw);
      double acc = 0.0;
      for (int l = 0; l < n_i; ++l) {
        double zl = (tau + grids.i_nodes[l] - 0.5 * h) * inv;
        double zr = (tau + grids.i_nodes[l] + 0.5 * h) * inv;
        acc += grids.i_masses[l] * 0.5 * (std::erf(zr) - std::erf(zl)) / h;
      }
      psi_dir[j] = acc;
    }
  }

  double num = 0.0, den = 0.0;
  bool gm_resolved = sv >= 3.0 * h;
  for (int j = 0; j < n_v; ++j) {
    double v = v_lo + (j + 0.5) * h;
    double x = beta * v - params.v_star;
    double e10 = std::exp(kLn10 * x);
    double sch = std::exp(c1 * x - e10);
    double zm = (A - beta * v) / sm;
    double gm = std::exp(-0.5 * zm * zm);
    double e, e_der = 0.0;
    if (selection.kind == SelectionKind::None) {
      e = 2.0;
    } else {
      double zeta = (L / beta - v) * inv_erfc;
      e = zeta < -6.2 ? 2.0 : (zeta > 27.2 ? 0.0 : std::erfc(zeta));
      e_der = inv_erfc * 2.0 / std::sqrt(kPi) * std::exp(-std::min(zeta * zeta, 700.0));
    }
    num += sch * gm * psi_dir[j];
    den += sch * e * psi_dir[j];
    if (psi_m1[j] != 0.0) {
      double sch_der = sch * beta * kLn10 * ((params.alpha + 1.0) - e10);
      den += (e_der * sch + e * sch_der) * psi_m1[j];
      if (gm_resolved) {
        double gm_der = gm * beta * zm / sm;
        num += (sch_der * gm + sch * gm_der) * psi_m1[j];
      }
    }
  }
  if (!(num > 0.0) || !(den > 0.0)) return -std::numeric_limits<double>::infinity();
  return std::log(std::sqrt(2.0) / (std::sqrt(kPi) * sm)) + std::log(num) - std::log(den);
}

} // namespace detail

double conditional_pdf_dual(double m_tilde, double w_tilde, double d, const ModelParams& params,
                            const SelectionSpec& selection, int n_nodes) {
  CatalogSummary summary{w_tilde, w_tilde, 1};
  GridSpec grids = build_grids(summary, std::max(params.sigma_w, 0.01), n_nodes);
  double lp = detail::dual_log_pdf_fft(m_tilde, w_tilde, d, params, selection, grids);
  double v = std::exp(lp);
  if (std::isnan(v))
    throw std::runtime_error("conditional_pdf_dual: non-finite density (check grids/params)");
  return v;
}

// ---------------------------------------------------------------------------
// Catalog-level likelihood
// ---------------------------------------------------------------------------

LikelihoodContext LikelihoodContext::build(std::vector<GalaxyRecord> catalog,
                                           SelectionSpec selection, ModelKind kind,
                                           int grid_nodes, int threads) {
  if (catalog.empty()) throw std::invalid_argument("LikelihoodContext: empty catalog");
  LikelihoodContext ctx;
  for (const auto& r : catalog) {
    if (!selection.passes(r.m_tilde))
      throw std::invalid_argument("LikelihoodContext: record below the selection limit (m=" +
                                  std::to_string(r.m_tilde) + ")");
    if (r.sigma_em || r.sigma_ew) ctx.has_per_source_errors = true;
  }
  ctx.selection = selection;
  ctx.kind = kind;
  ctx.threads = threads;

  double w_min = catalog.front().w_tilde, w_max = w_min;
  for (const auto& r : catalog) {
    w_min = std::min(w_min, r.w_tilde);
    w_max = std::max(w_max, r.w_tilde);
  }
  std::vector<double> ds;
  ds.reserve(catalog.size());
  for (const auto& r : catalog) ds.push_back(r.d);
  std::sort(ds.begin(), ds.end());
  ds.erase(std::unique(ds.begin(), ds.end()), ds.end());
  ctx.distinct_d = std::move(ds);

  if (kind == ModelKind::DualScatter) {
    // Grid spans must cover the data plus guard bands at the largest width
    // dispersion the priors allow.
    ctx.grids = build_grids(CatalogSummary{w_min, w_max, catalog.size()}, 0.1, grid_nodes);
    ctx.dual = std::make_shared<DualEvaluator>(ctx.grids, selection);
  }
  ctx.catalog = std::move(catalog);
  return ctx;
}

namespace {

double reduce_terms(std::vector<double>& terms, int* clamped) {
  int n_clamped = 0;
  for (double& t : terms) {
    if (std::isnan(t))
      throw std::runtime_error("log_likelihood: NaN record term (defect)");
    if (!(t > kLogClamp)) {
      t = kLogClamp;
      ++n_clamped;
    }
  }
  // Canonical reduction order: sort then compensated summation, so the value
  // is identical under record permutation and any thread count.
  std::sort(terms.begin(), terms.end());
  double sum = 0.0, comp = 0.0;
  for (double t : terms) {
    double y = t - comp;
    double s = sum + y;
    comp = (s - sum) - y;
    sum = s;
  }
  if (clamped) *clamped = n_clamped;
  return sum;
}

} // namespace

LogLikeResult log_likelihood_detailed(const LikelihoodContext& ctx, const ModelParams& params) {
  const auto& recs = ctx.catalog;
  std::vector<double> terms(recs.size());

#ifdef _OPENMP
  int nthreads = ctx.threads > 0 ? ctx.threads : omp_get_max_threads();
#endif

  switch (ctx.kind) {
    case ModelKind::Inverse: {
      if (!(params.sigma_w > 0.0) || !(params.beta > 0.0))
        throw std::domain_error("log_likelihood(inverse): needs beta, sigma_w > 0");
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nthreads)
#endif
      for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(recs.size()); ++k) {
        const auto& r = recs[k];
        double sw = r.sigma_ew ? std::hypot(params.sigma_w, *r.sigma_ew) : params.sigma_w;
        double t = r.w_tilde - (r.m_tilde + r.d - params.gamma) / params.beta;
        terms[k] = inverse_log_pdf(t, sw) ;
      }
      break;
    }
    case ModelKind::Forward: {
      if (!(params.sigma_m > 0.0) || !(params.beta > 0.0))
        throw std::domain_error("log_likelihood(forward): needs beta, sigma_m > 0");
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nthreads)
#endif
      for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(recs.size()); ++k) {
        const auto& r = recs[k];
        double sm = r.sigma_em ? std::hypot(params.sigma_m, *r.sigma_em) : params.sigma_m;
        terms[k] = forward_log_pdf(r.m_tilde, r.w_tilde, r.d, params, ctx.selection, sm);
      }
      break;
    }
    case ModelKind::DualScatter: {
      if (!ctx.dual) throw std::logic_error("log_likelihood(dual): context built for another kind");
      if (ctx.has_per_source_errors) {
        // Heteroscedastic path: per-record state (no row sharing).
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nthreads)
#endif
        for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(recs.size()); ++k) {
          const auto& r = recs[k];
          ModelParams pk = params;
          if (r.sigma_em) pk.sigma_m = std::hypot(params.sigma_m, *r.sigma_em);
          if (r.sigma_ew) pk.sigma_w = std::hypot(params.sigma_w, *r.sigma_ew);
          terms[k] = detail::dual_log_pdf_fft(r.m_tilde, r.w_tilde, r.d, pk, ctx.selection,
                                              ctx.grids);
        }
      } else {
        auto st = ctx.dual->make_state(params, ctx.distinct_d);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nthreads)
#endif
        for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(recs.size()); ++k) {
          const auto& r = recs[k];
          auto it = std::lower_bound(st.row_d.begin(), st.row_d.end(), r.d);
          std::size_t row = static_cast<std::size_t>(it - st.row_d.begin());
          terms[k] = ctx.dual->log_pdf(st, r.m_tilde, r.w_tilde, r.d,
                                       st.den_rows.data() + row * st.n_v);
        }
      }
      break;
    }
  }

  LogLikeResult res;
  res.value = reduce_terms(terms, &res.clamped);
  return res;
}

double log_likelihood(const LikelihoodContext& ctx, const ModelParams& params) {
  return log_likelihood_detailed(ctx, params).value;
}

} // namespace tfr
