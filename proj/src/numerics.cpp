#include "tfr/numerics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>

#include "tfr/constants.hpp"

namespace tfr {

namespace {

constexpr double kInvLn2 = 1.44269504088896340735992468100189214;
constexpr double kLn2Hi = 6.93147180369123816490e-01;  // low 32 bits zero
constexpr double kLn2Lo = 1.90821492927058770002e-10;
constexpr double kShift = 6755399441055744.0;  // 1.5 * 2^52
constexpr double kSqrtPi = 1.77245385090551602729816748334114518;

// exp core, branchless.  Valid for x in [-745, 709].
inline double exp_core(double x) {
  double kd = x * kInvLn2 + kShift;
  std::int64_t n = std::bit_cast<std::int64_t>(kd) - std::bit_cast<std::int64_t>(kShift);
  kd -= kShift;
  double r = (x - kd * kLn2Hi) - kd * kLn2Lo;

  // Taylor series to degree 13; |r| <= 0.3466 keeps truncation below 1 ulp.
  double p = 1.0 / 6227020800.0;
  p = p * r + 1.0 / 479001600.0;
  p = p * r + 1.0 / 39916800.0;
  p = p * r + 1.0 / 3628800.0;
  p = p * r + 1.0 / 362880.0;
  p = p * r + 1.0 / 40320.0;
  p = p * r + 1.0 / 5040.0;
  p = p * r + 1.0 / 720.0;
  p = p * r + 1.0 / 120.0;
  p = p * r + 1.0 / 24.0;
  p = p * r + 1.0 / 6.0;
  p = p * r + 0.5;
  p = p * r + 1.0;
  p = p * r + 1.0;

  // 2^n in two lossless factors so subnormal results round in hardware.
  std::int64_t n1 = n >> 1;
  std::int64_t n2 = n - n1;
  double s1 = std::bit_cast<double>((n1 + 1023) << 52);
  double s2 = std::bit_cast<double>((n2 + 1023) << 52);
  return p * s1 * s2;
}

} // namespace

void vexp(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double xi = x[i];
    double xc = xi < -745.0 ? -745.0 : xi;
    xc = xc > 709.0 ? 709.0 : xc;
    double v = exp_core(xc);
    v = xi < -745.0 ? 0.0 : v;
    v = xi > 709.0 ? std::numeric_limits<double>::infinity() : v;
    out[i] = v;
  }
}

double fast_exp(double x) {
  double out;
  vexp(&x, &out, 1);
  return out;
}

namespace {

// A&S 7.1.14: sqrt(pi) exp(x^2) erfc(x) = 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
double erfcx_cf(double x) {
  const double tiny = 1e-300;
  double f = x, c = x, d = 0.0;
  for (int k = 1; k < 300; ++k) {
    double a = 0.5 * k;
    d = x + a * d;
    if (d == 0.0) d = tiny;
    d = 1.0 / d;
    c = x + a / c;
    if (c == 0.0) c = tiny;
    double delta = c * d;
    f *= delta;
    if (std::fabs(delta - 1.0) < 1e-17) break;
  }
  return 1.0 / (kSqrtPi * f);
}

// exp(x^2) with the argument squared in double-double to avoid the
// x^2-amplified rounding of a naive exp(x*x).
inline double exp_sq(double x) {
  double h = x * x;
  double l = std::fma(x, x, -h);
  double e = std::exp(h);
  return e + e * l;
}

} // namespace

double erfc_scaled(double x) {
  if (x >= 6.5) return erfcx_cf(x);
  if (x > -6.5) {
    double h = x * x;
    double l = std::fma(x, x, -h);
    double e = std::erfc(x) * std::exp(h);
    return e + e * l;
  }
  // erfcx(-y) = 2 exp(y^2) - erfcx(y); overflows to +inf below x ~ -26.6.
  return 2.0 * exp_sq(x) - erfcx_cf(-x);
}

namespace {

const double kGl8Nodes[4] = {0.1834346424956498049394761,
                             0.5255324099163289858177390,
                             0.7966664774136267395915539,
                             0.9602898564975362316835609};
const double kGl8Weights[4] = {0.3626837833783619829651504,
                               0.3137066458778872873379622,
                               0.2223810344533744705443560,
                               0.1012285362903762591525314};

const double kGl12Nodes[6] = {0.1252334085114689154724414, 0.3678314989981801937526915,
                              0.5873179542866174472967024, 0.7699026741943046870368938,
                              0.9041172563704748566784659, 0.9815606342467192506905491};
const double kGl12Weights[6] = {0.2491470458134027850005624, 0.2334925365383548087608499,
                                0.2031674267230659217490645, 0.1600783285433462263346525,
                                0.1069393259953184309602547, 0.0471753363865118271946160};

const double kGl16Nodes[8] = {0.0950125098376374401853193, 0.2816035507792589132304605,
                              0.4580167776572273863424194, 0.6178762444026437484466718,
                              0.7554044083550030338951012, 0.8656312023878317438804679,
                              0.9445750230732325760779884, 0.9894009349916499325961542};
const double kGl16Weights[8] = {0.1894506104550684962853967, 0.1826034150449235888667637,
                                0.1691565193950025381893121, 0.1495959888165767320815017,
                                0.1246289712555338720524763, 0.0951585116824927848099251,
                                0.0622535239386478928628438, 0.0271524594117540948517806};

// Full symmetric tables, negative nodes first.
template <int N>
struct FullRule {
  double nodes[N];
  double weights[N];
  FullRule(const double* half_nodes, const double* half_weights) {
    for (int k = 0; k < N / 2; ++k) {
      nodes[k] = -half_nodes[N / 2 - 1 - k];
      weights[k] = half_weights[N / 2 - 1 - k];
      nodes[N / 2 + k] = half_nodes[k];
      weights[N / 2 + k] = half_weights[k];
    }
  }
};

} // namespace

const GaussRule& gauss_rule_8() {
  static const FullRule<8> full(kGl8Nodes, kGl8Weights);
  static const GaussRule rule{full.nodes, full.weights, 8};
  return rule;
}

const GaussRule& gauss_rule_12() {
  static const FullRule<12> full(kGl12Nodes, kGl12Weights);
  static const GaussRule rule{full.nodes, full.weights, 12};
  return rule;
}

const GaussRule& gauss_rule_16() {
  static const FullRule<16> full(kGl16Nodes, kGl16Weights);
  static const GaussRule rule{full.nodes, full.weights, 16};
  return rule;
}

namespace {

struct Twiddles {
  std::vector<double> wr, wi;  // cos(2 pi k / n), -sin(2 pi k / n), k < n/2
};

const Twiddles& twiddles_for(std::size_t n) {
  static std::map<std::size_t, Twiddles> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  Twiddles tw;
  tw.wr.resize(n / 2);
  tw.wi.resize(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    double ang = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
    tw.wr[k] = std::cos(ang);
    tw.wi[k] = std::sin(ang);
  }
  return cache.emplace(n, std::move(tw)).first->second;
}

} // namespace

void fft_pow2(double* re, double* im, std::size_t n, bool inverse) {
  if (n == 0 || (n & (n - 1)) != 0)
    throw std::invalid_argument("fft_pow2: size must be a power of two, got " + std::to_string(n));
  if (n == 1) return;

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }

  const Twiddles& tw = twiddles_for(n);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    std::size_t half = len >> 1;
    std::size_t stride = n / len;
    for (std::size_t base = 0; base < n; base += len) {
      for (std::size_t k = 0; k < half; ++k) {
        double wr = tw.wr[k * stride];
        double wi = inverse ? -tw.wi[k * stride] : tw.wi[k * stride];
        std::size_t a = base + k, b = base + k + half;
        double tr = re[b] * wr - im[b] * wi;
        double ti = re[b] * wi + im[b] * wr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
      }
    }
  }

  if (inverse) {
    double s = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      re[i] *= s;
      im[i] *= s;
    }
  }
}

std::vector<double> fft_convolve(std::span<const double> f, std::span<const double> g,
                                 double f_spacing, double g_spacing) {
  if (f.empty() || g.empty())
    throw std::invalid_argument("fft_convolve: empty input");
  if (!(f_spacing > 0.0) || f_spacing != g_spacing)
    throw std::invalid_argument("fft_convolve: mismatched or invalid spacing");

  std::size_t out_len = f.size() + g.size() - 1;
  std::size_t n = 1;
  while (n < out_len) n <<= 1;

  // Pack both real sequences into one complex transform.
  std::vector<double> re(n, 0.0), im(n, 0.0);
  std::copy(f.begin(), f.end(), re.begin());
  std::copy(g.begin(), g.end(), im.begin());
  fft_pow2(re.data(), im.data(), n, false);

  // F[k] = (Z[k] + conj(Z[n-k]))/2, G[k] = (Z[k] - conj(Z[n-k]))/(2i);
  // overwrite with H = F*G, which is Hermitian.
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::size_t nk = (n - k) & (n - 1);
    double zr = re[k], zi = im[k];
    double yr = re[nk], yi = im[nk];
    double fr = 0.5 * (zr + yr), fi = 0.5 * (zi - yi);
    double gr = 0.5 * (zi + yi), gi = -0.5 * (zr - yr);
    double hr = fr * gr - fi * gi;
    double hi = fr * gi + fi * gr;
    re[k] = hr;
    im[k] = hi;
    re[nk] = hr;
    im[nk] = -hi;
  }
  fft_pow2(re.data(), im.data(), n, true);

  std::vector<double> out(out_len);
  for (std::size_t j = 0; j < out_len; ++j) out[j] = re[j] * f_spacing;
  return out;
}

double inclination_prior_pdf(double i) {
  if (i > 0.0) throw std::domain_error("inclination_prior_pdf: i must be <= 0");
  if (i == 0.0) return std::numeric_limits<double>::infinity();
  double e2i = std::exp(2.0 * kLn10 * i);  // 10^(2i)
  return kLn10 * e2i / std::sqrt(-std::expm1(2.0 * kLn10 * i));
}

double inclination_prior_cdf(double i) {
  if (i >= 0.0) return 1.0;
  return 1.0 - std::sqrt(-std::expm1(2.0 * kLn10 * i));
}

double inclination_cell_mass(double a, double b) {
  return inclination_prior_cdf(b) - inclination_prior_cdf(a);
}

double u_of_i(double i) {
  if (i >= 0.0) return 0.0;
  return std::sqrt(-std::expm1(2.0 * kLn10 * i));
}

double i_of_u(double u) {
  return 0.5 * std::log1p(-u * u) / kLn10;
}

namespace {

// Hermite table of i(u) on [0, u_of_i(-1)].
struct IOfUTable {
  static constexpr int kN = 65536;
  double u_max;
  double du, inv_du;
  std::vector<double> val, der;
  IOfUTable() : val(kN + 1), der(kN + 1) {
    u_max = u_of_i(-1.0);
    du = u_max / kN;
    inv_du = 1.0 / du;
    for (int k = 0; k <= kN; ++k) {
      double u = k * du;
      val[k] = i_of_u(u);
      der[k] = -u / (kLn10 * (1.0 - u * u));
    }
  }
};

const IOfUTable& i_of_u_table() {
  static const IOfUTable table;
  return table;
}

} // namespace

double i_of_u_interp(double u) {
  const IOfUTable& t = i_of_u_table();
  if (u <= 0.0) return 0.0;
  if (u >= t.u_max) return i_of_u(u);
  double s = u * t.inv_du;
  int k = static_cast<int>(s);
  if (k >= IOfUTable::kN) k = IOfUTable::kN - 1;
  double x = s - k;
  double x2 = x * x;
  double h00 = (1.0 + 2.0 * x) * (1.0 - x) * (1.0 - x);
  double h10 = x * (1.0 - x) * (1.0 - x);
  double h01 = x2 * (3.0 - 2.0 * x);
  double h11 = x2 * (x - 1.0);
  return h00 * t.val[k] + h10 * t.du * t.der[k] + h01 * t.val[k + 1] + h11 * t.du * t.der[k + 1];
}

double default_i_min() {
  static const double v = std::log10(std::sin(kPi / 180.0));
  return v;
}

GridSpec build_grids(const CatalogSummary& summary, double max_sigma_w, int n_nodes) {
  if (summary.n_records == 0)
    throw std::invalid_argument("build_grids: empty catalog");
  if (n_nodes <= 0 || (n_nodes & (n_nodes - 1)) != 0)
    throw std::invalid_argument("build_grids: n_nodes must be a power of two, got " +
                                std::to_string(n_nodes));

  GridSpec g;
  g.n_i = n_nodes;
  g.i_min = default_i_min();
  g.spacing = -g.i_min / n_nodes;
  double guard = -g.i_min;
  g.w_lo = summary.w_min - 5.0 * max_sigma_w - guard;
  g.w_hi = summary.w_max + 5.0 * max_sigma_w + guard;

  double extent_nodes = (g.w_hi - g.w_lo) / g.spacing;
  constexpr double kMaxNodes = 1 << 26;
  if (extent_nodes > kMaxNodes)
    throw std::runtime_error("build_grids: width extent " + std::to_string(g.w_hi - g.w_lo) +
                             " dex needs " + std::to_string(extent_nodes) +
                             " nodes at spacing " + std::to_string(g.spacing) +
                             ", over the budget of " + std::to_string(kMaxNodes));

  g.i_nodes.resize(n_nodes);
  g.i_masses.resize(n_nodes);
  g.i_m1.resize(n_nodes);
  g.i_m2.resize(n_nodes);
  const GaussRule& rule = gauss_rule_16();
  for (int j = 0; j < n_nodes; ++j) {
    double left = g.i_min + j * g.spacing;
    double right = (j + 1 == n_nodes) ? 0.0 : g.i_min + (j + 1) * g.spacing;
    double mid = g.i_min + (j + 0.5) * g.spacing;
    g.i_nodes[j] = mid;
    g.i_masses[j] = inclination_cell_mass(left, right);
    // Prior moments in the cosine coordinate, where the measure is uniform
    // and the integrand i(u) - mid is smooth even in the edge cell.
    double ua = u_of_i(right), ub = u_of_i(left);
    double umid = 0.5 * (ua + ub), uhalf = 0.5 * (ub - ua);
    double m1 = 0.0, m2 = 0.0;
    for (int q = 0; q < rule.n; ++q) {
      double di = i_of_u(umid + uhalf * rule.nodes[q]) - mid;
      m1 += rule.weights[q] * di;
      m2 += rule.weights[q] * di * di;
    }
    g.i_m1[j] = m1 * uhalf;
    g.i_m2[j] = m2 * uhalf;
  }
  return g;
}

} // namespace tfr
