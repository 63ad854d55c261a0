#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "tfr/rng.hpp"

using namespace tfr;

namespace {

// KS distance of a sample against an analytic CDF.
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

} // namespace

TEST_SUITE("rng") {

TEST_CASE("philox blocks are deterministic and stream-separated") {
  auto a = Philox4x64::block({1, 2, 3, 4}, {5, 6});
  auto b = Philox4x64::block({1, 2, 3, 4}, {5, 6});
  CHECK(a == b);
  auto c = Philox4x64::block({1, 2, 3, 4}, {5, 7});
  CHECK(a != c);
  auto d = Philox4x64::block({2, 2, 3, 4}, {5, 6});
  CHECK(a != d);

  PhiloxStream s1(42, 0), s2(42, 0), s3(42, 1);
  for (int k = 0; k < 100; ++k) {
    auto x = s1.next_u64();
    CHECK(x == s2.next_u64());
    CHECK(x != s3.next_u64());
  }
}

TEST_CASE("uniform output passes a KS test") {
  PhiloxStream s(2024, 7);
  std::vector<double> u(100000);
  for (auto& v : u) v = s.next_unit();
  double d = ks_distance(u, [](double x) { return std::clamp(x, 0.0, 1.0); });
  CHECK(d < 1.63 / std::sqrt(100000.0));  // 1% level
}

TEST_CASE("box-muller normals: moments and KS") {
  PhiloxStream s(77, 3);
  std::size_t n = 100000;
  std::vector<double> z;
  z.reserve(2 * n);
  for (std::size_t k = 0; k < n; ++k) {
    auto p = s.next_normal_pair();
    z.push_back(p[0]);
    z.push_back(p[1]);
  }
  double mean = 0.0, var = 0.0;
  for (double v : z) mean += v;
  mean /= static_cast<double>(z.size());
  for (double v : z) var += (v - mean) * (v - mean);
  var /= static_cast<double>(z.size() - 1);
  CHECK(std::fabs(mean) < 4.0 / std::sqrt(static_cast<double>(z.size())));
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
  double d = ks_distance(z, [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); });
  CHECK(d < 1.63 / std::sqrt(static_cast<double>(z.size())));
}

TEST_CASE("unit mappers stay in range") {
  CHECK(u64_to_unit(0) == 0.0);
  CHECK(u64_to_unit(~0ULL) < 1.0);
  CHECK(u64_to_unit_pos(0) > 0.0);
  CHECK(u64_to_unit_pos(~0ULL) == 1.0);
}

} // TEST_SUITE
