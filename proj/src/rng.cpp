#include "tfr/rng.hpp"

#include <cmath>

#include "tfr/constants.hpp"

namespace tfr {

namespace {

constexpr std::uint64_t kM0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kM1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kW0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kW1 = 0xBB67AE8584CAA73BULL;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
  unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<std::uint64_t>(p >> 64);
  lo = static_cast<std::uint64_t>(p);
}

} // namespace

Philox4x64::Counter Philox4x64::block(Counter c, Key k) {
  for (int round = 0; round < 10; ++round) {
    std::uint64_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, c[0], hi0, lo0);
    mulhilo(kM1, c[2], hi1, lo1);
    c = Counter{hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kW0;
    k[1] += kW1;
  }
  return c;
}

double u64_to_unit(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

double u64_to_unit_pos(std::uint64_t x) {
  return static_cast<double>((x >> 11) + 1) * 0x1.0p-53;
}

std::array<double, 2> box_muller(double u1, double u2) {
  double r = std::sqrt(-2.0 * std::log(u1));
  double ang = 2.0 * kPi * u2;
  return {r * std::cos(ang), r * std::sin(ang)};
}

std::uint64_t PhiloxStream::next_u64() {
  if (word_ == 4) {
    buf_ = Philox4x64::block({block_index_, substream_, 0, 0}, key_);
    ++block_index_;
    word_ = 0;
  }
  return buf_[word_++];
}

std::array<double, 2> PhiloxStream::next_normal_pair() {
  double u1 = next_unit_pos();
  double u2 = next_unit();
  return box_muller(u1, u2);
}

} // namespace tfr
