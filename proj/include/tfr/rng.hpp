#pragma once

#include <array>
#include <cstdint>

namespace tfr {

// Philox4x64-10 counter-based generator (Salmon et al. 2011 constants).
// A (counter, key) pair maps to four independent 64-bit words; streams are
// selected purely through the key/counter layout, so any consumer can derive
// a private stream from (seed, stream id) and draw by bumping the counter.
// This keeps output independent of evaluation order and thread count.
struct Philox4x64 {
  using Counter = std::array<std::uint64_t, 4>;
  using Key = std::array<std::uint64_t, 2>;

  static Counter block(Counter ctr, Key key);
};

// Map a 64-bit word to a double in [0, 1) or (0, 1].
double u64_to_unit(std::uint64_t x);
double u64_to_unit_pos(std::uint64_t x);

// Box-Muller pair from two uniforms, u1 in (0, 1], u2 in [0, 1).
std::array<double, 2> box_muller(double u1, double u2);

// Sequential convenience stream over a fixed key: word n of the stream is
// block({n/4, substream, 0, 0})[n%4].
class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0)
      : key_{seed, stream}, substream_(substream) {}

  std::uint64_t next_u64();
  double next_unit() { return u64_to_unit(next_u64()); }
  double next_unit_pos() { return u64_to_unit_pos(next_u64()); }
  std::array<double, 2> next_normal_pair();

 private:
  Philox4x64::Key key_;
  std::uint64_t substream_ = 0;
  std::uint64_t block_index_ = 0;
  int word_ = 4;
  Philox4x64::Counter buf_{};
};

} // namespace tfr
