#pragma once

// Counter-based random numbers. Every draw is a pure function of
// (seed, replica, level, index, draw#), so pools can be filled in any order
// or thread layout and still come out bit-identical.

#include <array>
#include <cstdint>

namespace hpin {

/// Philox4x32 with 10 rounds.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key) {
    ctr = round(ctr, key);
    for (int r = 1; r < 10; ++r) {
      key[0] += 0x9E3779B9u;
      key[1] += 0xBB67AE85u;
      ctr = round(ctr, key);
    }
    return ctr;
  }

 private:
  static Counter round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c[0];
    const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// Both 64-bit words of the first block for a stream key.
inline std::array<std::uint64_t, 2> philox_pair(std::uint64_t seed, std::uint32_t replica,
                                                std::uint32_t level, std::uint32_t index) {
  const auto out = Philox4x32::block(
      {index, level, replica, 0u},
      {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
  return {(static_cast<std::uint64_t>(out[1]) << 32) | out[0],
          (static_cast<std::uint64_t>(out[3]) << 32) | out[2]};
}

/// Uniform integer in [0, n) from a 64-bit word (multiply-high).
inline std::uint64_t scale_below(std::uint64_t word, std::uint64_t n) {
  __extension__ using u128 = unsigned __int128;
  return static_cast<std::uint64_t>((static_cast<u128>(word) * n) >> 64);
}

/// Stream of draws for one (seed, replica, level, index) key.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint32_t replica, std::uint32_t level, std::uint32_t index);

  std::uint64_t next_u64();
  /// Uniform in [0,1) with 53 random bits.
  double next_uniform();
  /// Uniform in (0,1).
  double next_open_uniform();
  /// Standard normal via Box-Muller (consumes two u64).
  double next_normal();
  /// Uniform integer in [0, n) by 64x64 multiply-high; bias <= n / 2^64.
  std::uint64_t next_below(std::uint64_t n);

 private:
  void refill();

  Philox4x32::Key key_;
  Philox4x32::Counter ctr_;
  std::array<std::uint64_t, 2> buf_{};
  int avail_ = 0;
};

}  // namespace hpin
