#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "hpin/rng.hpp"

using namespace hpin;

TEST_CASE("philox4x32-10 known-answer vectors") {
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  CHECK(Philox4x32::block(C{0, 0, 0, 0}, K{0, 0}) ==
        C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(Philox4x32::block(C{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                          K{0xffffffffu, 0xffffffffu}) ==
        C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(Philox4x32::block(C{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                          K{0xa4093822u, 0x299f31d0u}) ==
        C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("counter stream is a pure function of its key") {
  CounterStream a(42, 3, 7, 11), b(42, 3, 7, 11);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  const auto pair = philox_pair(42, 3, 7, 11);
  CounterStream c(42, 3, 7, 11);
  CHECK(c.next_u64() == pair[0]);
  CHECK(c.next_u64() == pair[1]);

  // Any change of seed, replica, level or index changes the stream.
  std::set<std::uint64_t> firsts;
  for (auto s : {CounterStream(1, 0, 0, 0), CounterStream(2, 0, 0, 0), CounterStream(1, 1, 0, 0),
                 CounterStream(1, 0, 1, 0), CounterStream(1, 0, 0, 1),
                 CounterStream(std::uint64_t{1} << 32 | 1, 0, 0, 0)}) {
    firsts.insert(s.next_u64());
  }
  CHECK(firsts.size() == 6);
}

TEST_CASE("scale_below stays in range") {
  CHECK(scale_below(0, 10) == 0);
  CHECK(scale_below(~std::uint64_t{0}, 10) == 9);
  CHECK(scale_below(std::uint64_t{1} << 63, 10) == 5);
  CounterStream s(5, 0, 0, 0);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 70000; ++i) ++hits[s.next_below(7)];
  for (int h : hits) CHECK(std::abs(h - 10000) < 500);
}

TEST_CASE("uniform and normal draws") {
  CounterStream s(9, 1, 2, 3);
  const int n = 200000;
  double su = 0.0, sn = 0.0, sn2 = 0.0, sn4 = 0.0;
  double umin = 1.0, umax = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = s.next_uniform();
    umin = std::min(umin, u);
    umax = std::max(umax, u);
    su += u;
    const double o = s.next_open_uniform();
    CHECK((o > 0.0 && o < 1.0));
    const double z = s.next_normal();
    sn += z;
    sn2 += z * z;
    sn4 += z * z * z * z;
  }
  CHECK(umin >= 0.0);
  CHECK(umax < 1.0);
  CHECK(std::abs(su / n - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(std::abs(sn / n) < 5.0 / std::sqrt(n));
  CHECK(std::abs(sn2 / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(sn4 / n - 3.0) < 5.0 * std::sqrt(96.0 / n));
}
