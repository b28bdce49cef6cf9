#include "hpin/rng.hpp"

#include <cmath>

namespace hpin {

CounterStream::CounterStream(std::uint64_t seed, std::uint32_t replica, std::uint32_t level,
                             std::uint32_t index)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      ctr_{index, level, replica, 0u} {}

void CounterStream::refill() {
  const auto out = Philox4x32::block(ctr_, key_);
  ++ctr_[3];
  buf_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
  buf_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
  avail_ = 2;
}

std::uint64_t CounterStream::next_u64() {
  if (avail_ == 0) refill();
  return buf_[2 - avail_--];
}

double CounterStream::next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double CounterStream::next_open_uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterStream::next_normal() {
  const double u1 = next_open_uniform();
  const double u2 = next_uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t CounterStream::next_below(std::uint64_t n) { return scale_below(next_u64(), n); }

}  // namespace hpin
