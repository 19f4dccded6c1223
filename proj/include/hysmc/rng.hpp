#pragma once

#include <cstdint>
#include <random>

namespace hysmc {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform on (0, 1], 53-bit resolution.
  double uniform_open_closed() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }
  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for stream `index` of `master`; independent of evaluation order.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

std::uint64_t entropy_seed();

}  // namespace hysmc
