#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace dfgs {

// xoshiro256++ with splitmix64 seeding. Self-contained so that streams are
// identical on every platform; std:: distributions are not portable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) { reseed(seed); }

  void reseed(std::uint64_t seed);

  std::uint64_t u64();

  // [0, 1)
  double uniform01() { return double(u64() >> 11) * 0x1.0p-53; }

  // strictly inside (-0.5, 0.5); quantizer noise support is open
  double uniform_centered() {
    return (double(u64() >> 11) + 0.5) * 0x1.0p-53 - 0.5;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // unbiased integer in [lo, hi]
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  double normal();  // Box-Muller, one value per call

  // Independent child stream; labels give parameters/noise/data their own
  // streams so adding a consumer never shifts the others.
  Rng split(std::string_view label) const;

 private:
  std::uint64_t s_[4];
  bool have_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace dfgs
