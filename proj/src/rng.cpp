#include "deepfgs/rng.hpp"

#include <cmath>

namespace dfgs {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

void Rng::reseed(std::uint64_t seed) {
  std::uint64_t sm = seed;
  for (auto& s : s_) s = splitmix64(sm);
  have_spare_ = false;
  spare_ = 0.0;
}

std::uint64_t Rng::u64() {
  std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  std::uint64_t span = std::uint64_t(hi - lo) + 1;  // hi >= lo assumed
  if (span == 0) return std::int64_t(u64());        // full 64-bit range
  // rejection sampling kills the modulo bias
  std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % span + 1) % span;
  std::uint64_t r;
  do {
    r = u64();
  } while (r > limit);
  return lo + std::int64_t(r % span);
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // Box-Muller; uniform01 can return 0 so flip to (0, 1]
  double u = 1.0 - uniform01();
  double v = uniform01();
  double r = std::sqrt(-2.0 * std::log(u));
  double a = 6.283185307179586476925286766559 * v;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

Rng Rng::split(std::string_view label) const {
  // hash the label into the parent state so child streams are decorrelated
  std::uint64_t h = fnv1a64(label);
  h = fnv1a64(&s_[0], sizeof(s_), h);
  return Rng(h);
}

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view s, std::uint64_t h) {
  return fnv1a64(s.data(), s.size(), h);
}

}  // namespace dfgs
