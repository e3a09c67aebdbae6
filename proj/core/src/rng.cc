#include "emokit/rng.h"

#include <cmath>
#include <limits>
#include <numbers>

namespace emokit {

std::uint64_t Rng::next_below(std::uint64_t n) {
  // 2^64 mod n, computed without overflow.
  const std::uint64_t remainder = (std::numeric_limits<std::uint64_t>::max() % n + 1) % n;
  const std::uint64_t limit = remainder == 0
                                  ? std::numeric_limits<std::uint64_t>::max()
                                  : std::numeric_limits<std::uint64_t>::max() - remainder + 1;
  for (;;) {
    const std::uint64_t x = engine_();
    if (remainder == 0 || x < limit) return x % n;
  }
}

double Rng::next_unit() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t Rng::pick_weighted(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  const double u = next_unit() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

double Rng::next_gaussian() {
  double u1 = next_unit();
  const double u2 = next_unit();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) {
  return mix64(seed ^ fnv1a64(key));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key) {
  return mix64(seed ^ mix64(key + 0x632be59bd9b4e019ULL));
}

}  // namespace emokit
