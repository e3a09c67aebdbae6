#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace emokit {

// Platform-stable random source. All draws go through next_below() and
// next_unit(), whose sequences are fully specified here, so any consumer can
// replay them from the seed alone:
//
//   next_below(n): draw x from mt19937_64; reject while
//                  x >= 2^64 - (2^64 mod n); return x mod n.
//   next_unit():   (x >> 11) * 2^-53 for one mt19937_64 draw; in [0, 1).
//
// std::uniform_*_distribution is avoided because its output is
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t next_below(std::uint64_t n);

  // Uniform real in [0, 1).
  double next_unit();

  // Index drawn proportionally to `weights` using one next_unit() draw.
  std::size_t pick_weighted(std::span<const double> weights);

  // Standard normal via Box-Muller on two next_unit() draws.
  double next_gaussian();

 private:
  std::mt19937_64 engine_;
};

// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Child seed derived from a parent seed and a string key (e.g. a record id).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key);

}  // namespace emokit
