#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dynshot {

// Seeded generator with fully specified derived distributions, so datasets,
// initial weights, and episode streams are reproducible across standard
// library implementations:
//   engine   std::mt19937_64 (output sequence fixed by the C++ standard)
//   uniform  top 53 bits of one draw, scaled by 2^-53, in [0, 1)
//   index    rejection sampling on the raw 64-bit draw
//   normal   Box-Muller (cosine branch only, one normal per two uniforms)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  // Uniform integer in [0, bound); bound must be > 0.
  std::uint64_t index(std::uint64_t bound);
  double normal();

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t base, std::string_view label);

}  // namespace dynshot
