#pragma once

/**
 * Deterministic, hierarchically splittable random number generation.
 *
 * Design:
 * - Core generator is splitmix64 (Steele/Lea/Flood constants): tiny state,
 *   high quality for simulation workloads, and trivially reproducible.
 * - An Rng carries two words: an identity seed (never advanced) and a
 *   consumption state (advanced by draws). derive(a, b) is a PURE function
 *   of the identity seed, so substreams do not depend on how much the
 *   parent stream has already been consumed. That is what makes
 *   "master seed -> per-tree stream -> per-edge substream" reproducible
 *   regardless of construction or scheduling order.
 * - Gaussians come from Box-Muller with a one-sample cache, so the gaussian
 *   sequence of a given stream is platform-independent (no std::normal_distribution,
 *   whose algorithm is implementation-defined).
 */

#include <cstdint>
#include <cmath>
#include <numbers>
#include <vector>

namespace treeflow::rng {

inline constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ull;

// splitmix64 output mix (finalizer).
inline uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Order-sensitive combiner used to derive child stream identities.
inline uint64_t hash_combine(uint64_t seed, uint64_t value) {
  return mix64(seed + kGolden + mix64(value + kGolden));
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), state_(seed) {}

  // Child stream keyed by (a, b). Pure: depends only on this stream's
  // identity seed, never on its consumption state.
  Rng derive(uint64_t a, uint64_t b = 0) const {
    return Rng(hash_combine(hash_combine(seed_, a), b));
  }

  uint64_t seed() const { return seed_; }

  uint64_t next_u64() {  // splitmix64 step
    state_ += kGolden;
    return mix64(state_);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; second sample of each pair is cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]: keeps log() finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  std::vector<double> gaussian_vec(int n) {
    std::vector<double> out(static_cast<size_t>(n));
    for (auto& v : out) v = gaussian();
    return out;
  }

 private:
  uint64_t seed_;   // stream identity; input to derive()
  uint64_t state_;  // consumption cursor; advanced by draws
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace treeflow::rng
