#pragma once

// Reproducible random streams.
//
// Splitting rule: the generator for ensemble member i is std::mt19937_64
// seeded with child_seed(root, i) = splitmix64(splitmix64(root) + i).
// Uniforms use the top 53 bits of one engine draw: u = (w >> 11) * 2^-53.
// Normals use Box-Muller on (u1, u2) with u1 mapped to (0, 1]:
//   r = sqrt(-2 ln(1 - u1)), z1 = r cos(2 pi u2), z2 = r sin(2 pi u2),
// returned in the order z1, z2. None of this depends on the standard
// library's distribution implementations, so other languages can reproduce
// the streams bit for bit up to libm rounding.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace stocon {

using Engine = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t child_seed(std::uint64_t root_seed, std::uint64_t index) {
  return splitmix64(splitmix64(root_seed) + index);
}

/// Engine plus the documented uniform / normal transforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// +1 or -1 with equal probability.
  double rademacher() { return (engine_() >> 63) ? 1.0 : -1.0; }

  Engine& engine() { return engine_; }

 private:
  Engine engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace stocon
