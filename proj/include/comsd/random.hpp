#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace comsd {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent stream seeds
inline std::uint64_t MixSeed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent generators derived from one root seed. Each consumer owns one
// stream so that, e.g., changing the batch size does not perturb the
// environment noise sequence.
struct SeedStreams {
  explicit SeedStreams(std::uint64_t root)
      : env(MixSeed(root ^ 0x01)),
        skill(MixSeed(root ^ 0x02)),
        noise(MixSeed(root ^ 0x03)),
        sampling(MixSeed(root ^ 0x04)),
        init(MixSeed(root ^ 0x05)) {}

  Rng env;
  Rng skill;
  Rng noise;
  Rng sampling;
  Rng init;
};

// [0,1) uniform with a fixed construction so results do not depend on the
// standard library's uniform_real_distribution implementation.
inline double Uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double UniformRange(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * Uniform01(rng);
}

// Box-Muller; deterministic across standard library implementations.
inline double StandardNormal(Rng& rng) {
  double u1 = Uniform01(rng);
  while (u1 <= 0.0) u1 = Uniform01(rng);
  const double u2 = Uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace comsd
