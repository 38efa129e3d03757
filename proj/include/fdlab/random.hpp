#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "fdlab/signal.hpp"

namespace fdlab {

// Derives independent stream seeds from one experiment seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x5851F42D4C957F2DULL));
}

// mt19937_64 output is fixed by the standard; the uniform and Gaussian
// transforms are done here so streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in (0, 1).
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  // Circular complex Gaussian with E|z|^2 = variance.
  cdouble complex_gaussian(double variance) {
    const double r = std::sqrt(-std::log(uniform()) * variance);
    const double th = kTwoPi * uniform();
    return {r * std::cos(th), r * std::sin(th)};
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fdlab
