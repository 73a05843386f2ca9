#pragma once

// Seeded random draws for instance generation and experiments.
//
// The engine is std::mt19937_64 but every real-valued draw is mapped from
// raw 64-bit words here rather than through std::uniform_real_distribution,
// whose output is not pinned by the standard. Given a seed, the stream of
// values below is therefore identical across standard libraries. Draw order
// is part of each consumer's contract (see generator.hpp).

#include <cmath>
#include <cstdint>
#include <random>

namespace svi2 {

// splitmix64; used to whiten seeds and derive independent sub-streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Sub-stream seed for (base, tag, index); distinct argument tuples give
// unrelated streams. saa uses tags for structural / training / eval draws.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag,
                                 std::uint64_t index = 0) {
  std::uint64_t h = splitmix64(base ^ 0x5851f42d4c957f2dULL);
  h = splitmix64(h ^ tag);
  h = splitmix64(h ^ index);
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // One word per call.
  std::uint64_t next_u64() { return engine_(); }

  // [0, 1), 53-bit resolution; one word per call.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // [lo, hi)
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  // (lo, hi]
  double uniform_open_closed(double lo, double hi) {
    return lo + (hi - lo) * (1.0 - uniform01());
  }

  // Standard normal via Box-Muller; draws two uniforms per pair, returns
  // the cosine branch first.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(1.0 - u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace svi2
