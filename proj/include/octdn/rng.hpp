#pragma once

#include <cstdint>

namespace octdn {

// Finalizer of the splitmix64 generator. Deterministic across platforms,
// unlike the std:: distributions, which is why all seeded randomness in this
// library goes through here.
inline uint64_t splitmix64_next(uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Derives an independent stream seed from (seed, tag, index). The training
// loop uses (seed, epoch, sample), the bench harness (seed, kSeedTagBench,
// image index), so parallel and serial evaluation see identical noise.
inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c = 0) {
  uint64_t s = a;
  uint64_t h = splitmix64_next(s);
  s = h ^ (b * 0xD6E8FEB86659FD93ull);
  h = splitmix64_next(s);
  s = h ^ (c * 0xCA5A826395121157ull);
  return splitmix64_next(s);
}

// Stream tags for mix_seed so distinct consumers never collide.
inline constexpr uint64_t kSeedTagInit = 0x494E4954;     // model parameter init
inline constexpr uint64_t kSeedTagShuffle = 0x53485546;  // per-epoch batch shuffle
inline constexpr uint64_t kSeedTagVal = 0x56414C;        // fixed val-split corruption
inline constexpr uint64_t kSeedTagBench = 0x42454E43;    // per-test-image corruption

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() { return splitmix64_next(state_); }

  // Uniform in [0, 1).
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_unit();
  }

  // Integer in [0, n).
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller; one spare cached per pair.
  double next_gaussian();

  double next_gaussian(double mean, double stddev) {
    return mean + stddev * next_gaussian();
  }

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace octdn
