#pragma once

#include <cstdint>

namespace aelpn {

// Named sub-streams so independent consumers (data draws, parameter init,
// noise, evaluation) never share state.
enum class Stream : std::uint64_t {
  kData = 1,
  kInit = 2,
  kNoise = 3,
  kEval = 4,
  kAudit = 5,
};

// Deterministic pseudorandom generator: xoshiro256++ state seeded through
// splitmix64. The entire draw path (including the Gaussian transform, which
// uses the Marsaglia polar method and therefore only sqrt/log) is written
// out explicitly so that a given seed reproduces the same stream everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Derives an independent generator keyed by (root seed, tag). The child
  // depends only on the constructor seed, never on how many values have been
  // drawn from the parent.
  Rng stream(Stream tag) const;
  Rng stream(std::uint64_t tag) const;

  std::uint64_t next_u64();

  // Uniform on [0, 1), 53-bit resolution.
  double uniform();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi);
  // Unbiased integer in [0, n). n must be > 0.
  std::uint64_t uniform_below(std::uint64_t n);

  // Standard normal draw. Polar method; draws are produced in pairs and
  // the spare is cached, so the mapping from seed to stream is fixed.
  double gaussian();

  std::uint64_t root_seed() const { return root_seed_; }

 private:
  std::uint64_t root_seed_;
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace aelpn
