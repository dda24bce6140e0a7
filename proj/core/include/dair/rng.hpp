#pragma once

#include <cstdint>

namespace dair {

// Deterministic random stream. Uses xoshiro256++ with splitmix64 seeding and
// derives doubles, normals and bounded ints itself: the standard library's
// distribution objects are implementation-defined, which would break
// bit-identical reruns across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller. The second value of each pair is cached.
  double normal();
  double normal(double mean, double stddev);

  // Uniform integer in [0, n). n must be positive; rejection sampling keeps
  // the draw unbiased.
  std::uint64_t uniform_int(std::uint64_t n);

  // Derived stream that is decorrelated from this one and from forks with a
  // different id. Forking does not disturb the parent's sequence.
  Rng fork(std::uint64_t stream_id) const;

 private:
  Rng() = default;

  std::uint64_t s_[4] = {0, 0, 0, 0};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace dair
