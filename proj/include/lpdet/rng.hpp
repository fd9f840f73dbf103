#pragma once

#include <cstdint>

namespace lpdet {

// Deterministic random source with hand-rolled distributions. std::*
// distributions are implementation-defined, which would break bit
// reproducibility of generated scenes and training runs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform01();                      // [0, 1)
  double uniform(double lo, double hi);    // [lo, hi)
  int uniform_int(int lo, int hi);         // inclusive
  double normal(double mean = 0.0, double stddev = 1.0);
  bool bernoulli(double p);

  // Decorrelated child stream; forking does not disturb this stream.
  Rng fork(std::uint64_t stream) const;

 private:
  std::uint64_t state_;
  std::uint64_t seed_;
};

// Stable seed derivation for numbered substreams (per-scene seeds, per-run
// component seeds).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace lpdet
