#include "lpdet/rng.hpp"

#include <cmath>

namespace lpdet {

namespace {
// splitmix64
inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace

Rng::Rng(std::uint64_t seed) : state_(mix(seed ^ 0xa0761d6478bd642fULL)), seed_(seed) {
  if (state_ == 0) state_ = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t Rng::next_u64() {
  // xorshift* over a splitmix-initialized state
  std::uint64_t x = state_;
  x ^= x >> 12;
  x ^= x << 25;
  x ^= x >> 27;
  state_ = x;
  return x * 0x2545F4914F6CDD1DULL;
}

double Rng::uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

int Rng::uniform_int(int lo, int hi) {
  return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
}

double Rng::normal(double mean, double stddev) {
  double u1 = uniform01(), u2 = uniform01();
  if (u1 < 1e-300) u1 = 1e-300;
  return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

bool Rng::bernoulli(double p) { return uniform01() < p; }

Rng Rng::fork(std::uint64_t stream) const { return Rng(derive_seed(seed_, stream)); }

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return mix(base) ^ mix(stream * 0x9e3779b97f4a7c15ULL + 1);
}

}  // namespace lpdet
