#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace graphmem {

// Deterministic xoshiro256** generator seeded through splitmix64.
// The update rules are fixed by this implementation (not delegated to the
// standard library), so a given seed yields the same stream on every
// platform. All randomized behavior in the library draws from this type.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform double in [0, 1), 53-bit resolution.
  double uniform();

  // Uniform double in [lo, hi).
  double uniform(double lo, double hi);

  // Uniform integer in [0, n), n > 0. Unbiased (rejection sampling).
  std::uint64_t uniform_int(std::uint64_t n);

  // Standard normal via Box-Muller on two uniform draws.
  double normal();

  // Fisher-Yates shuffle driven by uniform_int.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derives an independent stream for a named purpose. The same (seed, tag,
  // index) triple always produces the same child stream; used for per-fold
  // and per-epoch substreams.
  Rng fork(std::uint64_t tag, std::uint64_t index = 0) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_[4];
};

// Stable 64-bit hash of a short string, used to build fork tags.
std::uint64_t rng_tag(const std::string& name);

}  // namespace graphmem
