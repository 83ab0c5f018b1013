#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

#include "cfrl/errors.hpp"

namespace cfrl {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// All randomness in the library flows through this wrapper. Draws are
// derived from raw 64-bit engine output only, never from std::*_distribution,
// so sequences are identical across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t bits() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), unbiased via rejection.
  int uniform_int(int n) {
    if (n <= 0) throw InputError("uniform_int: n must be positive");
    const uint64_t un = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t x = bits();
    while (x >= limit) x = bits();
    return static_cast<int>(x % un);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Inverse-CDF draw from an (approximately normalized) categorical.
  // Falls back to the last positive-probability index if rounding leaves
  // the draw above the accumulated mass.
  int categorical(std::span<const double> probs) {
    const double u = uniform();
    double c = 0.0;
    int last_positive = -1;
    for (size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] > 0.0) last_positive = static_cast<int>(i);
      c += probs[i];
      if (u < c && probs[i] > 0.0) return static_cast<int>(i);
    }
    if (last_positive < 0) throw InputError("categorical: no positive mass");
    return last_positive;
  }

 private:
  std::mt19937_64 engine_;
};

// Stream purposes used when deriving per-episode generators. Keeping the
// purposes on separate child streams is what makes results independent of
// worker count and of how much randomness sibling stages consume.
enum class Stream : uint64_t {
  kData = 1,       // logged-episode collection
  kPosterior = 2,  // hindsight scenario draws
  kRollout = 3,    // model / counterfactual rollouts
  kEval = 4,       // true-environment evaluation
  kInit = 5,       // initial state / level draws
  kMisc = 6,
};

// Derives an independent child seed from a master seed and an index path
// such as {iteration, episode, purpose}. Pure function of its inputs.
inline uint64_t derive_seed(uint64_t master, std::span<const uint64_t> path) {
  uint64_t state = master ^ 0x8f1bbcdcbfa53e0bULL;
  uint64_t h = splitmix64(state);
  for (uint64_t p : path) {
    state ^= p + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h = splitmix64(state);
  }
  return h;
}

inline uint64_t derive_seed(uint64_t master, std::initializer_list<uint64_t> path) {
  return derive_seed(master, std::span<const uint64_t>(path.begin(), path.size()));
}

inline Rng derive_rng(uint64_t master, std::initializer_list<uint64_t> path) {
  return Rng(derive_seed(master, path));
}

}  // namespace cfrl
