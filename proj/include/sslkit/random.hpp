#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace sslkit {

using Rng = std::mt19937_64;

// Stream tags for counter-based seed derivation. A stream is identified by
// (root seed, tag, counters...), so work split across threads draws the same
// numbers regardless of scheduling.
enum class Stream : std::uint64_t {
  kInit = 1,
  kEpochOrder = 2,
  kAugment = 3,
  kMixup = 4,
  kPrototypes = 5,
  kProbe = 6,
  kSynthetic = 7,
  kFolds = 8,
};

std::uint64_t splitmix64(std::uint64_t x);

std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path);

inline std::uint64_t derive_seed(std::uint64_t root, Stream stream,
                                 std::initializer_list<std::uint64_t> counters = {}) {
  std::uint64_t s = derive_seed(root, {static_cast<std::uint64_t>(stream)});
  return derive_seed(s, counters);
}

inline Rng make_rng(std::uint64_t root, Stream stream,
                    std::initializer_list<std::uint64_t> counters = {}) {
  return Rng(derive_seed(root, stream, counters));
}

// Uniform draw on [lo, hi]; returns lo when the interval is a point.
double uniform(Rng& rng, double lo, double hi);

// Beta(a, b) through the ratio of two gamma draws.
double sample_beta(double a, double b, Rng& rng);

}  // namespace sslkit
