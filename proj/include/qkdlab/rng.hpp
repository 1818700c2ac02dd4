// Seedable, splittable deterministic random streams.
//
// Every stochastic operation in the library takes an explicit Rng so that a
// whole experiment is a pure function of its top-level seed. Streams are
// split by label, not by drawing, so adding a consumer never perturbs the
// draws seen by existing ones.
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace qkdlab {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(seed), engine_(mix(seed)) {}

  // Derives an independent child stream. The child depends only on this
  // stream's seed key and the label, never on how much has been drawn.
  Rng child(std::string_view label) const {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (char ch : label) {
      h ^= static_cast<unsigned char>(ch);
      h *= 1099511628211ull;
    }
    return Rng(mix(key_ ^ h));
  }

  Rng child(std::uint64_t index) const { return Rng(mix(key_ + 0x9e3779b97f4a7c15ull * (index + 1))); }

  std::uint64_t seed_key() const { return key_; }

  std::uint64_t next() { return engine_(); }

  bool coin() { return (next() >> 63) != 0; }

  // Uniform double in [0, 1) with 53 random bits; avoids the
  // implementation-defined behaviour of std::generate_canonical.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, bound). Rejection-sampled, bound >= 1.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = bound * (UINT64_MAX / bound);
    std::uint64_t v;
    do {
      v = next();
    } while (v >= limit);
    return v % bound;
  }

 private:
  static std::uint64_t mix(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::uint64_t key_;
  std::mt19937_64 engine_;
};

}  // namespace qkdlab
