#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace nbi {

// Deterministic random source used everywhere in the library.
//
// All distributions are derived from the raw mt19937_64 stream with
// fixed, hand-written transformations so that a given seed produces the
// same draws on every platform and standard library.  (std::normal_distribution
// and friends are implementation-defined and must not be used.)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0, 1): 53 random bits centred in each cell,
  // so neither endpoint can occur and logs of draws are always finite.
  double uniform();

  // Uniform on [0, n).  Uses modular reduction; the bias is below 2^-40 for
  // every n that fits in 24 bits, which covers all uses in this library.
  std::uint64_t uniform_int(std::uint64_t n);

  // Standard normal via the Box-Muller transform (cosine branch).
  double normal();

  // Number of successes in n independent trials with success probability p.
  std::int64_t binomial(int n, double p);

  // Poisson count via Knuth's product-of-uniforms method.  Large means are
  // split using the additivity of the Poisson distribution so the product
  // never underflows.
  std::int64_t poisson(double mean);

  // In-place Fisher-Yates shuffle with draws from this stream.
  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  // Derives an independent seed from a base seed and an index (splitmix64
  // finalizer).  Used for per-grid-point and per-restart streams.
  static std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

 private:
  std::mt19937_64 engine_;
};

}  // namespace nbi
