#include "nbi/random.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nbi {

double Rng::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
  return next_u64() % n;
}

double Rng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::int64_t Rng::binomial(int n, double p) {
  if (n < 0 || p < 0.0 || p > 1.0)
    throw std::invalid_argument("binomial: need n >= 0 and p in [0, 1]");
  std::int64_t count = 0;
  for (int i = 0; i < n; ++i)
    if (uniform() < p) ++count;
  return count;
}

std::int64_t Rng::poisson(double mean) {
  if (!(mean >= 0.0))
    throw std::invalid_argument("poisson: mean must be non-negative");
  std::int64_t count = 0;
  while (mean > 30.0) {
    // Poisson(a + b) = Poisson(a) + Poisson(b) with independent draws.
    count += poisson(15.0);
    mean -= 15.0;
  }
  const double threshold = std::exp(-mean);
  double product = uniform();
  while (product > threshold) {
    ++count;
    product *= uniform();
  }
  return count;
}

std::uint64_t Rng::derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace nbi
