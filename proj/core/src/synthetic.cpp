#include "nbi/synthetic.hpp"

#include <cmath>
#include <string>

#include "nbi/random.hpp"

namespace nbi {

FeatureSchema synthetic_schema() {
  FeatureSchema schema;
  schema.response_column = "claim_total_nb";
  schema.exposure_column = "annual_exposure";
  for (int i = 1; i <= 8; ++i)
    schema.features.push_back({"x_" + std::to_string(i), FeatureKind::numeric,
                               {},
                               -1});
  schema.features.push_back(
      {"x_9", FeatureKind::categorical, {"0", "1", "2"}, -1});
  schema.features.push_back(
      {"x_10", FeatureKind::categorical, {"0", "1", "2", "3", "4", "5"}, -1});
  schema.validate();
  return schema;
}

double synthetic_rate(std::span<const double, 8> x, int x9, int x10,
                      bool clamp) {
  static const double x9_effect[3] = {0.0, -0.1, -0.2};
  static const double x10_effect[6] = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  const double eta = -3.0 + 0.5 * x[0] - 0.25 * x[1] * x[1] +
                     0.5 * std::abs(x[2]) * std::sin(2.0 * x[2]) +
                     0.5 * x[3] * x[4] + 0.125 * x[4] * x[4] * x[5] +
                     x9_effect[x9] + x10_effect[x10];
  const double rate = std::exp(eta);
  return clamp ? std::min(rate, 1.0) : rate;
}

Dataset generate_synthetic(std::size_t n, std::uint64_t seed, bool clamp) {
  Dataset data = make_dataset(synthetic_schema());
  data.claims.reserve(n);
  data.exposure.reserve(n);
  for (auto& column : data.numeric_pool) column.reserve(n);
  for (auto& column : data.categorical_pool) column.reserve(n);

  Rng rng(seed);
  for (std::size_t row = 0; row < n; ++row) {
    double x[8];
    for (double& value : x) value = rng.normal();
    // Correlate x_2 and x_8 at 0.5 via the Cholesky factor of the 2x2 block.
    x[7] = 0.5 * x[1] + std::sqrt(0.75) * x[7];
    const int x9 = static_cast<int>(rng.binomial(2, 0.3));
    const int x10 = static_cast<int>(rng.binomial(5, 0.2));
    const double rate = synthetic_rate(std::span<const double, 8>(x), x9, x10,
                                       clamp);
    data.claims.push_back(rng.poisson(rate));
    data.exposure.push_back(1.0);
    for (int c = 0; c < 8; ++c)
      data.numeric_pool[static_cast<std::size_t>(c)].push_back(x[c]);
    data.categorical_pool[0].push_back(x9);
    data.categorical_pool[1].push_back(x10);
  }
  return data;
}

}  // namespace nbi
