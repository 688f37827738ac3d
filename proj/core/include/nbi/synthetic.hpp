#pragma once

#include <cstdint>
#include <span>

#include "nbi/dataset.hpp"

namespace nbi {

// Schema of the built-in synthetic portfolio: numeric features x_1..x_8,
// categorical x_9 (3 levels) and x_10 (6 levels), response claim_total_nb,
// exposure annual_exposure.
FeatureSchema synthetic_schema();

// Expected annual claim frequency for one synthetic row.  The linear
// predictor combines main effects in x_1..x_3 and the categorical levels with
// three planted interactions: x_4*x_5, x_5^2*x_6 and the oscillating
// |x_3|sin(2 x_3) term.  With `clamp` the rate is capped at one claim per
// exposure unit, which keeps the portfolio in a realistic frequency regime.
double synthetic_rate(std::span<const double, 8> x, int x9, int x10,
                      bool clamp = true);

// Draws n rows.  x_1..x_8 are standard normal with corr(x_2, x_8) = 0.5 and
// all other pairs independent; x_9 ~ Binomial(2, 0.3); x_10 ~ Binomial(5,
// 0.2); exposure is 1; claims are Poisson with mean synthetic_rate(row).
// The same seed always produces the same rows.
Dataset generate_synthetic(std::size_t n, std::uint64_t seed,
                           bool clamp = true);

}  // namespace nbi
