#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "nbi/dataset.hpp"

namespace nbi {

// Rows are grouped by the relative rate difference between a competitor model
// and a benchmark, delta = competitor/benchmark - 1, either on a fixed grid
// of 2%-wide intervals spanning [-0.5, 0.5] (plus two unbounded tail bins) or
// on delta quantiles.
enum class LiftBinning { predetermined, quantile };

struct LiftBin {
  double lower = 0.0;  // open lower edge; -inf for the first bin
  double upper = 0.0;  // closed upper edge; +inf for the last bin
  std::size_t row_count = 0;
  double exposure_share = 0.0;
  double waof = 0.0;             // observed claims per exposure unit
  double wapf_competitor = 0.0;  // competitor expectation per exposure unit
  double wapf_benchmark = 0.0;
};

struct LiftReport {
  LiftBinning binning = LiftBinning::predetermined;
  std::vector<LiftBin> bins;
  // Exposure-weighted mean absolute gap between predicted and observed
  // frequency across bins, one value per model.  Smaller means the model
  // tracks experience better exactly where the two models disagree.
  double mae_lift_competitor = 0.0;
  double mae_lift_benchmark = 0.0;
};

// `competitor` and `benchmark` are expected claim counts per row.  Both
// mae_lift values use the same bins, so they are directly comparable.
LiftReport lift_report(std::span<const double> competitor,
                       std::span<const double> benchmark,
                       std::span<const std::int64_t> claims,
                       std::span<const double> exposure, LiftBinning binning,
                       int quantile_bins = 20);

void write_lift_csv(const LiftReport& report,
                    const std::filesystem::path& path);

}  // namespace nbi
