#include "nbi/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "nbi/text.hpp"

namespace nbi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Interval edges for the fixed grid: -0.5, -0.48, ..., 0.48, 0.5.  Bin k
// covers (edge[k-1], edge[k]]; the outer bins run to -inf and +inf.
std::vector<double> fixed_edges() {
  std::vector<double> edges;
  for (int k = 0; k <= 50; ++k)
    edges.push_back(-0.5 + 0.02 * static_cast<double>(k));
  return edges;
}

}  // namespace

LiftReport lift_report(std::span<const double> competitor,
                       std::span<const double> benchmark,
                       std::span<const std::int64_t> claims,
                       std::span<const double> exposure, LiftBinning binning,
                       int quantile_bins) {
  const std::size_t n = competitor.size();
  if (benchmark.size() != n || claims.size() != n || exposure.size() != n)
    throw std::invalid_argument("lift inputs have different lengths");
  if (n == 0) throw std::invalid_argument("lift needs at least one row");

  std::vector<double> delta(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(benchmark[i] > 0.0))
      throw std::invalid_argument("benchmark expectation must be positive");
    delta[i] = competitor[i] / benchmark[i] - 1.0;
  }

  LiftReport report;
  report.binning = binning;
  std::vector<int> bin_of(n);

  if (binning == LiftBinning::predetermined) {
    const auto edges = fixed_edges();
    report.bins.resize(edges.size() + 1);
    for (std::size_t k = 0; k < report.bins.size(); ++k) {
      report.bins[k].lower = k == 0 ? -kInf : edges[k - 1];
      report.bins[k].upper = k == edges.size() ? kInf : edges[k];
    }
    for (std::size_t i = 0; i < n; ++i) {
      int bin = static_cast<int>(edges.size());  // overflow bin by default
      for (std::size_t k = 0; k < edges.size(); ++k)
        if (delta[i] <= edges[k]) {
          bin = static_cast<int>(k);
          break;
        }
      bin_of[i] = bin;
    }
  } else {
    if (quantile_bins < 1)
      throw std::invalid_argument("need at least one quantile bin");
    const auto B = static_cast<std::size_t>(quantile_bins);
    std::vector<double> sorted(delta);
    std::sort(sorted.begin(), sorted.end());
    // Upper edge of bin k sits at the ceil(n*(k+1)/B)-th smallest delta;
    // rows tied with an edge all land in the lower bin.
    std::vector<double> edges(B);
    for (std::size_t k = 0; k < B; ++k) {
      const std::size_t position =
          (n * (k + 1) + B - 1) / B;  // ceil without floating point
      edges[k] = sorted[position - 1];
    }
    report.bins.resize(B);
    for (std::size_t k = 0; k < B; ++k) {
      report.bins[k].lower = k == 0 ? -kInf : edges[k - 1];
      report.bins[k].upper = edges[k];
    }
    for (std::size_t i = 0; i < n; ++i) {
      int bin = static_cast<int>(B) - 1;
      for (std::size_t k = 0; k < B; ++k)
        if (delta[i] <= edges[k]) {
          bin = static_cast<int>(k);
          break;
        }
      bin_of[i] = bin;
    }
  }

  const double total_exposure =
      std::accumulate(exposure.begin(), exposure.end(), 0.0);
  if (!(total_exposure > 0.0))
    throw std::invalid_argument("total exposure must be positive");

  std::vector<double> bin_exposure(report.bins.size(), 0.0);
  std::vector<double> bin_claims(report.bins.size(), 0.0);
  std::vector<double> bin_competitor(report.bins.size(), 0.0);
  std::vector<double> bin_benchmark(report.bins.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(bin_of[i]);
    report.bins[k].row_count += 1;
    bin_exposure[k] += exposure[i];
    bin_claims[k] += static_cast<double>(claims[i]);
    bin_competitor[k] += competitor[i];
    bin_benchmark[k] += benchmark[i];
  }

  for (std::size_t k = 0; k < report.bins.size(); ++k) {
    auto& bin = report.bins[k];
    bin.exposure_share = bin_exposure[k] / total_exposure;
    if (bin_exposure[k] > 0.0) {
      bin.waof = bin_claims[k] / bin_exposure[k];
      bin.wapf_competitor = bin_competitor[k] / bin_exposure[k];
      bin.wapf_benchmark = bin_benchmark[k] / bin_exposure[k];
    }
    report.mae_lift_competitor +=
        bin.exposure_share * std::abs(bin.wapf_competitor - bin.waof);
    report.mae_lift_benchmark +=
        bin.exposure_share * std::abs(bin.wapf_benchmark - bin.waof);
  }
  return report;
}

void write_lift_csv(const LiftReport& report,
                    const std::filesystem::path& path) {
  std::ostringstream out;
  out << "bin,lower,upper,row_count,exposure_share,waof,wapf_competitor,"
         "wapf_benchmark\n";
  for (std::size_t k = 0; k < report.bins.size(); ++k) {
    const auto& bin = report.bins[k];
    out << k + 1 << ',' << format_double(bin.lower) << ','
        << format_double(bin.upper) << ',' << bin.row_count << ','
        << format_double(bin.exposure_share) << ',' << format_double(bin.waof)
        << ',' << format_double(bin.wapf_competitor) << ','
        << format_double(bin.wapf_benchmark) << '\n';
  }
  out << "mae_lift_competitor," << format_double(report.mae_lift_competitor)
      << "\nmae_lift_benchmark," << format_double(report.mae_lift_benchmark)
      << '\n';
  write_file(path, out.str());
}

}  // namespace nbi
