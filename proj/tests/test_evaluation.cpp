#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <vector>

#include <doctest.h>

#include "nbi/evaluation.hpp"
#include "nbi/random.hpp"
#include "nbi/text.hpp"

using namespace nbi;

TEST_CASE("four-row hand example reproduces the exact mae values") {
  // Deltas 0.013, -0.047, 0.149, 0.071 all fall in distinct interior bins,
  // so each row forms its own group under both binning modes.
  const std::vector<double> benchmark{0.5, 1.0, 2.0, 1.0};
  const std::vector<double> competitor{0.5 * 1.013, 1.0 * 0.953, 2.0 * 1.149,
                                       1.0 * 1.071};
  const std::vector<std::int64_t> claims{1, 0, 2, 1};
  const std::vector<double> exposure{1.0, 2.0, 1.0, 4.0};
  const double total = 8.0;

  double mae_c = 0.0, mae_b = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    mae_c += std::abs(competitor[i] - static_cast<double>(claims[i])) / total;
    mae_b += std::abs(benchmark[i] - static_cast<double>(claims[i])) / total;
  }

  for (const auto binning :
       {LiftBinning::predetermined, LiftBinning::quantile}) {
    const LiftReport report = lift_report(competitor, benchmark, claims,
                                          exposure, binning, 4);
    CHECK(report.mae_lift_competitor ==
          doctest::Approx(mae_c).epsilon(1e-12));
    CHECK(report.mae_lift_benchmark ==
          doctest::Approx(mae_b).epsilon(1e-12));

    std::size_t occupied = 0, rows = 0;
    double share = 0.0;
    for (const auto& bin : report.bins) {
      if (bin.row_count > 0) ++occupied;
      rows += bin.row_count;
      share += bin.exposure_share;
    }
    CHECK(occupied == 4);
    CHECK(rows == 4);
    CHECK(share == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("fixed binning spans [-0.5, 0.5] in 2% steps with open tails") {
  const std::vector<double> benchmark{1.0, 1.0, 1.0};
  const std::vector<double> competitor{0.3, 1.0, 2.4};  // deltas -0.7, 0, 1.4
  const std::vector<std::int64_t> claims{0, 1, 2};
  const std::vector<double> exposure{1.0, 1.0, 1.0};
  const LiftReport report = lift_report(competitor, benchmark, claims,
                                        exposure, LiftBinning::predetermined);

  REQUIRE(report.bins.size() == 52);
  CHECK(std::isinf(report.bins.front().lower));
  CHECK(std::isinf(report.bins.back().upper));
  // The extreme deltas land in the tails.
  CHECK(report.bins.front().row_count == 1);
  CHECK(report.bins.back().row_count == 1);
}

TEST_CASE("identical models give identical mae for both columns") {
  Rng rng(5);
  std::vector<double> mu(200);
  std::vector<std::int64_t> claims(200);
  std::vector<double> exposure(200, 1.0);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    mu[i] = 0.05 + rng.uniform();
    claims[i] = rng.poisson(mu[i]);
  }
  const LiftReport report = lift_report(mu, mu, claims, exposure,
                                        LiftBinning::quantile, 10);
  CHECK(report.mae_lift_competitor == report.mae_lift_benchmark);
  // All deltas are zero, so everything collapses into one occupied bin.
  std::size_t occupied = 0;
  for (const auto& bin : report.bins)
    if (bin.row_count > 0) ++occupied;
  CHECK(occupied == 1);
}

TEST_CASE("mae is invariant under row permutations") {
  Rng rng(9);
  const std::size_t n = 500;
  std::vector<double> competitor(n), benchmark(n), exposure(n);
  std::vector<std::int64_t> claims(n);
  for (std::size_t i = 0; i < n; ++i) {
    benchmark[i] = 0.1 + rng.uniform();
    competitor[i] = benchmark[i] * (0.6 + 0.8 * rng.uniform());
    exposure[i] = 0.5 + rng.uniform();
    claims[i] = rng.poisson(benchmark[i]);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  std::vector<double> competitor_p(n), benchmark_p(n), exposure_p(n);
  std::vector<std::int64_t> claims_p(n);
  for (std::size_t i = 0; i < n; ++i) {
    competitor_p[i] = competitor[order[i]];
    benchmark_p[i] = benchmark[order[i]];
    exposure_p[i] = exposure[order[i]];
    claims_p[i] = claims[order[i]];
  }

  for (const auto binning :
       {LiftBinning::predetermined, LiftBinning::quantile}) {
    const LiftReport a =
        lift_report(competitor, benchmark, claims, exposure, binning);
    const LiftReport b =
        lift_report(competitor_p, benchmark_p, claims_p, exposure_p, binning);
    CHECK(a.mae_lift_competitor ==
          doctest::Approx(b.mae_lift_competitor).epsilon(1e-12));
    CHECK(a.mae_lift_benchmark ==
          doctest::Approx(b.mae_lift_benchmark).epsilon(1e-12));
  }
}

TEST_CASE("quantile bins balance row counts within one") {
  Rng rng(13);
  const std::size_t n = 103;
  std::vector<double> benchmark(n, 1.0), competitor(n), exposure(n, 1.0);
  std::vector<std::int64_t> claims(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    competitor[i] = 0.5 + rng.uniform();  // distinct deltas

  const LiftReport report = lift_report(competitor, benchmark, claims,
                                        exposure, LiftBinning::quantile, 20);
  REQUIRE(report.bins.size() == 20);
  std::size_t smallest = n, largest = 0, total = 0;
  for (const auto& bin : report.bins) {
    smallest = std::min(smallest, bin.row_count);
    largest = std::max(largest, bin.row_count);
    total += bin.row_count;
  }
  CHECK(total == n);
  CHECK(largest - smallest <= 1);
}

TEST_CASE("ties in delta fall into the lower quantile bin") {
  // 6 rows, 3 bins, all deltas equal: one occupied bin holds everything.
  const std::vector<double> benchmark(6, 1.0);
  const std::vector<double> competitor(6, 1.2);
  const std::vector<std::int64_t> claims{0, 1, 0, 0, 1, 0};
  const std::vector<double> exposure(6, 1.0);
  const LiftReport report = lift_report(competitor, benchmark, claims,
                                        exposure, LiftBinning::quantile, 3);
  std::size_t occupied = 0;
  for (const auto& bin : report.bins)
    if (bin.row_count > 0) {
      ++occupied;
      CHECK(bin.row_count == 6);
    }
  CHECK(occupied == 1);
}

TEST_CASE("bad inputs are rejected") {
  const std::vector<double> two{1.0, 1.0};
  const std::vector<double> three{1.0, 1.0, 1.0};
  const std::vector<std::int64_t> claims2{0, 0};
  CHECK_THROWS(lift_report(two, three, claims2, two,
                           LiftBinning::predetermined));
  const std::vector<double> bad{1.0, 0.0};
  CHECK_THROWS(lift_report(two, bad, claims2, two,
                           LiftBinning::predetermined));
  const std::vector<double> no_exposure{0.0, 0.0};
  CHECK_THROWS(lift_report(two, two, claims2, no_exposure,
                           LiftBinning::predetermined));
}

TEST_CASE("lift tables serialize with both mae trailer lines") {
  const std::vector<double> benchmark{1.0, 2.0};
  const std::vector<double> competitor{1.1, 1.9};
  const std::vector<std::int64_t> claims{1, 2};
  const std::vector<double> exposure{1.0, 1.0};
  const LiftReport report = lift_report(competitor, benchmark, claims,
                                        exposure, LiftBinning::quantile, 2);
  const auto dir =
      std::filesystem::temp_directory_path() / "nbi-evaluation-tests";
  std::filesystem::create_directories(dir);
  write_lift_csv(report, dir / "lift.csv");
  const std::string text = read_file(dir / "lift.csv");
  CHECK(text.find("mae_lift_competitor,") != std::string::npos);
  CHECK(text.find("mae_lift_benchmark,") != std::string::npos);
}
