#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <doctest.h>

#include "nbi/clustering.hpp"
#include "nbi/selection.hpp"
#include "nbi/synthetic.hpp"
#include "nbi/text.hpp"

using namespace nbi;

namespace {

struct Fixture {
  SplitDataset data;
  GlmModel benchmark;

  explicit Fixture(std::size_t n = 12000, std::uint64_t seed = 3) {
    data = split(generate_synthetic(n, seed), {0.8, 0.1, 0.1}, 1);
    const Dataset fitting = concat_rows(data.train, data.validation);
    std::vector<TermSpec> terms;
    for (const char* text :
         {"intercept", "x_1", "x_2^2", "x_3", "x_3^2", "x_9", "x_10"})
      terms.push_back(parse_term(text, fitting.schema));
    benchmark = fit_poisson(fitting, terms, log_exposure_offset(fitting));
  }
};

}  // namespace

TEST_CASE("quantile binning splits 0..99 into four equal bins") {
  Dataset data = make_dataset(synthetic_schema());
  const std::size_t n = 100;
  data.claims.assign(n, 0);
  data.exposure.assign(n, 1.0);
  for (std::size_t j = 0; j < 8; ++j) {
    data.numeric_pool[j].resize(n);
    for (std::size_t i = 0; i < n; ++i)
      data.numeric_pool[j][i] = static_cast<double>((i * 37) % 100);
  }
  data.categorical_pool[0].assign(n, 0);
  data.categorical_pool[1].assign(n, 0);

  const BinnedFeature binned = quantile_bin(data, "x_1", 4);
  CHECK(binned.source == "x_1");
  CHECK(binned.name == "x_1_bin");
  REQUIRE(binned.edges.size() == 3);
  CHECK(binned.bin_count() == 4);

  const Dataset with = with_binned_feature(data, binned);
  const auto& column = with.schema.feature("x_1_bin");
  CHECK(column.categories ==
        std::vector<std::string>{"b0", "b1", "b2", "b3"});
  std::vector<int> counts(4, 0);
  for (std::size_t i = 0; i < n; ++i)
    ++counts[static_cast<std::size_t>(with.codes("x_1_bin")[i])];
  for (const int count : counts) CHECK(count == 25);
}

TEST_CASE("duplicate quantiles collapse and constants are rejected") {
  Dataset data = make_dataset(synthetic_schema());
  const std::size_t n = 100;
  data.claims.assign(n, 0);
  data.exposure.assign(n, 1.0);
  for (std::size_t j = 0; j < 8; ++j) {
    data.numeric_pool[j].resize(n);
    for (std::size_t i = 0; i < n; ++i)
      data.numeric_pool[j][i] = i < 90 ? 0.0 : 1.0;
  }
  data.categorical_pool[0].assign(n, 0);
  data.categorical_pool[1].assign(n, 0);

  const BinnedFeature binned = quantile_bin(data, "x_1", 4);
  CHECK(binned.bin_count() == 2);  // only the 0/1 cut survives

  for (std::size_t i = 0; i < n; ++i) data.numeric_pool[0][i] = 5.0;
  CHECK_THROWS(quantile_bin(data, "x_1", 4));
}

TEST_CASE("a zero-iteration mini-GLM reproduces the benchmark offset") {
  const Fixture f(4000, 7);
  IrlsOptions frozen;
  frozen.max_iterations = 0;
  const auto form = NumNumForm{"x_4", 1, "x_5", 1};
  const MiniGlmReport report =
      fit_mini_glm(f.data, f.benchmark, form, frozen);

  // beta stays zero, so expected counts equal the benchmark's on test rows.
  const auto reference =
      predict(f.benchmark, f.data.test, log_exposure_offset(f.data.test));
  const double benchmark_dev =
      mean_poisson_deviance(reference, f.data.test.claims);
  CHECK(report.test_mean_deviance ==
        doctest::Approx(benchmark_dev).epsilon(1e-12));
}

TEST_CASE("the planted product interaction prices close to its true value") {
  const Fixture f;
  const MiniGlmReport report =
      fit_mini_glm(f.data, f.benchmark, NumNumForm{"x_4", 1, "x_5", 1});
  REQUIRE(report.converged);
  CHECK(report.coefficient_count == 1);
  REQUIRE(report.coefficients.size() == 1);
  CHECK(report.coefficients[0].estimate ==
        doctest::Approx(0.5).epsilon(0.25));
  CHECK(report.labels[0] == "x_4*x_5");

  const auto reference =
      predict(f.benchmark, f.data.test, log_exposure_offset(f.data.test));
  CHECK(report.test_mean_deviance <
        mean_poisson_deviance(reference, f.data.test.claims));
}

TEST_CASE("candidate expansion follows the feature kind rules") {
  const FeatureSchema schema = synthetic_schema();
  FormsConfig config;

  const auto num_num = expand_candidate({"x_4", "x_5", 1.0}, schema, config);
  CHECK(num_num.forms.size() == 9);  // 3x3 power grid

  const auto num_cat = expand_candidate({"x_5", "x_9", 1.0}, schema, config);
  REQUIRE(num_cat.forms.size() == 1);
  CHECK(std::holds_alternative<NumCatForm>(num_cat.forms[0]));

  const auto cat_cat = expand_candidate({"x_9", "x_10", 1.0}, schema, config);
  REQUIRE(cat_cat.forms.size() == 1);
  CHECK(std::holds_alternative<CatCatForm>(cat_cat.forms[0]));
}

TEST_CASE("recommend picks the planted pair and writes the comparison") {
  const Fixture f;
  const std::vector<FeaturePairScore> top{{"x_4", "x_5", 3.0},
                                          {"x_2", "x_8", 1.0}};
  FormsConfig config;
  const Recommendation rec = recommend(f.data, f.benchmark, top, config);

  REQUIRE(rec.winner >= 0);
  const auto& winner = rec.winning_report();
  CHECK(winner.feature_1 == "x_4");
  CHECK(winner.feature_2 == "x_5");
  CHECK(rec.term_text() == "x_4*x_5");
  // 9 forms per numeric pair, two pairs.
  CHECK(rec.reports.size() == 18);
  // Reports are KPI-sorted with the winner first.
  for (std::size_t k = 1; k < rec.reports.size(); ++k)
    if (rec.reports[k].converged && rec.reports[0].converged)
      CHECK(rec.reports[0].aic <= rec.reports[k].aic);

  const auto dir =
      std::filesystem::temp_directory_path() / "nbi-selection-tests";
  std::filesystem::create_directories(dir);
  write_comparison_csv(rec, dir / "comparison.csv");
  const std::string text = read_file(dir / "comparison.csv");
  CHECK(text.rfind("candidate,form,aic,bic,resid_deviance,test_deviance,"
                   "converged\n", 0) == 0);
  CHECK(text.find("x_4:x_5") != std::string::npos);
}

TEST_CASE("deviance and AIC rankings can disagree on binned variants") {
  const Fixture f;
  const std::vector<FeaturePairScore> top{{"x_4", "x_5", 3.0}};
  FormsConfig by_aic;
  by_aic.include_binned = true;
  by_aic.bin_count = 10;
  FormsConfig by_deviance = by_aic;
  by_deviance.kpi = SelectionKpi::residual_deviance;

  const Recommendation aic_rec = recommend(f.data, f.benchmark, top, by_aic);
  const Recommendation dev_rec =
      recommend(f.data, f.benchmark, top, by_deviance);

  // The raw product wins on AIC; the many-coefficient binned grid always
  // drives raw deviance lower.
  CHECK(aic_rec.winning_report().coefficient_count == 1);
  CHECK(dev_rec.winning_report().coefficient_count >
        aic_rec.winning_report().coefficient_count);
  CHECK(dev_rec.winning_report().residual_deviance <=
        aic_rec.winning_report().residual_deviance);
}

TEST_CASE("kmeans recovers well-separated planted clusters") {
  Rng rng(5);
  const int per_cluster = 40;
  Eigen::MatrixXd points(3 * per_cluster, 2);
  const double centers[3][2] = {{0.0, 0.0}, {10.0, 0.0}, {0.0, 10.0}};
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < per_cluster; ++i) {
      points(c * per_cluster + i, 0) = centers[c][0] + 0.1 * rng.normal();
      points(c * per_cluster + i, 1) = centers[c][1] + 0.1 * rng.normal();
    }

  const KMeansResult result = kmeans(points, 3, 17);
  // All members of a planted group share a label.
  for (int c = 0; c < 3; ++c)
    for (int i = 1; i < per_cluster; ++i)
      CHECK(result.assignment[static_cast<std::size_t>(c * per_cluster + i)] ==
            result.assignment[static_cast<std::size_t>(c * per_cluster)]);
  CHECK(result.inertia < 3 * per_cluster * 0.1);

  // Calinski-Harabasz peaks at the true cluster count.
  double best_score = -1.0;
  int best_k = 0;
  for (int k = 2; k <= 6; ++k) {
    const KMeansResult r = kmeans(points, k, 17);
    const double score = calinski_harabasz(points, r.assignment, k);
    if (score > best_score) {
      best_score = score;
      best_k = k;
    }
  }
  CHECK(best_k == 3);
}

TEST_CASE("kmeans handles duplicates and stays deterministic") {
  Eigen::MatrixXd points(6, 2);
  points << 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 5.0, 5.0, 5.0, 5.0, 9.0, 9.0;
  const KMeansResult a = kmeans(points, 3, 4);
  const KMeansResult b = kmeans(points, 3, 4);
  CHECK(a.assignment == b.assignment);
  CHECK(a.inertia == b.inertia);
  CHECK(a.inertia == doctest::Approx(0.0));

  CHECK_THROWS(calinski_harabasz(points, a.assignment, 1));
  // Perfect separation gives an infinite score.
  CHECK(std::isinf(calinski_harabasz(points, a.assignment, 3)));
}

TEST_CASE("recommendations are deterministic") {
  const Fixture f(6000, 11);
  const std::vector<FeaturePairScore> top{{"x_4", "x_5", 2.0},
                                          {"x_5", "x_9", 1.0}};
  const FormsConfig config;
  const Recommendation a = recommend(f.data, f.benchmark, top, config);
  const Recommendation b = recommend(f.data, f.benchmark, top, config);
  REQUIRE(a.winner == b.winner);
  REQUIRE(a.reports.size() == b.reports.size());
  for (std::size_t k = 0; k < a.reports.size(); ++k) {
    CHECK(a.reports[k].form_label == b.reports[k].form_label);
    CHECK(a.reports[k].aic == b.reports[k].aic);
  }
}
