#include <cmath>
#include <filesystem>
#include <numeric>
#include <vector>

#include <doctest.h>

#include "nbi/glm.hpp"
#include "nbi/synthetic.hpp"

using namespace nbi;
namespace fs = std::filesystem;

namespace {

Dataset portfolio(std::size_t n, std::uint64_t seed) {
  Dataset data = generate_synthetic(n, seed);
  // Vary exposure so offset handling is actually exercised.
  for (std::size_t i = 0; i < n; ++i)
    data.exposure[i] = 0.25 + 0.5 * static_cast<double>(i % 4);
  return data;
}

std::vector<TermSpec> parse_terms(const FeatureSchema& schema,
                                  std::initializer_list<const char*> texts) {
  std::vector<TermSpec> terms;
  for (const auto* text : texts) terms.push_back(parse_term(text, schema));
  return terms;
}

}  // namespace

TEST_CASE("intercept-only fit recovers the closed-form rate") {
  const Dataset data = portfolio(400, 3);
  const GlmModel model =
      fit_poisson(data, parse_terms(data.schema, {"intercept"}),
                  log_exposure_offset(data));

  double claims = 0.0, exposure = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    claims += static_cast<double>(data.claims[i]);
    exposure += data.exposure[i];
  }
  CHECK(model.beta[0] ==
        doctest::Approx(std::log(claims / exposure)).epsilon(1e-10));
  // With only the intercept, residual and null deviance coincide.
  CHECK(model.fit.residual_deviance ==
        doctest::Approx(model.fit.null_deviance).epsilon(1e-10));
}

TEST_CASE("poisson deviance matches the textbook two-row formula") {
  const std::vector<double> mu{0.5, 2.0};
  const std::vector<std::int64_t> y{1, 0};
  const double expected =
      2.0 * (1.0 * std::log(1.0 / 0.5) - (1.0 - 0.5)) + 2.0 * 2.0;
  CHECK(poisson_deviance(mu, y) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(mean_poisson_deviance(mu, y) ==
        doctest::Approx(expected / 2.0).epsilon(1e-14));
}

TEST_CASE("converged fits with intercept satisfy the balance property") {
  const Dataset data = portfolio(3000, 11);
  const GlmModel model = fit_poisson(
      data, parse_terms(data.schema, {"intercept", "x_1", "x_2^2", "x_9"}),
      log_exposure_offset(data));
  REQUIRE(model.fit.converged);
  const auto expected = predict(model, data, log_exposure_offset(data));
  const auto metrics = portfolio_metrics(expected, data);
  CHECK(metrics.balance_gap < 1e-8);
}

TEST_CASE("rescaling exposure shifts only the intercept") {
  const Dataset data = portfolio(2000, 7);
  Dataset scaled = data;
  for (auto& v : scaled.exposure) v *= 3.0;

  const auto terms =
      parse_terms(data.schema, {"intercept", "x_1", "x_3", "x_9"});
  const GlmModel base =
      fit_poisson(data, terms, log_exposure_offset(data));
  const GlmModel shifted =
      fit_poisson(scaled, terms, log_exposure_offset(scaled));

  CHECK(std::abs(shifted.beta[0] - (base.beta[0] - std::log(3.0))) < 1e-8);
  for (Eigen::Index j = 1; j < base.beta.size(); ++j)
    CHECK(std::abs(shifted.beta[j] - base.beta[j]) < 1e-8);
}

TEST_CASE("IRLS deviance is non-increasing across iterations") {
  const Dataset data = portfolio(5000, 19);
  const GlmModel model = fit_poisson(
      data,
      parse_terms(data.schema,
                  {"intercept", "x_1", "x_2^2", "x_3", "x_3^2", "x_9",
                   "x_10", "x_4*x_5"}),
      log_exposure_offset(data));
  REQUIRE(model.fit.converged);
  REQUIRE(!model.fit.iteration_deviance.empty());
  for (std::size_t k = 1; k < model.fit.iteration_deviance.size(); ++k)
    CHECK(model.fit.iteration_deviance[k] <=
          model.fit.iteration_deviance[k - 1] * (1.0 + 1e-12) + 1e-12);
}

TEST_CASE("adding a term never worsens residual deviance or the fit KPIs") {
  const Dataset data = portfolio(4000, 23);
  const auto small =
      parse_terms(data.schema, {"intercept", "x_1", "x_9"});
  auto large = small;
  large.push_back(parse_term("x_4*x_5", data.schema));

  const GlmModel a = fit_poisson(data, small, log_exposure_offset(data));
  const GlmModel b = fit_poisson(data, large, log_exposure_offset(data));
  CHECK(b.fit.residual_deviance <= a.fit.residual_deviance + 1e-8);
  // AIC/BIC bookkeeping: one more coefficient.
  CHECK(b.beta.size() == a.beta.size() + 1);
  const auto n = static_cast<double>(data.size());
  CHECK(a.fit.bic - a.fit.aic ==
        doctest::Approx(static_cast<double>(a.beta.size()) *
                        (std::log(n) - 2.0)));
}

TEST_CASE("collinear designs raise a rank error naming the column") {
  const Dataset data = portfolio(300, 29);
  std::vector<TermSpec> terms =
      parse_terms(data.schema, {"intercept", "x_1", "x_1"});
  try {
    fit_poisson(data, terms, log_exposure_offset(data));
    FAIL("expected DesignRankError");
  } catch (const DesignRankError& error) {
    CHECK(std::string(error.what()).find("x_1") != std::string::npos);
  }
}

TEST_CASE("planted main effects show up as significant Wald tests") {
  const Dataset data = generate_synthetic(20000, 31);
  const GlmModel model = fit_poisson(
      data, parse_terms(data.schema, {"intercept", "x_1", "x_7"}),
      log_exposure_offset(data));
  REQUIRE(model.coefficients.size() == 3);
  for (const auto& stat : model.coefficients) {
    CHECK(stat.std_error > 0.0);
    CHECK(stat.p_value >= 0.0);
    CHECK(stat.p_value <= 1.0);
  }
  // x_1 carries a planted 0.5 slope; x_7 is pure noise.
  CHECK(model.coefficients[1].p_value < 1e-6);
  CHECK(model.coefficients[2].p_value > 1e-4);
  CHECK(model.coefficients[1].estimate == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("models survive a save/load round trip") {
  const Dataset data = portfolio(1500, 37);
  const GlmModel model = fit_poisson(
      data,
      parse_terms(data.schema, {"intercept", "x_2^2", "x_9", "x_5*x_10"}),
      log_exposure_offset(data));

  const fs::path dir = fs::temp_directory_path() / "nbi-glm-tests";
  fs::create_directories(dir);
  save_glm(model, dir / "model.json");
  const GlmModel back = load_glm(dir / "model.json");

  CHECK(back.labels == model.labels);
  CHECK(back.beta.size() == model.beta.size());
  for (Eigen::Index j = 0; j < model.beta.size(); ++j)
    CHECK(back.beta[j] == model.beta[j]);
  const auto a = predict(model, data, log_exposure_offset(data));
  const auto b = predict(back, data, log_exposure_offset(data));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  CHECK(back.fit.aic == model.fit.aic);
}
