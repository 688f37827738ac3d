#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "nbi/terms.hpp"

namespace nbi {

// Per-row offset on the linear predictor scale (natural log).
using Offset = std::vector<double>;

// ln(exposure) per row, the standard offset for frequency models.
Offset log_exposure_offset(const Dataset& data);

// The design matrix is numerically rank deficient; the message lists the
// labels of the redundant columns.
struct DesignRankError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IrlsOptions {
  double tolerance = 1e-8;  // relative deviance change between iterations
  int max_iterations = 25;
};

struct GlmFitStats {
  double log_likelihood = 0.0;
  double residual_deviance = 0.0;
  double null_deviance = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  std::int64_t degrees_of_freedom = 0;  // rows minus coefficients
  bool converged = false;
  int iterations = 0;
  // Deviance after each IRLS update, for monitoring monotone descent.
  std::vector<double> iteration_deviance;
};

struct CoefficientStat {
  double estimate = 0.0;
  double std_error = 0.0;
  double z_value = 0.0;
  double p_value = 1.0;  // two-sided Wald test against zero
};

// Fitted Poisson regression with log link.  `terms` and `labels` describe
// the design; `beta` is one coefficient per design column.
struct GlmModel {
  FeatureSchema schema;
  std::vector<TermSpec> terms;
  std::vector<std::string> labels;
  Eigen::VectorXd beta;
  GlmFitStats fit;
  std::vector<CoefficientStat> coefficients;

  bool has_intercept() const;
};

// Maximum-likelihood fit via iteratively reweighted least squares with step
// halving.  Throws DesignRankError on collinear designs and a runtime error
// when the linear predictor overflows exp().
GlmModel fit_poisson(const Dataset& data, const std::vector<TermSpec>& terms,
                     const Offset& offset, const IrlsOptions& options = {});

// Expected claim counts exp(x'beta + offset) per row.
std::vector<double> predict(const GlmModel& model, const Dataset& data,
                            const Offset& offset);

// Total deviance 2*sum(y ln(y/mu) - (y - mu)), with y ln(y/mu) read as zero
// when y = 0.  Lengths must match.
double poisson_deviance(std::span<const double> expected,
                        std::span<const std::int64_t> claims);
double mean_poisson_deviance(std::span<const double> expected,
                             std::span<const std::int64_t> claims);

struct PortfolioMetrics {
  double mean_deviance = 0.0;
  double wapf = 0.0;  // exposure-weighted average predicted frequency
  double waof = 0.0;  // exposure-weighted average observed frequency
  double balance_gap = 0.0;  // |wapf - waof| relative to waof
};
PortfolioMetrics portfolio_metrics(std::span<const double> expected,
                                   const Dataset& data);

void save_glm(const GlmModel& model, const std::filesystem::path& path);
GlmModel load_glm(const std::filesystem::path& path);

}  // namespace nbi
