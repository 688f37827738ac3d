#include "nbi/glm.hpp"

#include <cmath>
#include <sstream>

namespace nbi {

namespace {

constexpr double kMaxLinearPredictor = 690.0;  // exp() overflows above ~709

Eigen::VectorXd as_vector(std::span<const double> values) {
  return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                           static_cast<Eigen::Index>(
                                               values.size()));
}

void check_predictor(const Eigen::VectorXd& eta) {
  if (eta.maxCoeff() > kMaxLinearPredictor)
    throw std::runtime_error(
        "linear predictor overflows exp(); consider rescaling features or "
        "checking the offset");
}

double deviance_of(const Eigen::VectorXd& mu,
                   std::span<const std::int64_t> claims) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    const auto y = static_cast<double>(claims[static_cast<std::size_t>(i)]);
    double term = mu[i] - y;
    if (y > 0.0) term += y * std::log(y / mu[i]);
    total += term;
  }
  return 2.0 * total;
}

// Closed-form intercept given an offset: beta_0 = ln(sum y / sum e^offset).
double null_deviance_of(const Dataset& data, const Offset& offset,
                        bool with_intercept) {
  Eigen::VectorXd eta = as_vector(offset);
  if (with_intercept) {
    double total_claims = 0.0;
    for (const auto y : data.claims) total_claims += static_cast<double>(y);
    const double denom = eta.array().exp().sum();
    eta.array() += std::log(total_claims / denom);
  }
  return deviance_of(eta.array().exp(), data.claims);
}

void check_rank(const Eigen::MatrixXd& normal,
                const std::vector<std::string>& labels) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(normal);
  qr.setThreshold(1e-10);
  if (qr.rank() == normal.cols()) return;
  const auto& perm = qr.colsPermutation().indices();
  std::ostringstream message;
  message << "design matrix is rank deficient; redundant columns:";
  for (Eigen::Index i = qr.rank(); i < normal.cols(); ++i)
    message << ' ' << labels[static_cast<std::size_t>(perm[i])];
  throw DesignRankError(message.str());
}

}  // namespace

Offset log_exposure_offset(const Dataset& data) {
  Offset offset(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    offset[i] = std::log(data.exposure[i]);
  return offset;
}

bool GlmModel::has_intercept() const {
  for (const auto& term : terms)
    if (std::holds_alternative<InterceptTerm>(term)) return true;
  return false;
}

GlmModel fit_poisson(const Dataset& data, const std::vector<TermSpec>& terms,
                     const Offset& offset, const IrlsOptions& options) {
  if (offset.size() != data.size())
    throw std::invalid_argument("offset length does not match data");
  if (terms.empty()) throw std::invalid_argument("empty term list");

  GlmModel model;
  model.schema = data.schema;
  model.terms = terms;

  DesignMatrix design = build_design(data, terms);
  model.labels = design.labels;
  const Eigen::MatrixXd& X = design.values;
  const auto n = X.rows();
  const auto p = X.cols();
  if (n <= p)
    throw std::invalid_argument("need more rows than coefficients");

  const Eigen::VectorXd off = as_vector(offset);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = off;
  check_predictor(eta);
  Eigen::VectorXd mu = eta.array().exp();
  double deviance = deviance_of(mu, data.claims);

  auto& fit = model.fit;
  bool rank_checked = false;
  Eigen::MatrixXd normal(p, p);
  for (int iteration = 1; iteration <= options.max_iterations; ++iteration) {
    // Working response z = eta - offset + (y - mu)/mu; weights w = mu.
    Eigen::VectorXd working(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto y = static_cast<double>(data.claims[static_cast<std::size_t>(
          i)]);
      working[i] = eta[i] - off[i] + (y - mu[i]) / mu[i];
    }
    normal.noalias() = X.transpose() * mu.asDiagonal() * X;
    if (!rank_checked) {
      check_rank(normal, model.labels);
      rank_checked = true;
    }
    const Eigen::VectorXd rhs = X.transpose() * mu.cwiseProduct(working);
    Eigen::VectorXd proposal = normal.ldlt().solve(rhs);

    // Step halving: back off towards the previous iterate until the
    // deviance stops increasing.
    Eigen::VectorXd eta_next;
    Eigen::VectorXd mu_next;
    double deviance_next = 0.0;
    for (int halving = 0; halving <= 30; ++halving) {
      eta_next = X * proposal + off;
      if (eta_next.maxCoeff() > kMaxLinearPredictor) {
        if (halving == 30) check_predictor(eta_next);
        proposal = 0.5 * (beta + proposal);
        continue;
      }
      mu_next = eta_next.array().exp();
      deviance_next = deviance_of(mu_next, data.claims);
      if (deviance_next <= deviance * (1.0 + 1e-12) + 1e-12 || halving == 30)
        break;
      proposal = 0.5 * (beta + proposal);
    }

    beta = proposal;
    eta = eta_next;
    mu = mu_next;
    fit.iterations = iteration;
    fit.iteration_deviance.push_back(deviance_next);
    const double change =
        std::abs(deviance - deviance_next) / (0.1 + std::abs(deviance_next));
    deviance = deviance_next;
    if (change < options.tolerance) {
      fit.converged = true;
      break;
    }
  }

  model.beta = beta;
  fit.residual_deviance = deviance;
  fit.null_deviance = null_deviance_of(data, offset, model.has_intercept());
  fit.degrees_of_freedom = n - p;

  double log_likelihood = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto y = static_cast<double>(data.claims[static_cast<std::size_t>(
        i)]);
    log_likelihood += y * eta[i] - mu[i] - std::lgamma(y + 1.0);
  }
  fit.log_likelihood = log_likelihood;
  fit.aic = 2.0 * static_cast<double>(p) - 2.0 * log_likelihood;
  fit.bic = static_cast<double>(p) * std::log(static_cast<double>(n)) -
            2.0 * log_likelihood;

  // Wald statistics from the inverse Fisher information at the optimum.
  normal.noalias() = X.transpose() * mu.asDiagonal() * X;
  const Eigen::MatrixXd covariance =
      normal.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  model.coefficients.resize(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    auto& stat = model.coefficients[static_cast<std::size_t>(j)];
    stat.estimate = beta[j];
    stat.std_error = std::sqrt(std::max(covariance(j, j), 0.0));
    stat.z_value = stat.std_error > 0.0 ? beta[j] / stat.std_error : 0.0;
    stat.p_value = std::erfc(std::abs(stat.z_value) / std::sqrt(2.0));
  }
  return model;
}

std::vector<double> predict(const GlmModel& model, const Dataset& data,
                            const Offset& offset) {
  if (offset.size() != data.size())
    throw std::invalid_argument("offset length does not match data");
  const DesignMatrix design = build_design(data, model.terms);
  if (design.values.cols() != model.beta.size())
    throw std::invalid_argument("model does not match dataset schema");
  Eigen::VectorXd eta = design.values * model.beta + as_vector(offset);
  check_predictor(eta);
  std::vector<double> expected(data.size());
  for (std::size_t i = 0; i < expected.size(); ++i)
    expected[i] = std::exp(eta[static_cast<Eigen::Index>(i)]);
  return expected;
}

double poisson_deviance(std::span<const double> expected,
                        std::span<const std::int64_t> claims) {
  if (expected.size() != claims.size())
    throw std::invalid_argument("length mismatch in deviance");
  return deviance_of(as_vector(expected), claims);
}

double mean_poisson_deviance(std::span<const double> expected,
                             std::span<const std::int64_t> claims) {
  if (expected.empty()) throw std::invalid_argument("empty deviance input");
  return poisson_deviance(expected, claims) /
         static_cast<double>(expected.size());
}

PortfolioMetrics portfolio_metrics(std::span<const double> expected,
                                   const Dataset& data) {
  if (expected.size() != data.size())
    throw std::invalid_argument("length mismatch in portfolio metrics");
  PortfolioMetrics metrics;
  metrics.mean_deviance = mean_poisson_deviance(expected, data.claims);
  double total_exposure = 0.0;
  double total_expected = 0.0;
  double total_observed = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    total_exposure += data.exposure[i];
    total_expected += expected[i];
    total_observed += static_cast<double>(data.claims[i]);
  }
  metrics.wapf = total_expected / total_exposure;
  metrics.waof = total_observed / total_exposure;
  metrics.balance_gap =
      std::abs(metrics.wapf - metrics.waof) / std::abs(metrics.waof);
  return metrics;
}

}  // namespace nbi
