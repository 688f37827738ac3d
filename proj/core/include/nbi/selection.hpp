#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nbi/clustering.hpp"
#include "nbi/glm.hpp"
#include "nbi/nid.hpp"

namespace nbi {

// A numeric feature cut into quantile intervals, usable as a categorical
// feature.  `edges` are the inner cut points (bins - 1 of them after
// deduplication); values at or below an edge fall in the lower bin.
struct BinnedFeature {
  std::string source;
  std::string name;
  std::vector<double> edges;

  int bin_count() const { return static_cast<int>(edges.size()) + 1; }
};

// Cut points from the feature's quantiles on `data`.  Throws when fewer than
// two distinct bins remain (e.g. constant feature).
BinnedFeature quantile_bin(const Dataset& data, const std::string& feature,
                          int bins);

// Appends the binned feature as a categorical column, levels "b0".."b{B-1}".
Dataset with_binned_feature(const Dataset& data, const BinnedFeature& binned);

// Candidate interaction for one feature pair: every concrete form to try.
struct CandidateInteraction {
  std::string feature_1;
  std::string feature_2;
  std::vector<InteractionForm> forms;
};

// Result of fitting one candidate form as an intercept-free Poisson GLM with
// the benchmark prediction folded into the offset.
struct MiniGlmReport {
  InteractionForm form;
  std::string form_label;
  std::string feature_1;  // the originating ranked pair
  std::string feature_2;
  bool converged = false;
  std::string note;  // failure reason when not fit (e.g. rank deficiency)
  int coefficient_count = 0;
  double aic = 0.0;
  double bic = 0.0;
  double residual_deviance = 0.0;
  double test_mean_deviance = 0.0;
  std::vector<std::string> labels;
  std::vector<CoefficientStat> coefficients;
};

// Fits on train+validation (the benchmark's own fitting data); the test
// split only feeds test_mean_deviance.  The offset is ln(exposure) plus the
// benchmark's log prediction, and there is no intercept: the benchmark
// carries the level, the mini-GLM only prices the candidate interaction.
MiniGlmReport fit_mini_glm(const SplitDataset& data, const GlmModel& benchmark,
                           const InteractionForm& form,
                           const IrlsOptions& options = {});

enum class SelectionKpi { aic, bic, residual_deviance };
SelectionKpi kpi_from_name(const std::string& name);
std::string kpi_name(SelectionKpi kpi);

struct FormsConfig {
  std::vector<int> powers{1, 2, 3};  // exponent grid for numeric pairs
  SelectionKpi kpi = SelectionKpi::aic;
  // Also try numeric features cut into quantile bins (categorical forms).
  bool include_binned = false;
  int bin_count = 10;
  // Cluster levels of embedded categorical features via their embeddings
  // and try the clustered variant alongside the raw one.
  bool include_clustered = false;
  int cluster_k_min = 2;
  int cluster_k_max = 10;
  std::uint64_t cluster_seed = 0;
};

// Expands a ranked pair into concrete forms following the kind rules:
// numeric*numeric gets the power grid, numeric*categorical one slope per
// level, categorical*categorical the full dummy grid.
CandidateInteraction expand_candidate(const FeaturePairScore& pair,
                                      const FeatureSchema& schema,
                                      const FormsConfig& config);

struct Recommendation {
  // All candidate reports, best first (unfittable candidates at the end).
  std::vector<MiniGlmReport> reports;
  int winner = -1;  // index into reports, -1 when nothing converged
  // Derived feature definitions the winner depends on, if any.
  std::vector<BinnedFeature> binned_features;
  std::vector<ClusterMap> cluster_maps;

  const MiniGlmReport& winning_report() const;
  // The term to add to the benchmark, e.g. "x_4*x_5".
  std::string term_text() const;
};

// Scores every form of every top pair and picks the best KPI among converged
// fits; ties prefer fewer coefficients, then the lexicographically smaller
// pair label.  `model` supplies embeddings for clustered variants and may be
// null when include_clustered is off.
Recommendation recommend(const SplitDataset& data, const GlmModel& benchmark,
                         const std::vector<FeaturePairScore>& top,
                         const FormsConfig& config,
                         const CannModel* model = nullptr);

void write_comparison_csv(const Recommendation& recommendation,
                          const std::filesystem::path& path);

}  // namespace nbi
