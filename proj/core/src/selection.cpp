#include "nbi/selection.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "nbi/text.hpp"

namespace nbi {

BinnedFeature quantile_bin(const Dataset& data, const std::string& feature,
                           int bins) {
  if (bins < 2) throw std::invalid_argument("need at least two bins");
  const auto values = data.numeric(feature);
  const std::size_t n = values.size();
  if (n == 0) throw std::invalid_argument("no rows to bin");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());

  BinnedFeature binned;
  binned.source = feature;
  binned.name = feature + "_bin";
  const auto B = static_cast<std::size_t>(bins);
  for (std::size_t k = 1; k < B; ++k) {
    const std::size_t position = (n * k + B - 1) / B;  // ceil(n*k/B)
    const double edge = sorted[position - 1];
    // Duplicate edges collapse; the affected bins merge.
    if (binned.edges.empty() || edge > binned.edges.back())
      binned.edges.push_back(edge);
  }
  // Drop edges at the maximum, which would create an empty top bin.
  while (!binned.edges.empty() && binned.edges.back() >= sorted.back())
    binned.edges.pop_back();
  if (binned.edges.empty())
    throw std::invalid_argument("feature " + feature +
                                " has too few distinct values to bin");
  return binned;
}

Dataset with_binned_feature(const Dataset& data, const BinnedFeature& binned) {
  Dataset out = data;
  FeatureColumn column;
  column.name = binned.name;
  column.kind = FeatureKind::categorical;
  for (int b = 0; b < binned.bin_count(); ++b)
    column.categories.push_back("b" + std::to_string(b));
  out.schema.features.push_back(column);
  out.schema.validate();

  const auto values = data.numeric(binned.source);
  std::vector<std::int32_t> codes(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::int32_t bin = static_cast<std::int32_t>(binned.edges.size());
    for (std::size_t k = 0; k < binned.edges.size(); ++k)
      if (values[i] <= binned.edges[k]) {
        bin = static_cast<std::int32_t>(k);
        break;
      }
    codes[i] = bin;
  }
  out.categorical_pool.push_back(std::move(codes));
  return out;
}

SelectionKpi kpi_from_name(const std::string& name) {
  if (name == "aic") return SelectionKpi::aic;
  if (name == "bic") return SelectionKpi::bic;
  if (name == "deviance" || name == "residual_deviance")
    return SelectionKpi::residual_deviance;
  throw std::invalid_argument("unknown selection KPI: " + name);
}

std::string kpi_name(SelectionKpi kpi) {
  switch (kpi) {
    case SelectionKpi::aic: return "aic";
    case SelectionKpi::bic: return "bic";
    case SelectionKpi::residual_deviance: return "deviance";
  }
  return "aic";
}

MiniGlmReport fit_mini_glm(const SplitDataset& data, const GlmModel& benchmark,
                           const InteractionForm& form,
                           const IrlsOptions& options) {
  MiniGlmReport report;
  report.form = form;
  report.form_label = form_to_string(form);

  const Dataset fit_data = concat_rows(data.train, data.validation);
  const auto benchmark_fit =
      predict(benchmark, fit_data, log_exposure_offset(fit_data));
  Offset offset(benchmark_fit.size());
  for (std::size_t i = 0; i < offset.size(); ++i)
    offset[i] = std::log(benchmark_fit[i]);

  const std::vector<TermSpec> terms{InteractionTerm{form}};
  try {
    const GlmModel mini = fit_poisson(fit_data, terms, offset, options);
    report.converged = mini.fit.converged;
    report.coefficient_count = static_cast<int>(mini.beta.size());
    report.aic = mini.fit.aic;
    report.bic = mini.fit.bic;
    report.residual_deviance = mini.fit.residual_deviance;
    report.labels = mini.labels;
    report.coefficients = mini.coefficients;

    const auto benchmark_test =
        predict(benchmark, data.test, log_exposure_offset(data.test));
    Offset offset_test(benchmark_test.size());
    for (std::size_t i = 0; i < offset_test.size(); ++i)
      offset_test[i] = std::log(benchmark_test[i]);
    const auto expected = predict(mini, data.test, offset_test);
    report.test_mean_deviance =
        mean_poisson_deviance(expected, data.test.claims);
  } catch (const std::exception& error) {
    report.converged = false;
    report.note = error.what();
  }
  return report;
}

CandidateInteraction expand_candidate(const FeaturePairScore& pair,
                                      const FeatureSchema& schema,
                                      const FormsConfig& config) {
  CandidateInteraction candidate;
  candidate.feature_1 = pair.feature_1;
  candidate.feature_2 = pair.feature_2;
  const bool numeric_1 = schema.is_numeric(pair.feature_1);
  const bool numeric_2 = schema.is_numeric(pair.feature_2);

  if (numeric_1 && numeric_2) {
    for (const int a : config.powers)
      for (const int b : config.powers)
        candidate.forms.push_back(
            NumNumForm{pair.feature_1, a, pair.feature_2, b});
    if (config.include_binned)
      candidate.forms.push_back(CatCatForm{pair.feature_1 + "_bin",
                                           pair.feature_2 + "_bin"});
  } else if (!numeric_1 && !numeric_2) {
    candidate.forms.push_back(CatCatForm{pair.feature_1, pair.feature_2});
  } else {
    const auto& numeric_name = numeric_1 ? pair.feature_1 : pair.feature_2;
    const auto& categorical_name = numeric_1 ? pair.feature_2 : pair.feature_1;
    candidate.forms.push_back(NumCatForm{numeric_name, categorical_name});
    if (config.include_binned)
      candidate.forms.push_back(
          CatCatForm{numeric_name + "_bin", categorical_name});
  }
  return candidate;
}

const MiniGlmReport& Recommendation::winning_report() const {
  if (winner < 0)
    throw std::runtime_error("no candidate mini-GLM converged");
  return reports[static_cast<std::size_t>(winner)];
}

std::string Recommendation::term_text() const {
  return form_to_string(winning_report().form);
}

namespace {

double kpi_value(const MiniGlmReport& report, SelectionKpi kpi) {
  switch (kpi) {
    case SelectionKpi::aic: return report.aic;
    case SelectionKpi::bic: return report.bic;
    case SelectionKpi::residual_deviance: return report.residual_deviance;
  }
  return report.aic;
}

// Features named by a form that are missing from the schema; used to decide
// which derived columns a candidate needs.
std::vector<std::string> form_features(const InteractionForm& form) {
  return std::visit(
      [](const auto& f) -> std::vector<std::string> {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, NumNumForm>)
          return {f.feature_1, f.feature_2};
        else if constexpr (std::is_same_v<F, NumCatForm>)
          return {f.numeric_feature, f.categorical_feature};
        else
          return {f.feature_1, f.feature_2};
      },
      form);
}

}  // namespace

Recommendation recommend(const SplitDataset& data, const GlmModel& benchmark,
                         const std::vector<FeaturePairScore>& top,
                         const FormsConfig& config, const CannModel* model) {
  if (top.empty())
    throw std::invalid_argument("recommend needs at least one ranked pair");

  const FeatureSchema& schema = data.train.schema;
  Recommendation recommendation;

  // Expand pairs into forms, including cluster variants where an embedding
  // is available.
  struct Expanded {
    std::string feature_1;
    std::string feature_2;
    InteractionForm form;
  };
  std::vector<Expanded> expanded;
  std::set<std::string> need_binned;
  std::set<std::string> need_clustered;

  for (const auto& pair : top) {
    CandidateInteraction candidate = expand_candidate(pair, schema, config);
    if (config.include_clustered && model != nullptr) {
      for (const auto& name : {pair.feature_1, pair.feature_2}) {
        const bool embedded =
            std::any_of(model->architecture.embeddings.begin(),
                        model->architecture.embeddings.end(),
                        [&](const EmbeddingSpec& spec) {
                          return spec.feature == name;
                        });
        if (!embedded) continue;
        const auto& other =
            name == pair.feature_1 ? pair.feature_2 : pair.feature_1;
        if (schema.is_numeric(other))
          candidate.forms.push_back(NumCatForm{other, name + "_cluster"});
        else
          candidate.forms.push_back(CatCatForm{other, name + "_cluster"});
        need_clustered.insert(name);
      }
    }
    for (auto& form : candidate.forms) {
      for (const auto& name : form_features(form))
        if (name.ends_with("_bin"))
          need_binned.insert(name.substr(0, name.size() - 4));
      expanded.push_back({candidate.feature_1, candidate.feature_2,
                          std::move(form)});
    }
  }

  // Materialize derived columns on all three splits.  Bin edges come from
  // the benchmark's fitting data; cluster maps from the trained embeddings.
  SplitDataset augmented = data;
  if (!need_binned.empty()) {
    const Dataset fitting = concat_rows(data.train, data.validation);
    for (const auto& source : need_binned) {
      const BinnedFeature binned = quantile_bin(fitting, source,
                                                config.bin_count);
      recommendation.binned_features.push_back(binned);
      augmented.train = with_binned_feature(augmented.train, binned);
      augmented.validation = with_binned_feature(augmented.validation, binned);
      augmented.test = with_binned_feature(augmented.test, binned);
    }
  }
  for (const auto& source : need_clustered) {
    ClusterMap map = cluster_embeddings(*model, source, config.cluster_k_min,
                                        config.cluster_k_max,
                                        config.cluster_seed);
    const std::string name = source + "_cluster";
    augmented.train = with_clustered_feature(augmented.train, map, name);
    augmented.validation =
        with_clustered_feature(augmented.validation, map, name);
    augmented.test = with_clustered_feature(augmented.test, map, name);
    recommendation.cluster_maps.push_back(std::move(map));
  }

  for (const auto& entry : expanded) {
    MiniGlmReport report = fit_mini_glm(augmented, benchmark, entry.form);
    report.feature_1 = entry.feature_1;
    report.feature_2 = entry.feature_2;
    recommendation.reports.push_back(std::move(report));
  }

  // Converged reports first, best KPI first; unfittable ones keep their
  // expansion order at the tail.
  std::stable_sort(
      recommendation.reports.begin(), recommendation.reports.end(),
      [&](const MiniGlmReport& a, const MiniGlmReport& b) {
        if (a.converged != b.converged) return a.converged;
        if (!a.converged) return false;
        const double ka = kpi_value(a, config.kpi);
        const double kb = kpi_value(b, config.kpi);
        if (ka != kb) return ka < kb;
        if (a.coefficient_count != b.coefficient_count)
          return a.coefficient_count < b.coefficient_count;
        const auto pa = a.feature_1 + "," + a.feature_2;
        const auto pb = b.feature_1 + "," + b.feature_2;
        if (pa != pb) return pa < pb;
        return a.form_label < b.form_label;
      });
  recommendation.winner =
      !recommendation.reports.empty() && recommendation.reports[0].converged
          ? 0
          : -1;
  return recommendation;
}

void write_comparison_csv(const Recommendation& recommendation,
                          const std::filesystem::path& path) {
  std::ostringstream out;
  out << "candidate,form,aic,bic,resid_deviance,test_deviance,converged\n";
  for (const auto& report : recommendation.reports) {
    out << report.feature_1 << ':' << report.feature_2 << ','
        << report.form_label << ',';
    if (report.converged)
      out << format_double(report.aic) << ',' << format_double(report.bic)
          << ',' << format_double(report.residual_deviance) << ','
          << format_double(report.test_mean_deviance);
    else
      out << ",,,";
    out << ',' << (report.converged ? "true" : "false") << '\n';
  }
  write_file(path, out.str());
}

}  // namespace nbi
