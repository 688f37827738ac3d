#include "nbi/nid.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

#include "nbi/text.hpp"

namespace nbi {

PairSurrogate surrogate_from_name(const std::string& name) {
  if (name == "min") return PairSurrogate::minimum;
  if (name == "harmonic") return PairSurrogate::harmonic_mean;
  throw std::invalid_argument("unknown pair surrogate: " + name);
}

GroupAggregation aggregation_from_name(const std::string& name) {
  if (name == "min") return GroupAggregation::minimum;
  if (name == "mean") return GroupAggregation::mean;
  if (name == "max") return GroupAggregation::maximum;
  throw std::invalid_argument("unknown group aggregation: " + name);
}

std::string surrogate_name(PairSurrogate surrogate) {
  return surrogate == PairSurrogate::minimum ? "min" : "harmonic";
}

std::string aggregation_name(GroupAggregation aggregation) {
  switch (aggregation) {
    case GroupAggregation::minimum: return "min";
    case GroupAggregation::mean: return "mean";
    case GroupAggregation::maximum: return "max";
  }
  return "min";
}

Eigen::VectorXd influence_vector(const NnWeights& weights) {
  if (weights.layer_weights.empty())
    return weights.output_weights.cwiseAbs();
  Eigen::VectorXd zeta = weights.output_weights.cwiseAbs();
  for (std::size_t l = weights.layer_weights.size() - 1; l >= 1; --l)
    zeta = weights.layer_weights[l].cwiseAbs().transpose() * zeta;
  return zeta;
}

std::vector<InputPairScore> input_pair_scores(const NnWeights& weights,
                                              PairSurrogate surrogate) {
  if (weights.layer_weights.empty())
    throw std::invalid_argument(
        "interaction scores need at least one hidden layer");
  const Eigen::VectorXd zeta = influence_vector(weights);
  const Eigen::MatrixXd first = weights.layer_weights[0].cwiseAbs();
  const auto inputs = first.cols();

  std::vector<InputPairScore> scores;
  scores.reserve(static_cast<std::size_t>(inputs * (inputs - 1) / 2));
  for (Eigen::Index i = 0; i < inputs; ++i) {
    for (Eigen::Index j = i + 1; j < inputs; ++j) {
      double score = 0.0;
      for (Eigen::Index r = 0; r < first.rows(); ++r) {
        const double a = first(r, i);
        const double b = first(r, j);
        double combined = 0.0;
        if (surrogate == PairSurrogate::minimum) {
          combined = std::min(a, b);
        } else {
          // Harmonic mean, zero when either weight is zero.
          combined = a > 0.0 && b > 0.0 ? 2.0 / (1.0 / a + 1.0 / b) : 0.0;
        }
        score += zeta[r] * combined;
      }
      scores.push_back(
          {static_cast<int>(i), static_cast<int>(j), score});
    }
  }
  return scores;
}

std::vector<FeaturePairScore> aggregate_pair_scores(
    const std::vector<InputPairScore>& scores,
    const std::vector<std::string>& input_feature,
    GroupAggregation aggregation) {
  // Group inputs by feature, keeping first-appearance order for output.
  std::vector<std::string> group_names;
  std::vector<int> group_of(input_feature.size());
  for (std::size_t i = 0; i < input_feature.size(); ++i) {
    const auto found = std::find(group_names.begin(), group_names.end(),
                                 input_feature[i]);
    if (found == group_names.end()) {
      group_of[i] = static_cast<int>(group_names.size());
      group_names.push_back(input_feature[i]);
    } else {
      group_of[i] = static_cast<int>(found - group_names.begin());
    }
  }

  struct Accumulator {
    double minimum = 0.0;
    double maximum = 0.0;
    double total = 0.0;
    std::size_t count = 0;
  };
  std::map<std::pair<int, int>, Accumulator> cells;
  for (const auto& entry : scores) {
    if (entry.input_1 < 0 ||
        static_cast<std::size_t>(entry.input_1) >= input_feature.size() ||
        entry.input_2 < 0 ||
        static_cast<std::size_t>(entry.input_2) >= input_feature.size())
      throw std::invalid_argument("input index outside the feature map");
    int g1 = group_of[static_cast<std::size_t>(entry.input_1)];
    int g2 = group_of[static_cast<std::size_t>(entry.input_2)];
    if (g1 == g2) continue;  // within-feature pair, not an interaction
    if (g1 > g2) std::swap(g1, g2);
    auto& cell = cells[{g1, g2}];
    if (cell.count == 0) {
      cell.minimum = cell.maximum = entry.score;
    } else {
      cell.minimum = std::min(cell.minimum, entry.score);
      cell.maximum = std::max(cell.maximum, entry.score);
    }
    cell.total += entry.score;
    cell.count += 1;
  }

  std::vector<FeaturePairScore> out;
  out.reserve(cells.size());
  for (const auto& [key, cell] : cells) {
    double value = 0.0;
    switch (aggregation) {
      case GroupAggregation::minimum: value = cell.minimum; break;
      case GroupAggregation::mean:
        value = cell.total / static_cast<double>(cell.count);
        break;
      case GroupAggregation::maximum: value = cell.maximum; break;
    }
    out.push_back({group_names[static_cast<std::size_t>(key.first)],
                   group_names[static_cast<std::size_t>(key.second)], value});
  }
  return out;
}

std::vector<FeaturePairScore> rank_pairs(std::vector<FeaturePairScore> scores,
                                         std::size_t top_k) {
  std::sort(scores.begin(), scores.end(),
            [](const FeaturePairScore& a, const FeaturePairScore& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.feature_1 != b.feature_1) return a.feature_1 < b.feature_1;
              return a.feature_2 < b.feature_2;
            });
  if (top_k > 0 && scores.size() > top_k) scores.resize(top_k);
  return scores;
}

std::vector<FeaturePairScore> detect_interactions(const CannModel& model,
                                                  PairSurrogate surrogate,
                                                  GroupAggregation aggregation,
                                                  std::size_t top_k) {
  const auto inputs = input_pair_scores(model.weights, surrogate);
  auto features =
      aggregate_pair_scores(inputs, model.input_feature, aggregation);
  return rank_pairs(std::move(features), top_k);
}

void write_pair_scores_csv(const std::vector<FeaturePairScore>& scores,
                           const std::filesystem::path& path) {
  std::ostringstream out;
  out << "rank,feature_1,feature_2,score\n";
  for (std::size_t i = 0; i < scores.size(); ++i)
    out << i + 1 << ',' << scores[i].feature_1 << ',' << scores[i].feature_2
        << ',' << format_double(scores[i].score) << '\n';
  write_file(path, out.str());
}

void write_input_scores_csv(const std::vector<InputPairScore>& scores,
                            const std::vector<std::string>& input_label,
                            const std::filesystem::path& path) {
  std::ostringstream out;
  out << "input_1,input_2,score\n";
  for (const auto& entry : scores)
    out << input_label[static_cast<std::size_t>(entry.input_1)] << ','
        << input_label[static_cast<std::size_t>(entry.input_2)] << ','
        << format_double(entry.score) << '\n';
  write_file(path, out.str());
}

}  // namespace nbi
