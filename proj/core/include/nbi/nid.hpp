#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nbi/cann.hpp"

namespace nbi {

// How the two first-layer weights of a candidate pair are combined.
enum class PairSurrogate { minimum, harmonic_mean };
// How neuron-level pair scores roll up to feature level when a feature spans
// several network inputs (one-hot levels, embedding dimensions).
enum class GroupAggregation { minimum, mean, maximum };

PairSurrogate surrogate_from_name(const std::string& name);
GroupAggregation aggregation_from_name(const std::string& name);
std::string surrogate_name(PairSurrogate surrogate);
std::string aggregation_name(GroupAggregation aggregation);

// Downstream influence of each first-hidden-layer neuron: the absolute
// output weights pushed back through the absolute hidden weights,
// zeta^T = |w_y|^T |W_d| ... |W_2|.
Eigen::VectorXd influence_vector(const NnWeights& weights);

// Interaction strength for every unordered pair of network inputs:
// s(i, j) = sum_r zeta_r * surrogate(|W_1[r, i]|, |W_1[r, j]|).
struct InputPairScore {
  int input_1 = 0;
  int input_2 = 0;
  double score = 0.0;
};
std::vector<InputPairScore> input_pair_scores(const NnWeights& weights,
                                              PairSurrogate surrogate);

// Feature-level scores: pairs of inputs belonging to the same feature are
// dropped, the rest aggregate over all cross-group input pairs.
// `input_feature` names the source feature of each network input.
struct FeaturePairScore {
  std::string feature_1;
  std::string feature_2;
  double score = 0.0;
};
std::vector<FeaturePairScore> aggregate_pair_scores(
    const std::vector<InputPairScore>& scores,
    const std::vector<std::string>& input_feature,
    GroupAggregation aggregation);

// Sorts by score descending; equal scores order by feature-name pair.  Keeps
// all entries when top_k is zero or exceeds the list.
std::vector<FeaturePairScore> rank_pairs(std::vector<FeaturePairScore> scores,
                                         std::size_t top_k = 0);

// Convenience wrapper over a trained boosted model.
std::vector<FeaturePairScore> detect_interactions(const CannModel& model,
                                                  PairSurrogate surrogate,
                                                  GroupAggregation aggregation,
                                                  std::size_t top_k = 0);

void write_pair_scores_csv(const std::vector<FeaturePairScore>& scores,
                           const std::filesystem::path& path);
void write_input_scores_csv(const std::vector<InputPairScore>& scores,
                            const std::vector<std::string>& input_label,
                            const std::filesystem::path& path);

}  // namespace nbi
