#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nbi/cann.hpp"

namespace nbi {

struct KMeansResult {
  Eigen::MatrixXd centroids;    // k x dim
  std::vector<int> assignment;  // point -> cluster
  double inertia = 0.0;         // total within-cluster squared distance
};

// Lloyd's algorithm with k-means++ seeding, run `restarts` times with
// derived seeds; the lowest-inertia run wins.  Deterministic for a fixed
// seed.  Points are rows.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                    int restarts = 8, int max_iterations = 100);

// Between-cluster over within-cluster variance ratio, scaled by degrees of
// freedom: (B/(k-1)) / (W/(n-k)).  Larger is better separated.  Requires
// 1 < k < n; returns +inf when W is exactly zero.
double calinski_harabasz(const Eigen::MatrixXd& points,
                         const std::vector<int>& assignment, int k);

// Grouping of one embedded categorical feature's levels into k clusters,
// chosen by the best Calinski-Harabasz score over a scanned k range.
struct ClusterMap {
  std::string feature;
  int k = 0;
  std::vector<int> assignment;  // category level -> cluster id
  std::vector<std::pair<int, double>> ch_scores;  // (k, score) per scanned k
};

// Clusters the rows of the trained embedding table for `feature`.  Scans
// k = k_min..k_max (clamped to the number of levels minus one) and keeps the
// k with the highest score, preferring smaller k on ties.
ClusterMap cluster_embeddings(const CannModel& model,
                              const std::string& feature, int k_min, int k_max,
                              std::uint64_t seed);

// Appends a derived categorical feature whose level for each row is
// cluster(assignment) of the source feature's level.  Levels are named
// "c0".."c{k-1}"; the reference is the last cluster.
Dataset with_clustered_feature(const Dataset& data, const ClusterMap& map,
                               const std::string& new_name);

}  // namespace nbi
