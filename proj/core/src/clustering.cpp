#include "nbi/clustering.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace nbi {

namespace {

double squared_distance(const Eigen::RowVectorXd& a,
                        const Eigen::RowVectorXd& b) {
  return (a - b).squaredNorm();
}

KMeansResult kmeans_once(const Eigen::MatrixXd& points, int k, Rng& rng,
                         int max_iterations) {
  const auto n = points.rows();
  Eigen::MatrixXd centroids(k, points.cols());

  // k-means++ seeding: first centre uniform, later centres proportional to
  // squared distance from the nearest chosen centre.
  std::vector<double> distance(static_cast<std::size_t>(n),
                               std::numeric_limits<double>::infinity());
  const auto first = static_cast<Eigen::Index>(
      rng.uniform_int(static_cast<std::uint64_t>(n)));
  centroids.row(0) = points.row(first);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = squared_distance(points.row(i), centroids.row(c - 1));
      auto& best = distance[static_cast<std::size_t>(i)];
      best = std::min(best, d);
      total += best;
    }
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= distance[static_cast<std::size_t>(i)];
        if (target <= 0.0) {
          chosen = i;
          break;
        }
        chosen = i;
      }
    } else {
      chosen = static_cast<Eigen::Index>(
          rng.uniform_int(static_cast<std::uint64_t>(n)));
    }
    centroids.row(c) = points.row(chosen);
  }

  std::vector<int> assignment(static_cast<std::size_t>(n), 0);
  for (int iteration = 0; iteration < max_iterations; ++iteration) {
    bool moved = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_distance = squared_distance(points.row(i), centroids.row(0));
      for (int c = 1; c < k; ++c) {
        const double d = squared_distance(points.row(i), centroids.row(c));
        if (d < best_distance) {
          best_distance = d;
          best = c;
        }
      }
      if (assignment[static_cast<std::size_t>(i)] != best) {
        assignment[static_cast<std::size_t>(i)] = best;
        moved = true;
      }
    }
    if (!moved && iteration > 0) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assignment[static_cast<std::size_t>(i)]) += points.row(i);
      counts[static_cast<std::size_t>(
          assignment[static_cast<std::size_t>(i)])] += 1;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centroids.row(c) =
            sums.row(c) /
            static_cast<double>(counts[static_cast<std::size_t>(c)]);
      } else {
        // Empty cluster: restart it at the point farthest from its centre.
        Eigen::Index farthest = 0;
        double worst = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double d = squared_distance(
              points.row(i),
              centroids.row(assignment[static_cast<std::size_t>(i)]));
          if (d > worst) {
            worst = d;
            farthest = i;
          }
        }
        centroids.row(c) = points.row(farthest);
        assignment[static_cast<std::size_t>(farthest)] = c;
      }
    }
  }

  KMeansResult result;
  result.centroids = std::move(centroids);
  result.assignment = std::move(assignment);
  result.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    result.inertia += squared_distance(
        points.row(i),
        result.centroids.row(
            result.assignment[static_cast<std::size_t>(i)]));
  return result;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                    int restarts, int max_iterations) {
  if (k < 1) throw std::invalid_argument("kmeans: k must be positive");
  if (points.rows() < k)
    throw std::invalid_argument("kmeans: fewer points than clusters");
  if (restarts < 1) throw std::invalid_argument("kmeans: need a restart");

  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng rng(Rng::derive_seed(seed, static_cast<std::uint64_t>(r)));
    KMeansResult candidate = kmeans_once(points, k, rng, max_iterations);
    if (candidate.inertia < best.inertia) best = std::move(candidate);
  }
  return best;
}

double calinski_harabasz(const Eigen::MatrixXd& points,
                         const std::vector<int>& assignment, int k) {
  const auto n = points.rows();
  if (k <= 1 || k >= n)
    throw std::invalid_argument("calinski_harabasz: need 1 < k < n");
  if (assignment.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("calinski_harabasz: assignment length");

  const Eigen::RowVectorXd grand = points.colwise().mean();
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = assignment[static_cast<std::size_t>(i)];
    if (c < 0 || c >= k)
      throw std::invalid_argument("calinski_harabasz: cluster id range");
    sums.row(c) += points.row(i);
    counts[static_cast<std::size_t>(c)] += 1;
  }
  double between = 0.0;
  double within = 0.0;
  for (int c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) continue;
    const Eigen::RowVectorXd centre =
        sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
    between += static_cast<double>(counts[static_cast<std::size_t>(c)]) *
               (centre - grand).squaredNorm();
    for (Eigen::Index i = 0; i < n; ++i)
      if (assignment[static_cast<std::size_t>(i)] == c)
        within += (points.row(i) - centre).squaredNorm();
  }
  if (within == 0.0) return std::numeric_limits<double>::infinity();
  return (between / static_cast<double>(k - 1)) /
         (within / static_cast<double>(n - k));
}

ClusterMap cluster_embeddings(const CannModel& model,
                              const std::string& feature, int k_min, int k_max,
                              std::uint64_t seed) {
  int table_index = -1;
  for (std::size_t e = 0; e < model.architecture.embeddings.size(); ++e)
    if (model.architecture.embeddings[e].feature == feature)
      table_index = static_cast<int>(e);
  if (table_index < 0)
    throw std::invalid_argument("feature " + feature +
                                " has no embedding in this model");
  const Eigen::MatrixXd& points =
      model.weights.embedding_tables[static_cast<std::size_t>(table_index)];
  const auto levels = static_cast<int>(points.rows());
  k_max = std::min(k_max, levels - 1);
  if (k_min < 2 || k_min > k_max)
    throw std::invalid_argument("cluster scan range is empty for " + feature);

  ClusterMap map;
  map.feature = feature;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int k = k_min; k <= k_max; ++k) {
    const KMeansResult result = kmeans(points, k, seed);
    const double score = calinski_harabasz(points, result.assignment, k);
    map.ch_scores.emplace_back(k, score);
    if (score > best_score) {
      best_score = score;
      map.k = k;
      map.assignment = result.assignment;
    }
  }
  return map;
}

Dataset with_clustered_feature(const Dataset& data, const ClusterMap& map,
                               const std::string& new_name) {
  const auto& source = data.schema.feature(map.feature);
  if (static_cast<int>(map.assignment.size()) != source.category_count())
    throw std::invalid_argument("cluster map does not cover all levels of " +
                                map.feature);
  Dataset out = data;
  FeatureColumn column;
  column.name = new_name;
  column.kind = FeatureKind::categorical;
  for (int c = 0; c < map.k; ++c)
    column.categories.push_back("c" + std::to_string(c));
  out.schema.features.push_back(column);
  out.schema.validate();

  const auto codes = data.codes(map.feature);
  std::vector<std::int32_t> derived(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i)
    derived[i] = map.assignment[static_cast<std::size_t>(codes[i])];
  out.categorical_pool.push_back(std::move(derived));
  return out;
}

}  // namespace nbi
