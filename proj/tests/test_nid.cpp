#include <cmath>
#include <filesystem>
#include <vector>

#include <doctest.h>

#include "nbi/nid.hpp"
#include "nbi/random.hpp"
#include "nbi/text.hpp"

using namespace nbi;

namespace {

NnWeights net(std::vector<Eigen::MatrixXd> layers, Eigen::VectorXd output) {
  NnWeights weights;
  weights.layer_weights = std::move(layers);
  for (const auto& w : weights.layer_weights)
    weights.layer_biases.emplace_back(Eigen::VectorXd::Zero(w.rows()));
  weights.output_weights = std::move(output);
  return weights;
}

// Brute-force oracle: sum absolute weight products over every path from a
// first-layer neuron to the output.
double path_influence(const NnWeights& weights, Eigen::Index neuron) {
  std::vector<double> mass(
      static_cast<std::size_t>(weights.layer_weights[0].rows()), 0.0);
  mass[static_cast<std::size_t>(neuron)] = 1.0;
  for (std::size_t l = 1; l < weights.layer_weights.size(); ++l) {
    const auto& w = weights.layer_weights[l];
    std::vector<double> next(static_cast<std::size_t>(w.rows()), 0.0);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        next[static_cast<std::size_t>(r)] +=
            std::abs(w(r, c)) * mass[static_cast<std::size_t>(c)];
    mass = std::move(next);
  }
  double total = 0.0;
  for (std::size_t r = 0; r < mass.size(); ++r)
    total += std::abs(weights.output_weights[static_cast<Eigen::Index>(r)]) *
             mass[r];
  return total;
}

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows,
                              Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("single hidden layer influence is the absolute output weight") {
  Rng rng(1);
  Eigen::VectorXd w_y(3);
  w_y << 2.0, -1.5, 0.0;
  const NnWeights weights = net({random_matrix(rng, 3, 4)}, w_y);
  const Eigen::VectorXd zeta = influence_vector(weights);
  REQUIRE(zeta.size() == 3);
  CHECK(zeta[0] == 2.0);
  CHECK(zeta[1] == 1.5);
  CHECK(zeta[2] == 0.0);
}

TEST_CASE("hand example: weights (2,3) with influence 5 score 10") {
  Eigen::MatrixXd w1(1, 2);
  w1 << 2.0, 3.0;
  Eigen::VectorXd w_y(1);
  w_y << 5.0;
  const NnWeights weights = net({w1}, w_y);

  CHECK(influence_vector(weights)[0] == 5.0);
  const auto scores = input_pair_scores(weights, PairSurrogate::minimum);
  REQUIRE(scores.size() == 1);
  CHECK(scores[0].input_1 == 0);
  CHECK(scores[0].input_2 == 1);
  CHECK(scores[0].score == 10.0);
}

TEST_CASE("influence matches path enumeration on random deep nets") {
  Rng rng(99);
  for (int trial = 0; trial < 25; ++trial) {
    const Eigen::Index inputs = 2 + rng.uniform_int(5);
    std::vector<Eigen::Index> widths;
    const int depth = 1 + static_cast<int>(rng.uniform_int(3));
    for (int l = 0; l < depth; ++l)
      widths.push_back(1 + static_cast<Eigen::Index>(rng.uniform_int(5)));

    std::vector<Eigen::MatrixXd> layers;
    Eigen::Index previous = inputs;
    for (const auto width : widths) {
      layers.push_back(random_matrix(rng, width, previous));
      previous = width;
    }
    const NnWeights weights =
        net(std::move(layers), random_matrix(rng, previous, 1).col(0));

    const Eigen::VectorXd zeta = influence_vector(weights);
    for (Eigen::Index r = 0; r < zeta.size(); ++r)
      CHECK(std::abs(zeta[r] - path_influence(weights, r)) < 1e-10);

    // Pair scores follow directly from zeta and the first layer.
    const auto pairs = input_pair_scores(weights, PairSurrogate::minimum);
    const auto& w1 = weights.layer_weights[0];
    std::size_t index = 0;
    for (Eigen::Index i = 0; i < inputs; ++i)
      for (Eigen::Index j = i + 1; j < inputs; ++j, ++index) {
        double expected = 0.0;
        for (Eigen::Index r = 0; r < w1.rows(); ++r)
          expected += zeta[r] * std::min(std::abs(w1(r, i)),
                                         std::abs(w1(r, j)));
        REQUIRE(index < pairs.size());
        CHECK(pairs[index].input_1 == i);
        CHECK(pairs[index].input_2 == j);
        CHECK(std::abs(pairs[index].score - expected) < 1e-10);
      }
  }
}

TEST_CASE("absent connections yield exactly zero interaction") {
  Eigen::MatrixXd w1(2, 3);
  w1 << 1.0, 0.0, 2.0,  // neuron 0 ignores input 1
      0.0, 3.0, 0.0;    // neuron 1 only sees input 1
  Eigen::VectorXd w_y(2);
  w_y << 1.0, 1.0;
  const NnWeights weights = net({w1}, w_y);

  for (const auto surrogate :
       {PairSurrogate::minimum, PairSurrogate::harmonic_mean}) {
    const auto scores = input_pair_scores(weights, surrogate);
    // Pairs (0,1) and (1,2) never share a neuron; (0,2) does.
    CHECK(scores[0].score == 0.0);
    CHECK(scores[2].score == 0.0);
    CHECK(scores[1].score > 0.0);
  }
}

TEST_CASE("harmonic mean surrogate softens large weight gaps") {
  Eigen::MatrixXd w1(1, 2);
  w1 << 1.0, 9.0;
  Eigen::VectorXd w_y(1);
  w_y << 1.0;
  const NnWeights weights = net({w1}, w_y);
  const auto harmonic =
      input_pair_scores(weights, PairSurrogate::harmonic_mean);
  CHECK(harmonic[0].score == doctest::Approx(2.0 * 9.0 / 10.0));
  const auto minimum = input_pair_scores(weights, PairSurrogate::minimum);
  CHECK(minimum[0].score == 1.0);
}

TEST_CASE("growing the smaller weight raises the pair score") {
  Eigen::VectorXd w_y(1);
  w_y << 1.0;
  double previous = -1.0;
  for (const double small : {0.5, 1.0, 1.5, 2.0}) {
    Eigen::MatrixXd w1(1, 2);
    w1 << small, 2.5;
    const auto scores =
        input_pair_scores(net({w1}, w_y), PairSurrogate::minimum);
    CHECK(scores[0].score > previous);
    previous = scores[0].score;
  }
}

TEST_CASE("rescaling a downstream layer rescales all scores") {
  Rng rng(7);
  std::vector<Eigen::MatrixXd> layers{random_matrix(rng, 4, 5),
                                      random_matrix(rng, 3, 4)};
  Eigen::VectorXd w_y = random_matrix(rng, 3, 1).col(0);
  const NnWeights base = net({layers[0], layers[1]}, w_y);
  const NnWeights scaled = net({layers[0], 2.5 * layers[1]}, w_y);

  const auto a = input_pair_scores(base, PairSurrogate::minimum);
  const auto b = input_pair_scores(scaled, PairSurrogate::minimum);
  for (std::size_t k = 0; k < a.size(); ++k)
    CHECK(b[k].score == doctest::Approx(2.5 * a[k].score).epsilon(1e-12));
}

TEST_CASE("feature aggregation reduces input pairs per group") {
  // Inputs: a0 a1 a2 (feature a, e.g. one-hot levels), b0 (feature b).
  const std::vector<std::string> input_feature{"a", "a", "a", "b"};
  std::vector<InputPairScore> scores;
  // Only cross pairs contribute; give (a_i, b) scores 3, 9, 6.
  scores.push_back({0, 1, 100.0});  // within a, must be ignored
  scores.push_back({0, 3, 3.0});
  scores.push_back({1, 3, 9.0});
  scores.push_back({2, 3, 6.0});

  const auto min_agg = aggregate_pair_scores(scores, input_feature,
                                             GroupAggregation::minimum);
  REQUIRE(min_agg.size() == 1);
  CHECK(min_agg[0].feature_1 == "a");
  CHECK(min_agg[0].feature_2 == "b");
  CHECK(min_agg[0].score == 3.0);
  CHECK(aggregate_pair_scores(scores, input_feature,
                              GroupAggregation::mean)[0]
            .score == doctest::Approx(6.0));
  CHECK(aggregate_pair_scores(scores, input_feature,
                              GroupAggregation::maximum)[0]
            .score == 9.0);
}

TEST_CASE("ranking is descending with lexicographic ties and top-k cut") {
  std::vector<FeaturePairScore> scores{{"x_3", "x_4", 1.0},
                                       {"x_1", "x_9", 2.0},
                                       {"x_1", "x_2", 2.0},
                                       {"x_5", "x_6", 7.0}};
  const auto ranked = rank_pairs(scores);
  REQUIRE(ranked.size() == 4);
  CHECK(ranked[0].feature_1 == "x_5");
  CHECK(ranked[1].feature_1 == "x_1");
  CHECK(ranked[1].feature_2 == "x_2");  // tie broken by name
  CHECK(ranked[2].feature_2 == "x_9");
  CHECK(ranked[3].feature_1 == "x_3");

  const auto top2 = rank_pairs(scores, 2);
  REQUIRE(top2.size() == 2);
  CHECK(top2[1].feature_2 == "x_2");
  CHECK(rank_pairs(scores, 99).size() == 4);
}

TEST_CASE("score tables serialize with a rank column") {
  const std::vector<FeaturePairScore> scores{{"x_4", "x_5", 3.5},
                                             {"x_5", "x_6", 1.25}};
  const auto dir = std::filesystem::temp_directory_path() / "nbi-nid-tests";
  std::filesystem::create_directories(dir);
  write_pair_scores_csv(scores, dir / "pairs.csv");
  const std::string text = read_file(dir / "pairs.csv");
  CHECK(text ==
        "rank,feature_1,feature_2,score\n"
        "1,x_4,x_5,3.5\n"
        "2,x_5,x_6,1.25\n");
}
