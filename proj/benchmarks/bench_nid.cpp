#include <benchmark/benchmark.h>

#include "nbi/nid.hpp"
#include "nbi/random.hpp"

namespace {

// The default network shape: 13 inputs into hidden layers 20, 15, 10.
nbi::NnWeights default_shape_weights() {
  nbi::Rng rng(11);
  nbi::NnWeights weights;
  int previous = 13;
  for (const int width : {20, 15, 10}) {
    Eigen::MatrixXd w(width, previous);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        w(r, c) = -1.0 + 2.0 * rng.uniform();
    weights.layer_weights.push_back(w);
    weights.layer_biases.push_back(Eigen::VectorXd::Zero(width));
    previous = width;
  }
  weights.output_weights = Eigen::VectorXd(previous);
  for (Eigen::Index r = 0; r < previous; ++r)
    weights.output_weights[r] = -1.0 + 2.0 * rng.uniform();
  return weights;
}

void BM_InfluenceVector(benchmark::State& state) {
  const nbi::NnWeights weights = default_shape_weights();
  for (auto _ : state) {
    const Eigen::VectorXd zeta = nbi::influence_vector(weights);
    benchmark::DoNotOptimize(zeta.data());
  }
}

// All 78 input pairs of the default 13-input network, scored and ranked.
void BM_AllPairScores(benchmark::State& state) {
  const nbi::NnWeights weights = default_shape_weights();
  for (auto _ : state) {
    const auto scores =
        nbi::input_pair_scores(weights, nbi::PairSurrogate::minimum);
    benchmark::DoNotOptimize(scores.data());
  }
}

}  // namespace

BENCHMARK(BM_InfluenceVector)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_AllPairScores)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
