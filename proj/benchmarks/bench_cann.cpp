#include <benchmark/benchmark.h>

#include "nbi/cann.hpp"
#include "nbi/dataset.hpp"
#include "nbi/encoding.hpp"
#include "nbi/glm.hpp"
#include "nbi/random.hpp"
#include "nbi/synthetic.hpp"

namespace {

struct Setup {
  nbi::SplitDataset data;
  nbi::GlmModel benchmark;
  nbi::NnArchitecture architecture;

  explicit Setup(std::size_t rows) {
    data = nbi::split(nbi::generate_synthetic(rows, 3), {0.8, 0.1, 0.1}, 1);
    const nbi::Dataset fitting =
        nbi::concat_rows(data.train, data.validation);
    std::vector<nbi::TermSpec> terms;
    for (const char* name : {"intercept", "x_1", "x_2^2", "x_9"})
      terms.push_back(nbi::parse_term(name, fitting.schema));
    benchmark =
        nbi::fit_poisson(fitting, terms, nbi::log_exposure_offset(fitting));
    architecture = nbi::default_architecture(data.train.schema);
  }
};

// Forward plus backward pass over one full batch of the default network.
void BM_LossAndGradients(benchmark::State& state) {
  const Setup setup(static_cast<std::size_t>(state.range(0)));
  const nbi::EncodedMatrix encoded =
      nbi::encode_for_nn(setup.data.train, 5, setup.data.train);
  const nbi::InputLayout layout =
      nbi::make_input_layout(encoded, setup.architecture);
  const auto expected =
      nbi::predict(setup.benchmark, setup.data.train,
                   nbi::log_exposure_offset(setup.data.train));
  const nbi::NnBatch batch =
      nbi::make_batch(encoded, layout, setup.architecture, expected,
                      setup.data.train.claims);
  nbi::Rng rng(7);
  const nbi::NnWeights weights =
      nbi::init_weights(setup.architecture, layout.dense_count(), rng);

  nbi::NnGradients gradients;
  for (auto _ : state) {
    const double loss = nbi::cann_loss_gradients(weights, setup.architecture,
                                                 batch, gradients);
    benchmark::DoNotOptimize(loss);
  }
  state.SetItemsProcessed(state.iterations() * batch.rows());
}

// One complete boosted-training epoch budget: a short real training run.
void BM_TrainCannTwoEpochs(benchmark::State& state) {
  const Setup setup(static_cast<std::size_t>(state.range(0)));
  nbi::TrainConfig config;
  config.max_epochs = 2;
  config.seed = 3;

  for (auto _ : state) {
    const nbi::CannModel model =
        nbi::train_cann(setup.data, setup.benchmark, setup.architecture,
                        config);
    benchmark::DoNotOptimize(model.weights.output_weights);
  }
}

}  // namespace

BENCHMARK(BM_LossAndGradients)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainCannTwoEpochs)->Arg(20000)->Unit(benchmark::kMillisecond);
