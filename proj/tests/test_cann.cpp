#include <cmath>
#include <filesystem>
#include <vector>

#include <doctest.h>

#include "nbi/cann.hpp"
#include "nbi/dataset.hpp"
#include "nbi/synthetic.hpp"

using namespace nbi;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  SplitDataset data;
  GlmModel benchmark;

  explicit Fixture(std::size_t n = 3000, std::uint64_t seed = 5) {
    data = split(generate_synthetic(n, seed), {0.8, 0.1, 0.1}, 1);
    const Dataset fitting = concat_rows(data.train, data.validation);
    std::vector<TermSpec> terms{parse_term("intercept", fitting.schema),
                                parse_term("x_1", fitting.schema),
                                parse_term("x_9", fitting.schema)};
    benchmark = fit_poisson(fitting, terms, log_exposure_offset(fitting));
  }
};

TrainConfig quick_config() {
  TrainConfig config;
  config.max_epochs = 6;
  config.batch_size = 256;
  config.dropout_rate = 0.05;
  config.seed = 3;
  return config;
}

}  // namespace

TEST_CASE("freshly initialized CANN reproduces the reference model exactly") {
  const Fixture f;
  TrainConfig config = quick_config();
  config.max_epochs = 0;  // keep the zero-initialized output layer
  const CannModel model =
      train_cann(f.data, f.benchmark, default_architecture(f.data.train.schema),
                 config);

  CHECK(model.log.empty());
  CHECK(model.best_epoch == 0);
  CHECK(model.stopped_epoch == 0);

  for (const Dataset* part :
       {&f.data.train, &f.data.validation, &f.data.test}) {
    const auto boosted = cann_predict(model, *part, f.benchmark);
    const auto reference =
        predict(f.benchmark, *part, log_exposure_offset(*part));
    REQUIRE(boosted.size() == reference.size());
    for (std::size_t i = 0; i < boosted.size(); ++i)
      CHECK(std::abs(boosted[i] - reference[i]) <=
            1e-12 * std::abs(reference[i]));
  }

  // Initial deviance therefore matches the reference model's too.
  const auto boosted = cann_predict(model, f.data.train, f.benchmark);
  const auto reference =
      predict(f.benchmark, f.data.train, log_exposure_offset(f.data.train));
  const double a = mean_poisson_deviance(boosted, f.data.train.claims);
  const double b = mean_poisson_deviance(reference, f.data.train.claims);
  CHECK(std::abs(a - b) <= 1e-12 * std::abs(b));
}

TEST_CASE("backprop gradients agree with central finite differences") {
  // Small everything: 40 rows, two hidden layers, one embedded feature.
  const Dataset data = generate_synthetic(40, 17);
  const SplitDataset parts = split(data, {0.5, 0.25, 0.25}, 2);
  const Dataset fitting = concat_rows(parts.train, parts.validation);
  const GlmModel benchmark =
      fit_poisson(fitting, {parse_term("intercept", fitting.schema)},
                  log_exposure_offset(fitting));

  NnArchitecture architecture = default_architecture(data.schema, 5, 2);
  architecture.hidden_sizes = {4, 3};

  const EncodedMatrix encoded = encode_for_nn(parts.train, 5, parts.train);
  const InputLayout layout = make_input_layout(encoded, architecture);
  const auto expected =
      predict(benchmark, parts.train, log_exposure_offset(parts.train));
  const NnBatch batch = make_batch(encoded, layout, architecture, expected,
                                   parts.train.claims);

  Rng rng(11);
  NnWeights weights = init_weights(architecture, layout.dense_count(), rng);
  // Zero-initialized head would hide output-weight gradient errors; nudge
  // every parameter off zero first.
  for (Eigen::Index j = 0; j < weights.output_weights.size(); ++j)
    weights.output_weights[j] = 0.05 * static_cast<double>(j + 1);
  weights.output_bias = 0.02;

  NnGradients gradients;
  cann_loss_gradients(weights, architecture, batch, gradients);

  const double h = 1e-6;
  NnGradients scratch;
  const auto loss_at = [&](const NnWeights& w) {
    return cann_loss_gradients(w, architecture, batch, scratch);
  };
  const auto check_close = [](double analytic, double numeric) {
    const double scale = std::max({1e-8, std::abs(analytic),
                                   std::abs(numeric)});
    CHECK(std::abs(analytic - numeric) / scale < 1e-4);
  };

  for (std::size_t t = 0; t < weights.embedding_tables.size(); ++t)
    for (Eigen::Index r = 0; r < weights.embedding_tables[t].rows(); ++r)
      for (Eigen::Index c = 0; c < weights.embedding_tables[t].cols(); ++c) {
        NnWeights lo = weights, hi = weights;
        lo.embedding_tables[t](r, c) -= h;
        hi.embedding_tables[t](r, c) += h;
        check_close(gradients.embedding_tables[t](r, c),
                    (loss_at(hi) - loss_at(lo)) / (2 * h));
      }
  for (std::size_t l = 0; l < weights.layer_weights.size(); ++l) {
    for (Eigen::Index r = 0; r < weights.layer_weights[l].rows(); ++r)
      for (Eigen::Index c = 0; c < weights.layer_weights[l].cols(); ++c) {
        NnWeights lo = weights, hi = weights;
        lo.layer_weights[l](r, c) -= h;
        hi.layer_weights[l](r, c) += h;
        check_close(gradients.layer_weights[l](r, c),
                    (loss_at(hi) - loss_at(lo)) / (2 * h));
      }
    for (Eigen::Index r = 0; r < weights.layer_biases[l].size(); ++r) {
      NnWeights lo = weights, hi = weights;
      lo.layer_biases[l][r] -= h;
      hi.layer_biases[l][r] += h;
      check_close(gradients.layer_biases[l][r],
                  (loss_at(hi) - loss_at(lo)) / (2 * h));
    }
  }
  for (Eigen::Index j = 0; j < weights.output_weights.size(); ++j) {
    NnWeights lo = weights, hi = weights;
    lo.output_weights[j] -= h;
    hi.output_weights[j] += h;
    check_close(gradients.output_weights[j],
                (loss_at(hi) - loss_at(lo)) / (2 * h));
  }
  {
    NnWeights lo = weights, hi = weights;
    lo.output_bias -= h;
    hi.output_bias += h;
    check_close(gradients.output_bias, (loss_at(hi) - loss_at(lo)) / (2 * h));
  }
}

TEST_CASE("gradients flow through every activation choice") {
  const Dataset data = generate_synthetic(30, 23);
  const SplitDataset parts = split(data, {0.6, 0.2, 0.2}, 3);
  const Dataset fitting = concat_rows(parts.train, parts.validation);
  const GlmModel benchmark =
      fit_poisson(fitting, {parse_term("intercept", fitting.schema)},
                  log_exposure_offset(fitting));

  for (const Activation activation :
       {Activation::lrelu, Activation::sigmoid, Activation::tanh_act}) {
    NnArchitecture architecture = default_architecture(data.schema, 5, 2);
    architecture.hidden_sizes = {3};
    architecture.activation = activation;

    const EncodedMatrix encoded = encode_for_nn(parts.train, 5, parts.train);
    const InputLayout layout = make_input_layout(encoded, architecture);
    const auto expected =
        predict(benchmark, parts.train, log_exposure_offset(parts.train));
    const NnBatch batch = make_batch(encoded, layout, architecture, expected,
                                     parts.train.claims);

    Rng rng(7);
    NnWeights weights = init_weights(architecture, layout.dense_count(), rng);
    for (Eigen::Index j = 0; j < weights.output_weights.size(); ++j)
      weights.output_weights[j] = 0.1;

    NnGradients gradients, scratch;
    cann_loss_gradients(weights, architecture, batch, gradients);
    const double h = 1e-6;
    NnWeights lo = weights, hi = weights;
    lo.layer_weights[0](0, 0) -= h;
    hi.layer_weights[0](0, 0) += h;
    const double numeric =
        (cann_loss_gradients(hi, architecture, batch, scratch) -
         cann_loss_gradients(lo, architecture, batch, scratch)) /
        (2 * h);
    const double analytic = gradients.layer_weights[0](0, 0);
    const double scale = std::max({1e-8, std::abs(analytic),
                                   std::abs(numeric)});
    CHECK(std::abs(analytic - numeric) / scale < 1e-4);
  }
}

TEST_CASE("training improves and restores the best validation epoch") {
  const Fixture f(6000, 41);
  TrainConfig config = quick_config();
  config.max_epochs = 15;
  const CannModel model = train_cann(
      f.data, f.benchmark, default_architecture(f.data.train.schema), config);

  REQUIRE(!model.log.empty());
  CHECK(model.stopped_epoch == model.log.back().epoch);
  CHECK(model.best_epoch >= 1);
  CHECK(model.best_epoch <= model.stopped_epoch);

  double best_val = model.log.front().val_deviance;
  int best_epoch = 1;
  for (const auto& entry : model.log)
    if (entry.val_deviance < best_val) {
      best_val = entry.val_deviance;
      best_epoch = entry.epoch;
    }
  CHECK(model.best_epoch == best_epoch);

  // The restored weights really are the best epoch's weights.
  const auto val_expected =
      cann_predict(model, f.data.validation, f.benchmark);
  const double val_dev =
      mean_poisson_deviance(val_expected, f.data.validation.claims);
  CHECK(val_dev == doctest::Approx(best_val).epsilon(1e-10));
}

TEST_CASE("early stopping quits after patience epochs without progress") {
  const Fixture f(2000, 43);
  TrainConfig config = quick_config();
  config.max_epochs = 100;
  config.patience = 2;
  // A zero learning rate freezes the network, so epoch 1 is the only
  // improvement and the stall counter runs out right after it.
  config.learning_rate = 0.0;
  const CannModel model = train_cann(
      f.data, f.benchmark, default_architecture(f.data.train.schema), config);
  CHECK(model.best_epoch == 1);
  CHECK(model.stopped_epoch == model.best_epoch + config.patience);
}

TEST_CASE("training is deterministic per seed") {
  const Fixture f(2500, 47);
  const TrainConfig config = quick_config();
  const NnArchitecture architecture =
      default_architecture(f.data.train.schema);
  const CannModel a = train_cann(f.data, f.benchmark, architecture, config);
  const CannModel b = train_cann(f.data, f.benchmark, architecture, config);
  TrainConfig other = config;
  other.seed = config.seed + 1;
  const CannModel c = train_cann(f.data, f.benchmark, architecture, other);

  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t e = 0; e < a.log.size(); ++e) {
    CHECK(a.log[e].train_deviance == b.log[e].train_deviance);
    CHECK(a.log[e].val_deviance == b.log[e].val_deviance);
  }
  const auto pa = cann_predict(a, f.data.test, f.benchmark);
  const auto pb = cann_predict(b, f.data.test, f.benchmark);
  const auto pc = cann_predict(c, f.data.test, f.benchmark);
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i] == pb[i]);
    if (pa[i] != pc[i]) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("runaway learning rates raise a divergence error") {
  const Fixture f(1500, 53);
  TrainConfig config = quick_config();
  config.learning_rate = 1e4;
  config.max_epochs = 50;
  CHECK_THROWS_AS(train_cann(f.data, f.benchmark,
                             default_architecture(f.data.train.schema),
                             config),
                  TrainingDivergence);
}

TEST_CASE("exported weights carry the full architecture plus skip head") {
  const Fixture f(1200, 59);
  TrainConfig config = quick_config();
  config.max_epochs = 1;
  const CannModel model = train_cann(
      f.data, f.benchmark, default_architecture(f.data.train.schema), config);
  const auto named = export_weights(model);

  // x_10 embedding + 3 hidden kernel/bias pairs + output pair + skip scale
  // + head weight/bias = 12 matrices.
  REQUIRE(named.size() == 12);
  CHECK(named[0].name == "embedding:x_10");
  CHECK(named[0].value.rows() == 6);
  CHECK(named[0].value.cols() == 2);
  CHECK(named[1].name == "W1");
  // Kernels are exported inputs-in-rows: 13 inputs (8 numeric + 3 one-hot
  // + 2 embedding dims) into 20 hidden units.
  CHECK(named[1].value.rows() == 13);
  CHECK(named[1].value.cols() == 20);
  CHECK(named.back().name == "head_bias");
  bool saw_skip = false;
  for (const auto& entry : named)
    if (entry.name == "skip_weight") {
      saw_skip = true;
      CHECK(entry.value(0, 0) == 1.0);
    }
  CHECK(saw_skip);
}

TEST_CASE("models survive a save/load round trip") {
  const Fixture f(1500, 61);
  const CannModel model = train_cann(
      f.data, f.benchmark, default_architecture(f.data.train.schema),
      quick_config());
  const fs::path dir = fs::temp_directory_path() / "nbi-cann-tests";
  fs::create_directories(dir);
  save_cann(model, dir / "model.json");
  const CannModel back = load_cann(dir / "model.json");

  CHECK(back.best_epoch == model.best_epoch);
  CHECK(back.stopped_epoch == model.stopped_epoch);
  CHECK(back.log.size() == model.log.size());
  const auto a = cann_predict(model, f.data.test, f.benchmark);
  const auto b = cann_predict(back, f.data.test, f.benchmark);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}
