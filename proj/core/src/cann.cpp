#include "nbi/cann.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "nbi/dataset.hpp"

namespace nbi {

namespace {

void apply_activation(Eigen::MatrixXd& values, Activation activation,
                      double alpha) {
  switch (activation) {
    case Activation::lrelu:
      values = values.unaryExpr(
          [alpha](double z) { return z > 0.0 ? z : alpha * z; });
      break;
    case Activation::sigmoid:
      values = values.unaryExpr(
          [](double z) { return 1.0 / (1.0 + std::exp(-z)); });
      break;
    case Activation::tanh_act:
      values = values.array().tanh().matrix();
      break;
  }
}

// Derivative expressed through the activation value where possible; leaky
// ReLU needs the pre-activation sign.
Eigen::MatrixXd activation_derivative(const Eigen::MatrixXd& pre,
                                      const Eigen::MatrixXd& post,
                                      Activation activation, double alpha) {
  switch (activation) {
    case Activation::lrelu:
      return pre.unaryExpr(
          [alpha](double z) { return z > 0.0 ? 1.0 : alpha; });
    case Activation::sigmoid:
      return (post.array() * (1.0 - post.array())).matrix();
    case Activation::tanh_act:
      return (1.0 - post.array().square()).matrix();
  }
  return Eigen::MatrixXd();
}

// Builds the B x q0 input block: dense columns then embedding lookups.
Eigen::MatrixXd assemble_inputs(const NnWeights& weights,
                                const NnBatch& batch) {
  Eigen::Index q0 = batch.dense.cols();
  for (const auto& table : weights.embedding_tables) q0 += table.cols();
  Eigen::MatrixXd inputs(batch.rows(), q0);
  inputs.leftCols(batch.dense.cols()) = batch.dense;
  Eigen::Index at = batch.dense.cols();
  for (std::size_t e = 0; e < weights.embedding_tables.size(); ++e) {
    const auto& table = weights.embedding_tables[e];
    const auto& codes = batch.codes[e];
    for (Eigen::Index row = 0; row < batch.rows(); ++row)
      inputs.block(row, at, 1, table.cols()) =
          table.row(codes[static_cast<std::size_t>(row)]);
    at += table.cols();
  }
  return inputs;
}

struct ForwardCache {
  Eigen::MatrixXd inputs;
  std::vector<Eigen::MatrixXd> pre;         // pre-activation per hidden layer
  std::vector<Eigen::MatrixXd> activated;   // activation before dropout
  std::vector<Eigen::MatrixXd> post;        // after dropout; feeds next layer
  Eigen::VectorXd adjustment;
};

ForwardCache forward_pass(const NnWeights& weights,
                          const NnArchitecture& architecture,
                          const NnBatch& batch,
                          const std::vector<Eigen::MatrixXd>* dropout_masks) {
  ForwardCache cache;
  cache.inputs = assemble_inputs(weights, batch);
  const Eigen::MatrixXd* current = &cache.inputs;
  for (std::size_t l = 0; l < weights.layer_weights.size(); ++l) {
    Eigen::MatrixXd pre =
        (*current * weights.layer_weights[l].transpose()).rowwise() +
        weights.layer_biases[l].transpose();
    Eigen::MatrixXd activated = pre;
    apply_activation(activated, architecture.activation,
                     architecture.lrelu_alpha);
    Eigen::MatrixXd post =
        dropout_masks != nullptr
            ? activated.cwiseProduct((*dropout_masks)[l]).eval()
            : activated;
    cache.pre.push_back(std::move(pre));
    cache.activated.push_back(std::move(activated));
    cache.post.push_back(std::move(post));
    current = &cache.post.back();
  }
  cache.adjustment =
      (*current * weights.output_weights).array() + weights.output_bias;
  return cache;
}

void zero_like(const NnWeights& weights, NnGradients& gradients) {
  gradients.embedding_tables.resize(weights.embedding_tables.size());
  for (std::size_t e = 0; e < weights.embedding_tables.size(); ++e)
    gradients.embedding_tables[e] =
        Eigen::MatrixXd::Zero(weights.embedding_tables[e].rows(),
                              weights.embedding_tables[e].cols());
  gradients.layer_weights.resize(weights.layer_weights.size());
  gradients.layer_biases.resize(weights.layer_biases.size());
  for (std::size_t l = 0; l < weights.layer_weights.size(); ++l) {
    gradients.layer_weights[l] = Eigen::MatrixXd::Zero(
        weights.layer_weights[l].rows(), weights.layer_weights[l].cols());
    gradients.layer_biases[l] =
        Eigen::VectorXd::Zero(weights.layer_biases[l].size());
  }
  gradients.output_weights =
      Eigen::VectorXd::Zero(weights.output_weights.size());
  gradients.output_bias = 0.0;
}

}  // namespace

std::string activation_name(Activation activation) {
  switch (activation) {
    case Activation::lrelu: return "lrelu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh_act: return "tanh";
  }
  return "lrelu";
}

Activation activation_from_name(const std::string& name) {
  if (name == "lrelu") return Activation::lrelu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh_act;
  throw std::invalid_argument("unknown activation: " + name);
}

NnArchitecture default_architecture(const FeatureSchema& schema,
                                    int onehot_threshold, int embedding_dim) {
  NnArchitecture architecture;
  for (const auto& column : schema.features)
    if (column.kind == FeatureKind::categorical &&
        column.category_count() > onehot_threshold)
      architecture.embeddings.push_back(
          {column.name, column.category_count(), embedding_dim});
  return architecture;
}

NnWeights init_weights(const NnArchitecture& architecture, int dense_inputs,
                       Rng& rng) {
  NnWeights weights;
  for (const auto& spec : architecture.embeddings) {
    Eigen::MatrixXd table(spec.categories, spec.dimension);
    for (Eigen::Index r = 0; r < table.rows(); ++r)
      for (Eigen::Index c = 0; c < table.cols(); ++c)
        table(r, c) = (rng.uniform() * 2.0 - 1.0) * 0.05;
    weights.embedding_tables.push_back(std::move(table));
  }
  int fan_in = dense_inputs;
  for (const auto& spec : architecture.embeddings) fan_in += spec.dimension;
  for (const int width : architecture.hidden_sizes) {
    const double limit = std::sqrt(6.0 / (fan_in + width));
    Eigen::MatrixXd kernel(width, fan_in);
    for (Eigen::Index r = 0; r < kernel.rows(); ++r)
      for (Eigen::Index c = 0; c < kernel.cols(); ++c)
        kernel(r, c) = (rng.uniform() * 2.0 - 1.0) * limit;
    weights.layer_weights.push_back(std::move(kernel));
    weights.layer_biases.push_back(Eigen::VectorXd::Zero(width));
    fan_in = width;
  }
  weights.output_weights = Eigen::VectorXd::Zero(fan_in);
  weights.output_bias = 0.0;
  return weights;
}

InputLayout make_input_layout(const EncodedMatrix& encoded,
                              const NnArchitecture& architecture) {
  InputLayout layout;
  for (std::size_t c = 0; c < encoded.columns.size(); ++c) {
    const auto& column = encoded.columns[c];
    if (column.encoding != InputEncoding::embedding_index) {
      layout.dense_columns.push_back(static_cast<int>(c));
      layout.input_feature.push_back(column.feature);
      layout.input_label.push_back(column.label);
    }
  }
  for (std::size_t c = 0; c < encoded.columns.size(); ++c) {
    const auto& column = encoded.columns[c];
    if (column.encoding != InputEncoding::embedding_index) continue;
    int embedding = -1;
    for (std::size_t e = 0; e < architecture.embeddings.size(); ++e)
      if (architecture.embeddings[e].feature == column.feature)
        embedding = static_cast<int>(e);
    if (embedding < 0)
      throw std::invalid_argument("no embedding declared for feature " +
                                  column.feature);
    layout.embedding_slots.push_back({static_cast<int>(c), embedding});
    const auto& spec =
        architecture.embeddings[static_cast<std::size_t>(embedding)];
    for (int d = 0; d < spec.dimension; ++d) {
      layout.input_feature.push_back(column.feature);
      layout.input_label.push_back(column.feature + "[" + std::to_string(d) +
                                   "]");
    }
  }
  return layout;
}

NnBatch make_batch(const EncodedMatrix& encoded, const InputLayout& layout,
                   const NnArchitecture& architecture,
                   std::span<const double> benchmark_expected,
                   std::span<const std::int64_t> claims) {
  const auto n = encoded.values.rows();
  if (static_cast<std::size_t>(n) != benchmark_expected.size() ||
      static_cast<std::size_t>(n) != claims.size())
    throw std::invalid_argument("batch input lengths differ");

  NnBatch batch;
  batch.dense.resize(n, layout.dense_count());
  for (int c = 0; c < layout.dense_count(); ++c)
    batch.dense.col(c) =
        encoded.values.col(layout.dense_columns[static_cast<std::size_t>(c)]);
  batch.codes.resize(architecture.embeddings.size());
  for (const auto& slot : layout.embedding_slots) {
    auto& codes = batch.codes[static_cast<std::size_t>(slot.embedding)];
    codes.resize(static_cast<std::size_t>(n));
    const auto& spec =
        architecture.embeddings[static_cast<std::size_t>(slot.embedding)];
    for (Eigen::Index row = 0; row < n; ++row) {
      const auto code =
          static_cast<std::int32_t>(encoded.values(row, slot.encoded_column));
      if (code < 0 || code >= spec.categories)
        throw std::invalid_argument("embedding code out of range for " +
                                    spec.feature);
      codes[static_cast<std::size_t>(row)] = code;
    }
  }
  batch.benchmark_expected.resize(n);
  batch.claims.resize(n);
  for (Eigen::Index row = 0; row < n; ++row) {
    batch.benchmark_expected[row] =
        benchmark_expected[static_cast<std::size_t>(row)];
    batch.claims[row] =
        static_cast<double>(claims[static_cast<std::size_t>(row)]);
  }
  return batch;
}

Eigen::VectorXd nn_forward(const NnWeights& weights,
                           const NnArchitecture& architecture,
                           const NnBatch& batch) {
  return forward_pass(weights, architecture, batch, nullptr).adjustment;
}

Eigen::VectorXd boosted_expected(const NnWeights& weights,
                                 const NnArchitecture& architecture,
                                 const NnBatch& batch) {
  const Eigen::VectorXd adjustment =
      nn_forward(weights, architecture, batch);
  return batch.benchmark_expected.array() * adjustment.array().exp();
}

double cann_loss_gradients(
    const NnWeights& weights, const NnArchitecture& architecture,
    const NnBatch& batch, NnGradients& gradients,
    const std::vector<Eigen::MatrixXd>* dropout_masks) {
  const auto cache = forward_pass(weights, architecture, batch, dropout_masks);
  const auto B = batch.rows();
  const Eigen::ArrayXd mu =
      batch.benchmark_expected.array() * cache.adjustment.array().exp();

  double loss = 0.0;
  for (Eigen::Index i = 0; i < B; ++i) {
    const double y = batch.claims[i];
    double term = mu[i] - y;
    if (y > 0.0) term += y * std::log(y / mu[i]);
    loss += 2.0 * term;
  }
  loss /= static_cast<double>(B);

  zero_like(weights, gradients);

  // d(loss)/d(adjustment_i) = 2 (mu_i - y_i) / B.
  Eigen::VectorXd delta =
      (2.0 / static_cast<double>(B)) * (mu - batch.claims.array()).matrix();

  const Eigen::MatrixXd& last = cache.post.empty() ? cache.inputs
                                                   : cache.post.back();
  gradients.output_weights = last.transpose() * delta;
  gradients.output_bias = delta.sum();

  // Backpropagate through the hidden stack.
  Eigen::MatrixXd upstream = delta * weights.output_weights.transpose();
  for (int l = static_cast<int>(weights.layer_weights.size()) - 1; l >= 0;
       --l) {
    const auto lu = static_cast<std::size_t>(l);
    if (dropout_masks != nullptr)
      upstream = upstream.cwiseProduct((*dropout_masks)[lu]);
    upstream = upstream.cwiseProduct(
        activation_derivative(cache.pre[lu], cache.activated[lu],
                              architecture.activation,
                              architecture.lrelu_alpha));
    const Eigen::MatrixXd& below = l == 0 ? cache.inputs : cache.post[lu - 1];
    gradients.layer_weights[lu] = upstream.transpose() * below;
    gradients.layer_biases[lu] = upstream.colwise().sum().transpose();
    if (l > 0) upstream = upstream * weights.layer_weights[lu];
  }

  if (!weights.layer_weights.empty())
    upstream = upstream * weights.layer_weights[0];
  // `upstream` is now the gradient w.r.t. the assembled input block; scatter
  // the embedding part back onto the tables.
  Eigen::Index at = batch.dense.cols();
  for (std::size_t e = 0; e < weights.embedding_tables.size(); ++e) {
    const auto dims = weights.embedding_tables[e].cols();
    const auto& codes = batch.codes[e];
    for (Eigen::Index row = 0; row < B; ++row)
      gradients.embedding_tables[e].row(codes[static_cast<std::size_t>(row)]) +=
          upstream.block(row, at, 1, dims);
    at += dims;
  }
  return loss;
}

namespace {

// Dropout derivative ordering note: masks scale activations after the
// nonlinearity, so the backward pass multiplies by the mask before the
// activation derivative.  Handled in cann_loss_gradients above.

struct RmsPropState {
  NnGradients cache;  // running mean of squared gradients, same shapes
};

void rmsprop_update(NnWeights& weights, const NnGradients& gradients,
                    RmsPropState& state, const TrainConfig& config) {
  const double rho = config.rmsprop_decay;
  const double lr = config.learning_rate;
  const double eps = config.rmsprop_epsilon;
  auto update_matrix = [&](Eigen::MatrixXd& value, const Eigen::MatrixXd& grad,
                           Eigen::MatrixXd& cache) {
    cache = rho * cache + (1.0 - rho) * grad.cwiseProduct(grad);
    value -= lr * grad.cwiseQuotient(
                      (cache.array().sqrt() + eps).matrix());
  };
  auto update_vector = [&](Eigen::VectorXd& value, const Eigen::VectorXd& grad,
                           Eigen::VectorXd& cache) {
    cache = rho * cache + (1.0 - rho) * grad.cwiseProduct(grad);
    value -= lr * grad.cwiseQuotient(
                      (cache.array().sqrt() + eps).matrix());
  };
  for (std::size_t e = 0; e < weights.embedding_tables.size(); ++e)
    update_matrix(weights.embedding_tables[e], gradients.embedding_tables[e],
                  state.cache.embedding_tables[e]);
  for (std::size_t l = 0; l < weights.layer_weights.size(); ++l) {
    update_matrix(weights.layer_weights[l], gradients.layer_weights[l],
                  state.cache.layer_weights[l]);
    update_vector(weights.layer_biases[l], gradients.layer_biases[l],
                  state.cache.layer_biases[l]);
  }
  update_vector(weights.output_weights, gradients.output_weights,
                state.cache.output_weights);
  state.cache.output_bias = rho * state.cache.output_bias +
                            (1.0 - rho) * gradients.output_bias *
                                gradients.output_bias;
  weights.output_bias -= lr * gradients.output_bias /
                         (std::sqrt(state.cache.output_bias) + eps);
}

NnBatch gather_rows(const NnBatch& full, std::span<const std::size_t> rows) {
  NnBatch batch;
  const auto B = static_cast<Eigen::Index>(rows.size());
  batch.dense.resize(B, full.dense.cols());
  batch.benchmark_expected.resize(B);
  batch.claims.resize(B);
  for (Eigen::Index i = 0; i < B; ++i) {
    const auto row = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(
        i)]);
    batch.dense.row(i) = full.dense.row(row);
    batch.benchmark_expected[i] = full.benchmark_expected[row];
    batch.claims[i] = full.claims[row];
  }
  batch.codes.resize(full.codes.size());
  for (std::size_t e = 0; e < full.codes.size(); ++e) {
    batch.codes[e].resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      batch.codes[e][i] = full.codes[e][rows[i]];
  }
  return batch;
}

double batch_mean_deviance(const NnWeights& weights,
                           const NnArchitecture& architecture,
                           const NnBatch& batch) {
  const Eigen::VectorXd expected =
      boosted_expected(weights, architecture, batch);
  double total = 0.0;
  for (Eigen::Index i = 0; i < batch.rows(); ++i) {
    const double y = batch.claims[i];
    double term = expected[i] - y;
    if (y > 0.0) term += y * std::log(y / expected[i]);
    total += 2.0 * term;
  }
  return total / static_cast<double>(batch.rows());
}

std::string log_tail(const std::vector<EpochLog>& log) {
  std::ostringstream out;
  const std::size_t from = log.size() > 3 ? log.size() - 3 : 0;
  for (std::size_t i = from; i < log.size(); ++i)
    out << " epoch " << log[i].epoch << ": train "
        << log[i].train_deviance << ", val " << log[i].val_deviance << ";";
  return out.str();
}

}  // namespace

CannModel train_cann(const SplitDataset& data, const GlmModel& benchmark,
                     const NnArchitecture& architecture,
                     const TrainConfig& config) {
  if (config.batch_size < 1 || config.max_epochs < 0 || config.patience < 1)
    throw std::invalid_argument("bad training configuration");
  if (!(config.dropout_rate >= 0.0 && config.dropout_rate < 1.0))
    throw std::invalid_argument("dropout rate must be in [0, 1)");

  const EncodedMatrix train_encoded =
      encode_for_nn(data.train, config.onehot_threshold, data.train);
  const EncodedMatrix val_encoded = encode_with_ranges(
      data.validation, config.onehot_threshold, train_encoded.scaling);
  const InputLayout layout = make_input_layout(train_encoded, architecture);

  const auto train_expected =
      predict(benchmark, data.train, log_exposure_offset(data.train));
  const auto val_expected = predict(benchmark, data.validation,
                                    log_exposure_offset(data.validation));

  const NnBatch train_batch = make_batch(train_encoded, layout, architecture,
                                         train_expected, data.train.claims);
  const NnBatch val_batch = make_batch(val_encoded, layout, architecture,
                                       val_expected, data.validation.claims);

  Rng rng(config.seed);
  CannModel model;
  model.architecture = architecture;
  model.config = config;
  model.weights = init_weights(architecture, layout.dense_count(), rng);
  model.scaling = train_encoded.scaling;
  model.input_feature = layout.input_feature;
  model.input_label = layout.input_label;

  // Only completed epochs compete for the restored weights; the untrained
  // network is returned only when max_epochs is zero.
  NnWeights best = model.weights;
  double best_val = std::numeric_limits<double>::infinity();
  model.best_epoch = 0;
  int wait = 0;

  RmsPropState state;
  zero_like(model.weights, state.cache);
  NnGradients gradients;

  const std::size_t n = static_cast<std::size_t>(train_batch.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const double keep = 1.0 - config.dropout_rate;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n;
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop =
          std::min(n, start + static_cast<std::size_t>(config.batch_size));
      const NnBatch batch = gather_rows(
          train_batch, std::span<const std::size_t>(order)
                           .subspan(start, stop - start));

      std::vector<Eigen::MatrixXd> masks;
      const std::vector<Eigen::MatrixXd>* masks_ptr = nullptr;
      if (config.dropout_rate > 0.0) {
        masks.reserve(architecture.hidden_sizes.size());
        for (const int width : architecture.hidden_sizes) {
          Eigen::MatrixXd mask(batch.rows(), width);
          for (Eigen::Index r = 0; r < mask.rows(); ++r)
            for (Eigen::Index c = 0; c < mask.cols(); ++c)
              mask(r, c) = rng.uniform() < keep ? 1.0 / keep : 0.0;
          masks.push_back(std::move(mask));
        }
        masks_ptr = &masks;
      }

      cann_loss_gradients(model.weights, architecture, batch, gradients,
                          masks_ptr);
      rmsprop_update(model.weights, gradients, state, config);
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_deviance =
        batch_mean_deviance(model.weights, architecture, train_batch);
    entry.val_deviance =
        batch_mean_deviance(model.weights, architecture, val_batch);
    model.log.push_back(entry);
    model.stopped_epoch = epoch;

    if (!std::isfinite(entry.train_deviance) ||
        !std::isfinite(entry.val_deviance))
      throw TrainingDivergence(
          "training diverged (non-finite deviance);" + log_tail(model.log));

    if (entry.val_deviance < best_val) {
      best_val = entry.val_deviance;
      best = model.weights;
      model.best_epoch = epoch;
      wait = 0;
    } else if (++wait >= config.patience) {
      break;
    }
  }

  model.weights = std::move(best);
  return model;
}

NnBatch model_batch(const CannModel& model, const Dataset& data,
                    const GlmModel& benchmark) {
  const EncodedMatrix encoded = encode_with_ranges(
      data, model.config.onehot_threshold, model.scaling);
  const InputLayout layout = make_input_layout(encoded, model.architecture);
  const auto expected = predict(benchmark, data, log_exposure_offset(data));
  return make_batch(encoded, layout, model.architecture, expected,
                    data.claims);
}

std::vector<double> cann_predict(const CannModel& model, const Dataset& data,
                                 const GlmModel& benchmark) {
  const NnBatch batch = model_batch(model, data, benchmark);
  const Eigen::VectorXd expected =
      boosted_expected(model.weights, model.architecture, batch);
  return std::vector<double>(expected.data(), expected.data() + expected.size());
}

std::vector<NamedMatrix> export_weights(const CannModel& model) {
  std::vector<NamedMatrix> out;
  for (std::size_t e = 0; e < model.weights.embedding_tables.size(); ++e)
    out.push_back({"embedding:" + model.architecture.embeddings[e].feature,
                   model.weights.embedding_tables[e]});
  for (std::size_t l = 0; l < model.weights.layer_weights.size(); ++l) {
    // Kernels exported rows-are-inputs, matching the forward map Z * K + b.
    out.push_back({"W" + std::to_string(l + 1),
                   model.weights.layer_weights[l].transpose()});
    out.push_back({"b" + std::to_string(l + 1),
                   model.weights.layer_biases[l]});
  }
  out.push_back({"w_y", model.weights.output_weights});
  out.push_back({"b_y", Eigen::MatrixXd::Constant(
                            1, 1, model.weights.output_bias)});
  // The boosted prediction is exp(skip * log-benchmark + head * adjustment
  // + head_bias); these are fixed by construction, exported for audit.
  out.push_back({"skip_weight", Eigen::MatrixXd::Constant(1, 1, 1.0)});
  out.push_back({"head_weight", Eigen::MatrixXd::Constant(1, 1, 1.0)});
  out.push_back({"head_bias", Eigen::MatrixXd::Constant(1, 1, 0.0)});
  return out;
}

}  // namespace nbi
