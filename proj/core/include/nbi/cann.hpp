#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nbi/encoding.hpp"
#include "nbi/glm.hpp"
#include "nbi/random.hpp"

namespace nbi {

enum class Activation { lrelu, sigmoid, tanh_act };

std::string activation_name(Activation activation);
Activation activation_from_name(const std::string& name);

// Dense embedding table for one high-cardinality categorical feature.
struct EmbeddingSpec {
  std::string feature;
  int categories = 0;
  int dimension = 2;
  bool operator==(const EmbeddingSpec&) const = default;
};

struct NnArchitecture {
  std::vector<int> hidden_sizes{20, 15, 10};
  Activation activation = Activation::lrelu;
  double lrelu_alpha = 0.3;
  std::vector<EmbeddingSpec> embeddings;
};

// Standard architecture for a schema: three leaky-ReLU hidden layers and one
// embedding per categorical feature with more than `onehot_threshold` levels.
NnArchitecture default_architecture(const FeatureSchema& schema,
                                    int onehot_threshold = 5,
                                    int embedding_dim = 2);

// All trainable parameters.  layer_weights[l] has shape (width of layer l+1)
// x (width of layer l), so a row-major batch Z maps forward as Z * W^T + b.
struct NnWeights {
  std::vector<Eigen::MatrixXd> embedding_tables;
  std::vector<Eigen::MatrixXd> layer_weights;
  std::vector<Eigen::VectorXd> layer_biases;
  Eigen::VectorXd output_weights;
  double output_bias = 0.0;
};

// Glorot-uniform hidden weights, zero biases, U(-0.05, 0.05) embeddings and,
// deliberately, a zero output layer: before any training the network adds
// nothing on the log scale, so the boosted model reproduces its reference
// GLM exactly.  Draw order: embedding tables row by row, then each hidden
// layer's weight matrix row by row.
NnWeights init_weights(const NnArchitecture& architecture, int dense_inputs,
                       Rng& rng);

// Maps an encoded feature block onto network inputs: dense columns first
// (scaled numerics and one-hot levels, in encoded order), then the embedding
// dimensions of each embedding-index column.  input_feature names the source
// feature of every network input, which is what interaction detection
// aggregates over.
struct InputLayout {
  std::vector<int> dense_columns;
  struct EmbeddingSlot {
    int encoded_column = 0;
    int embedding = 0;  // index into NnArchitecture::embeddings
  };
  std::vector<EmbeddingSlot> embedding_slots;
  std::vector<std::string> input_feature;
  std::vector<std::string> input_label;

  int count() const { return static_cast<int>(input_feature.size()); }
  int dense_count() const { return static_cast<int>(dense_columns.size()); }
};
InputLayout make_input_layout(const EncodedMatrix& encoded,
                              const NnArchitecture& architecture);

// One forward/backward work unit: raw dense inputs, embedding codes, the
// benchmark expectation per row (the modified exposure) and observed claims.
struct NnBatch {
  Eigen::MatrixXd dense;
  std::vector<std::vector<std::int32_t>> codes;
  Eigen::VectorXd benchmark_expected;
  Eigen::VectorXd claims;

  Eigen::Index rows() const { return dense.rows(); }
};
NnBatch make_batch(const EncodedMatrix& encoded, const InputLayout& layout,
                   const NnArchitecture& architecture,
                   std::span<const double> benchmark_expected,
                   std::span<const std::int64_t> claims);

// Per-row additive adjustment on the log scale (the network output).
Eigen::VectorXd nn_forward(const NnWeights& weights,
                           const NnArchitecture& architecture,
                           const NnBatch& batch);

// Expected counts of the boosted model: benchmark_expected * exp(adjustment).
Eigen::VectorXd boosted_expected(const NnWeights& weights,
                                 const NnArchitecture& architecture,
                                 const NnBatch& batch);

struct NnGradients {
  std::vector<Eigen::MatrixXd> embedding_tables;
  std::vector<Eigen::MatrixXd> layer_weights;
  std::vector<Eigen::VectorXd> layer_biases;
  Eigen::VectorXd output_weights;
  double output_bias = 0.0;
};

// Mean Poisson deviance of the boosted model over the batch, plus gradients
// for every trainable parameter.  `dropout_masks`, when given, holds one
// pre-scaled inverted-dropout mask per hidden layer (entries 0 or
// 1/keep_rate) that multiplies that layer's activations.
double cann_loss_gradients(
    const NnWeights& weights, const NnArchitecture& architecture,
    const NnBatch& batch, NnGradients& gradients,
    const std::vector<Eigen::MatrixXd>* dropout_masks = nullptr);

struct TrainConfig {
  int batch_size = 1000;
  int max_epochs = 100;
  int patience = 5;          // epochs without a new validation best
  double dropout_rate = 0.05;
  double learning_rate = 4e-3;
  double rmsprop_decay = 0.9;
  double rmsprop_epsilon = 1e-7;
  int onehot_threshold = 5;
  std::uint64_t seed = 0;
};

struct EpochLog {
  int epoch = 0;
  double train_deviance = 0.0;
  double val_deviance = 0.0;
};

// Training produced a non-finite loss; the message carries the tail of the
// epoch log.
struct TrainingDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Boosted model: the reference GLM stays frozen outside this struct; the
// network only learns a multiplicative correction on top of it.
struct CannModel {
  NnArchitecture architecture;
  TrainConfig config;
  NnWeights weights;
  std::vector<ScalingRange> scaling;       // from the training split
  std::vector<std::string> input_feature;  // per network input
  std::vector<std::string> input_label;
  std::vector<EpochLog> log;
  int best_epoch = 0;     // epoch whose weights were kept
  int stopped_epoch = 0;  // last epoch run
};

// Boosts `benchmark` on the training split with RMSProp minibatches and
// early stopping on the validation split (best weights restored).
CannModel train_cann(const SplitDataset& data, const GlmModel& benchmark,
                     const NnArchitecture& architecture,
                     const TrainConfig& config);

// Expected counts for arbitrary rows under the trained boosted model.
std::vector<double> cann_predict(const CannModel& model, const Dataset& data,
                                 const GlmModel& benchmark);

// Encodes a dataset the way the model was trained (same scaling ranges and
// one-hot threshold) and bundles it into a batch.
NnBatch model_batch(const CannModel& model, const Dataset& data,
                    const GlmModel& benchmark);

// All weight matrices with stable names, in network order: embedding tables,
// hidden layers (kernel then bias, kernels in rows-are-inputs orientation),
// the output layer, then the constant skip and head weights that tie the
// network adjustment to the reference model.
struct NamedMatrix {
  std::string name;
  Eigen::MatrixXd value;
};
std::vector<NamedMatrix> export_weights(const CannModel& model);

void save_cann(const CannModel& model, const std::filesystem::path& path);
CannModel load_cann(const std::filesystem::path& path);

}  // namespace nbi
