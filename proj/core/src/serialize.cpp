// Save/load for fitted models and schemas.

#include "json_util.hpp"
#include "nbi/cann.hpp"
#include "nbi/glm.hpp"
#include "nbi/pipeline.hpp"

namespace nbi {

namespace {

Json schema_to_json(const FeatureSchema& schema) {
  Json features = Json::array();
  for (const auto& column : schema.features) {
    Json entry;
    entry["name"] = column.name;
    entry["kind"] =
        column.kind == FeatureKind::numeric ? "numeric" : "categorical";
    if (column.kind == FeatureKind::categorical) {
      entry["categories"] = column.categories;
      entry["reference"] = column.reference_index();
    }
    features.push_back(std::move(entry));
  }
  Json json;
  json["response"] = schema.response_column;
  json["exposure"] = schema.exposure_column;
  json["features"] = std::move(features);
  return json;
}

FeatureSchema schema_from_json(const Json& json) {
  FeatureSchema schema;
  schema.response_column = json.at("response").get<std::string>();
  schema.exposure_column = json.at("exposure").get<std::string>();
  for (const auto& entry : json.at("features")) {
    FeatureColumn column;
    column.name = entry.at("name").get<std::string>();
    const auto kind = entry.at("kind").get<std::string>();
    if (kind == "numeric") {
      column.kind = FeatureKind::numeric;
    } else if (kind == "categorical") {
      column.kind = FeatureKind::categorical;
      column.categories =
          entry.at("categories").get<std::vector<std::string>>();
      if (entry.contains("reference"))
        column.reference = entry.at("reference").get<int>();
    } else {
      throw std::runtime_error("unknown feature kind: " + kind);
    }
    schema.features.push_back(std::move(column));
  }
  schema.validate();
  return schema;
}

}  // namespace

FeatureSchema load_schema_json(const std::filesystem::path& path) {
  return schema_from_json(read_json(path));
}

void save_schema_json(const FeatureSchema& schema,
                      const std::filesystem::path& path) {
  write_json(schema_to_json(schema), path);
}

void save_glm(const GlmModel& model, const std::filesystem::path& path) {
  Json json;
  json["kind"] = "poisson_glm";
  json["schema"] = schema_to_json(model.schema);
  Json terms = Json::array();
  for (const auto& term : model.terms) terms.push_back(term_to_string(term));
  json["terms"] = std::move(terms);
  json["labels"] = model.labels;
  json["beta"] = vector_to_json(model.beta);
  Json fit;
  fit["log_likelihood"] = model.fit.log_likelihood;
  fit["residual_deviance"] = model.fit.residual_deviance;
  fit["null_deviance"] = model.fit.null_deviance;
  fit["aic"] = model.fit.aic;
  fit["bic"] = model.fit.bic;
  fit["degrees_of_freedom"] = model.fit.degrees_of_freedom;
  fit["converged"] = model.fit.converged;
  fit["iterations"] = model.fit.iterations;
  fit["iteration_deviance"] = model.fit.iteration_deviance;
  json["fit"] = std::move(fit);
  Json coefficients = Json::array();
  for (const auto& stat : model.coefficients) {
    Json entry;
    entry["estimate"] = stat.estimate;
    entry["std_error"] = stat.std_error;
    entry["z_value"] = stat.z_value;
    entry["p_value"] = stat.p_value;
    coefficients.push_back(std::move(entry));
  }
  json["coefficients"] = std::move(coefficients);
  write_json(json, path);
}

GlmModel load_glm(const std::filesystem::path& path) {
  const Json json = read_json(path);
  if (json.value("kind", "") != "poisson_glm")
    throw std::runtime_error(path.string() + " is not a GLM model file");
  GlmModel model;
  model.schema = schema_from_json(json.at("schema"));
  for (const auto& text : json.at("terms"))
    model.terms.push_back(parse_term(text.get<std::string>(), model.schema));
  model.labels = json.at("labels").get<std::vector<std::string>>();
  model.beta = vector_from_json(json.at("beta"));
  const auto& fit = json.at("fit");
  model.fit.log_likelihood = fit.at("log_likelihood").get<double>();
  model.fit.residual_deviance = fit.at("residual_deviance").get<double>();
  model.fit.null_deviance = fit.at("null_deviance").get<double>();
  model.fit.aic = fit.at("aic").get<double>();
  model.fit.bic = fit.at("bic").get<double>();
  model.fit.degrees_of_freedom =
      fit.at("degrees_of_freedom").get<std::int64_t>();
  model.fit.converged = fit.at("converged").get<bool>();
  model.fit.iterations = fit.at("iterations").get<int>();
  model.fit.iteration_deviance =
      fit.at("iteration_deviance").get<std::vector<double>>();
  for (const auto& entry : json.at("coefficients")) {
    CoefficientStat stat;
    stat.estimate = entry.at("estimate").get<double>();
    stat.std_error = entry.at("std_error").get<double>();
    stat.z_value = entry.at("z_value").get<double>();
    stat.p_value = entry.at("p_value").get<double>();
    model.coefficients.push_back(stat);
  }
  return model;
}

void save_cann(const CannModel& model, const std::filesystem::path& path) {
  Json json;
  json["kind"] = "cann_model";

  Json architecture;
  architecture["hidden_sizes"] = model.architecture.hidden_sizes;
  architecture["activation"] = activation_name(model.architecture.activation);
  architecture["lrelu_alpha"] = model.architecture.lrelu_alpha;
  Json embeddings = Json::array();
  for (const auto& spec : model.architecture.embeddings) {
    Json entry;
    entry["feature"] = spec.feature;
    entry["categories"] = spec.categories;
    entry["dimension"] = spec.dimension;
    embeddings.push_back(std::move(entry));
  }
  architecture["embeddings"] = std::move(embeddings);
  json["architecture"] = std::move(architecture);

  Json config;
  config["batch_size"] = model.config.batch_size;
  config["max_epochs"] = model.config.max_epochs;
  config["patience"] = model.config.patience;
  config["dropout_rate"] = model.config.dropout_rate;
  config["learning_rate"] = model.config.learning_rate;
  config["rmsprop_decay"] = model.config.rmsprop_decay;
  config["rmsprop_epsilon"] = model.config.rmsprop_epsilon;
  config["onehot_threshold"] = model.config.onehot_threshold;
  config["seed"] = model.config.seed;
  json["config"] = std::move(config);

  Json scaling = Json::array();
  for (const auto& range : model.scaling) {
    Json entry;
    entry["feature"] = range.feature;
    entry["minimum"] = range.minimum;
    entry["maximum"] = range.maximum;
    scaling.push_back(std::move(entry));
  }
  json["scaling"] = std::move(scaling);
  json["input_feature"] = model.input_feature;
  json["input_label"] = model.input_label;

  Json weights;
  Json tables = Json::array();
  for (const auto& table : model.weights.embedding_tables)
    tables.push_back(matrix_to_json(table));
  weights["embedding_tables"] = std::move(tables);
  Json kernels = Json::array();
  Json biases = Json::array();
  for (std::size_t l = 0; l < model.weights.layer_weights.size(); ++l) {
    kernels.push_back(matrix_to_json(model.weights.layer_weights[l]));
    biases.push_back(vector_to_json(model.weights.layer_biases[l]));
  }
  weights["layer_weights"] = std::move(kernels);
  weights["layer_biases"] = std::move(biases);
  weights["output_weights"] = vector_to_json(model.weights.output_weights);
  weights["output_bias"] = model.weights.output_bias;
  json["weights"] = std::move(weights);

  Json log = Json::array();
  for (const auto& entry : model.log) {
    Json epoch;
    epoch["epoch"] = entry.epoch;
    epoch["train_deviance"] = entry.train_deviance;
    epoch["val_deviance"] = entry.val_deviance;
    log.push_back(std::move(epoch));
  }
  json["log"] = std::move(log);
  json["best_epoch"] = model.best_epoch;
  json["stopped_epoch"] = model.stopped_epoch;
  write_json(json, path);
}

CannModel load_cann(const std::filesystem::path& path) {
  const Json json = read_json(path);
  if (json.value("kind", "") != "cann_model")
    throw std::runtime_error(path.string() + " is not a CANN model file");
  CannModel model;

  const auto& architecture = json.at("architecture");
  model.architecture.hidden_sizes =
      architecture.at("hidden_sizes").get<std::vector<int>>();
  model.architecture.activation =
      activation_from_name(architecture.at("activation").get<std::string>());
  model.architecture.lrelu_alpha = architecture.at("lrelu_alpha").get<double>();
  for (const auto& entry : architecture.at("embeddings")) {
    EmbeddingSpec spec;
    spec.feature = entry.at("feature").get<std::string>();
    spec.categories = entry.at("categories").get<int>();
    spec.dimension = entry.at("dimension").get<int>();
    model.architecture.embeddings.push_back(std::move(spec));
  }

  const auto& config = json.at("config");
  model.config.batch_size = config.at("batch_size").get<int>();
  model.config.max_epochs = config.at("max_epochs").get<int>();
  model.config.patience = config.at("patience").get<int>();
  model.config.dropout_rate = config.at("dropout_rate").get<double>();
  model.config.learning_rate = config.at("learning_rate").get<double>();
  model.config.rmsprop_decay = config.at("rmsprop_decay").get<double>();
  model.config.rmsprop_epsilon = config.at("rmsprop_epsilon").get<double>();
  model.config.onehot_threshold = config.at("onehot_threshold").get<int>();
  model.config.seed = config.at("seed").get<std::uint64_t>();

  for (const auto& entry : json.at("scaling")) {
    ScalingRange range;
    range.feature = entry.at("feature").get<std::string>();
    range.minimum = entry.at("minimum").get<double>();
    range.maximum = entry.at("maximum").get<double>();
    model.scaling.push_back(std::move(range));
  }
  model.input_feature =
      json.at("input_feature").get<std::vector<std::string>>();
  model.input_label = json.at("input_label").get<std::vector<std::string>>();

  const auto& weights = json.at("weights");
  for (const auto& table : weights.at("embedding_tables"))
    model.weights.embedding_tables.push_back(matrix_from_json(table));
  for (const auto& kernel : weights.at("layer_weights"))
    model.weights.layer_weights.push_back(matrix_from_json(kernel));
  for (const auto& bias : weights.at("layer_biases"))
    model.weights.layer_biases.push_back(vector_from_json(bias));
  model.weights.output_weights =
      vector_from_json(weights.at("output_weights"));
  model.weights.output_bias = weights.at("output_bias").get<double>();

  for (const auto& entry : json.at("log")) {
    EpochLog epoch;
    epoch.epoch = entry.at("epoch").get<int>();
    epoch.train_deviance = entry.at("train_deviance").get<double>();
    epoch.val_deviance = entry.at("val_deviance").get<double>();
    model.log.push_back(epoch);
  }
  model.best_epoch = json.at("best_epoch").get<int>();
  model.stopped_epoch = json.at("stopped_epoch").get<int>();
  return model;
}

}  // namespace nbi
