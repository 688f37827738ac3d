#include "nbi/pipeline.hpp"

#include <cstdlib>
#include <sstream>

#include "json_util.hpp"
#include "nbi/csv.hpp"
#include "nbi/evaluation.hpp"
#include "nbi/synthetic.hpp"

namespace nbi {

namespace fs = std::filesystem;

namespace {

// Artifact file names, fixed so stages can find each other's outputs.
constexpr const char* kSchema = "schema.json";
constexpr const char* kTrain = "data_train.csv";
constexpr const char* kValidation = "data_validation.csv";
constexpr const char* kTest = "data_test.csv";
constexpr const char* kManifest = "split_manifest.json";
constexpr const char* kBenchmark = "benchmark_glm.json";
constexpr const char* kBenchmarkSummary = "benchmark_summary.json";
constexpr const char* kLeaderboard = "tuning_leaderboard.csv";
constexpr const char* kGenerations = "tuning_generations.csv";
constexpr const char* kTuningBest = "tuning_best.json";
constexpr const char* kCann = "cann_model.json";
constexpr const char* kTrainingLog = "training_log.csv";
constexpr const char* kNidScores = "nid_scores.csv";
constexpr const char* kNidTop = "nid_top.csv";
constexpr const char* kNidInputs = "nid_input_scores.csv";
constexpr const char* kComparison = "mini_glm_comparison.csv";
constexpr const char* kRecommendation = "recommendation.json";
constexpr const char* kBenchmarkUpdated = "benchmark_updated.json";
constexpr const char* kLiftPredetermined = "lift_predetermined.csv";
constexpr const char* kLiftQuantile = "lift_quantile.csv";
constexpr const char* kKpiSummary = "kpi_summary.json";
constexpr const char* kState = "pipeline_state.json";

const std::vector<std::string> kDataOutputs{kSchema, kTrain, kValidation,
                                            kTest, kManifest};

std::vector<std::string> default_benchmark_terms() {
  return {"intercept", "x_1", "x_2^2", "x_3", "x_3^2", "x_9", "x_10"};
}

// Stage fingerprints: a stage re-runs when the hash of the configuration it
// depends on changes.
std::string data_fingerprint(const RunConfig& c) {
  std::ostringstream out;
  out << c.data_csv << '|' << c.schema_json << '|' << c.synthetic_rows << '|'
      << c.synthetic_seed << '|' << c.synthetic_clamp << '|' << c.split_seed;
  for (const double f : c.split_fractions) out << '|' << format_double(f);
  if (!c.data_csv.empty() && fs::exists(c.data_csv))
    out << "|src=" << hash_file(c.data_csv);
  return hash_bytes(out.str());
}

std::string benchmark_fingerprint(const RunConfig& c) {
  std::ostringstream out;
  for (const auto& term : c.benchmark_terms) out << term << '|';
  if (c.benchmark_terms.empty())
    for (const auto& term : default_benchmark_terms()) out << term << '|';
  out << format_double(c.irls.tolerance) << '|' << c.irls.max_iterations;
  return hash_bytes(out.str());
}

std::string tuning_fingerprint(const RunConfig& c) {
  std::ostringstream out;
  out << c.tune_mode << '|' << c.grid_seed << '|';
  for (const auto a : c.grid.activations) out << activation_name(a) << ',';
  out << '|';
  for (const auto v : c.grid.dropout_rates) out << format_double(v) << ',';
  out << '|';
  for (const auto v : c.grid.learning_rates) out << format_double(v) << ',';
  out << '|';
  for (const auto v : c.grid.embedding_dims) out << v << ',';
  out << '|';
  for (const auto& layout : c.grid.hidden_layouts) {
    for (const auto v : layout) out << v << '.';
    out << ',';
  }
  out << '|' << c.ga.population_size << '|' << c.ga.max_generations << '|'
      << format_double(c.ga.mutation_rate) << '|' << c.ga.elitism << '|'
      << c.ga.stall_patience << '|' << c.ga.seed;
  return hash_bytes(out.str());
}

std::string cann_fingerprint(const RunConfig& c) {
  std::ostringstream out;
  for (const auto v : c.hidden_sizes) out << v << ',';
  out << '|' << c.activation << '|' << format_double(c.lrelu_alpha) << '|'
      << c.embedding_dim << '|' << c.train.batch_size << '|'
      << c.train.max_epochs << '|' << c.train.patience << '|'
      << format_double(c.train.dropout_rate) << '|'
      << format_double(c.train.learning_rate) << '|'
      << format_double(c.train.rmsprop_decay) << '|'
      << format_double(c.train.rmsprop_epsilon) << '|'
      << c.train.onehot_threshold << '|' << c.train.seed << '|'
      << c.tune_mode;
  return hash_bytes(out.str());
}

std::string nid_fingerprint(const RunConfig& c) {
  std::ostringstream out;
  out << c.surrogate << '|' << c.aggregation << '|' << c.top_k;
  return hash_bytes(out.str());
}

std::string selection_fingerprint(const RunConfig& c) {
  std::ostringstream out;
  for (const auto p : c.forms.powers) out << p << ',';
  out << '|' << kpi_name(c.forms.kpi) << '|' << c.forms.include_binned << '|'
      << c.forms.bin_count << '|' << c.forms.include_clustered << '|'
      << c.forms.cluster_k_min << '|' << c.forms.cluster_k_max << '|'
      << c.forms.cluster_seed << '|' << c.top_k;
  return hash_bytes(out.str());
}

std::string evaluation_fingerprint(const RunConfig& c) {
  return hash_bytes(std::to_string(c.quantile_bins));
}

std::map<std::string, std::string> hash_inputs(
    const fs::path& dir, const std::vector<std::string>& files,
    const std::string& fingerprint) {
  std::map<std::string, std::string> hashes;
  for (const auto& file : files) hashes[file] = hash_file(dir / file);
  hashes["config"] = fingerprint;
  return hashes;
}

bool stage_fresh(const PipelineState& state, const fs::path& dir,
                 const std::vector<std::string>& outputs,
                 const std::map<std::string, std::string>& inputs) {
  for (const auto& output : outputs) {
    const auto found = state.artifacts.find(output);
    if (found == state.artifacts.end()) return false;
    if (!fs::exists(dir / output)) return false;
    if (hash_file(dir / output) != found->second.hash) return false;
    if (found->second.inputs != inputs) return false;
  }
  return true;
}

void record_stage(PipelineState& state, const fs::path& dir,
                  const std::vector<std::string>& outputs,
                  const std::map<std::string, std::string>& inputs) {
  for (const auto& output : outputs) {
    PipelineState::Artifact artifact;
    artifact.hash = hash_file(dir / output);
    artifact.inputs = inputs;
    state.artifacts[output] = std::move(artifact);
  }
  save_pipeline_state(state, dir);
}

void require_artifacts(const fs::path& dir,
                       const std::vector<std::string>& files,
                       const std::string& hint) {
  for (const auto& file : files)
    if (!fs::exists(dir / file))
      throw std::runtime_error("missing artifact " + (dir / file).string() +
                               "; run '" + hint + "' first");
}

// Loaders shared by the stage bodies.

FeatureSchema stage_schema(const fs::path& dir) {
  return load_schema_json(dir / kSchema);
}

SplitDataset load_split(const fs::path& dir) {
  const FeatureSchema schema = stage_schema(dir);
  SplitDataset data;
  data.train = read_dataset_csv(dir / kTrain, schema);
  data.validation = read_dataset_csv(dir / kValidation, schema);
  data.test = read_dataset_csv(dir / kTest, schema);
  return data;
}

std::vector<TermSpec> benchmark_terms(const RunConfig& config,
                                      const FeatureSchema& schema) {
  const auto texts = config.benchmark_terms.empty()
                         ? default_benchmark_terms()
                         : config.benchmark_terms;
  std::vector<TermSpec> terms;
  terms.reserve(texts.size());
  for (const auto& text : texts) terms.push_back(parse_term(text, schema));
  return terms;
}

NnArchitecture configured_architecture(const RunConfig& config,
                                       const FeatureSchema& schema) {
  NnArchitecture architecture = default_architecture(
      schema, config.train.onehot_threshold, config.embedding_dim);
  architecture.hidden_sizes = config.hidden_sizes;
  architecture.activation = activation_from_name(config.activation);
  architecture.lrelu_alpha = config.lrelu_alpha;
  return architecture;
}

void write_split_artifacts(const RunConfig& config, const Dataset& full,
                           const std::string& source) {
  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  const SplitDataset parts =
      split(full, config.split_fractions, config.split_seed);

  save_schema_json(full.schema, dir / kSchema);
  write_dataset_csv(parts.train, dir / kTrain);
  write_dataset_csv(parts.validation, dir / kValidation);
  write_dataset_csv(parts.test, dir / kTest);

  Json manifest;
  manifest["source"] = source;
  manifest["rows"] = full.size();
  manifest["split_seed"] = config.split_seed;
  Json fractions = Json::array();
  for (const double f : config.split_fractions) fractions.push_back(f);
  manifest["fractions"] = std::move(fractions);
  Json counts;
  counts["train"] = parts.train.size();
  counts["validation"] = parts.validation.size();
  counts["test"] = parts.test.size();
  manifest["counts"] = std::move(counts);
  std::int64_t total_claims = 0;
  for (const auto y : full.claims) total_claims += y;
  manifest["total_claims"] = total_claims;
  Json files;
  files[kTrain] = hash_file(dir / kTrain);
  files[kValidation] = hash_file(dir / kValidation);
  files[kTest] = hash_file(dir / kTest);
  manifest["file_hashes"] = std::move(files);
  write_json(manifest, dir / kManifest);

  PipelineState state = load_pipeline_state(dir);
  record_stage(state, dir, kDataOutputs,
               {{"config", data_fingerprint(config)}});
}

Json metrics_to_json(const PortfolioMetrics& metrics) {
  Json json;
  json["mean_deviance"] = metrics.mean_deviance;
  json["wapf"] = metrics.wapf;
  json["waof"] = metrics.waof;
  json["balance_gap"] = metrics.balance_gap;
  return json;
}

}  // namespace

void RunConfig::validate() const {
  if (synthetic_rows < 1 && data_csv.empty())
    throw std::invalid_argument("row count must be at least 1");
  double total = 0.0;
  for (const double f : split_fractions) {
    if (!(f > 0.0))
      throw std::invalid_argument("split fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must sum to one");
  if (irls.max_iterations < 0 || !(irls.tolerance > 0.0))
    throw std::invalid_argument("bad IRLS options");
  if (hidden_sizes.empty())
    throw std::invalid_argument("need at least one hidden layer");
  for (const int width : hidden_sizes)
    if (width < 1) throw std::invalid_argument("hidden width must be >= 1");
  activation_from_name(activation);
  if (embedding_dim < 1)
    throw std::invalid_argument("embedding dimension must be >= 1");
  if (train.batch_size < 1 || train.max_epochs < 0 || train.patience < 1)
    throw std::invalid_argument("bad training configuration");
  if (!(train.dropout_rate >= 0.0 && train.dropout_rate < 1.0))
    throw std::invalid_argument("dropout rate must be in [0, 1)");
  if (!(train.learning_rate > 0.0))
    throw std::invalid_argument("learning rate must be positive");
  if (train.onehot_threshold < 1)
    throw std::invalid_argument("one-hot threshold must be >= 1");
  surrogate_from_name(surrogate);
  aggregation_from_name(aggregation);
  if (top_k < 1) throw std::invalid_argument("top_k must be >= 1");
  if (forms.powers.empty())
    throw std::invalid_argument("power grid must not be empty");
  for (const int p : forms.powers)
    if (p < 1) throw std::invalid_argument("powers must be >= 1");
  if (forms.bin_count < 2)
    throw std::invalid_argument("bin count must be >= 2");
  if (quantile_bins < 1)
    throw std::invalid_argument("quantile bin count must be >= 1");
  if (tune_mode != "none" && tune_mode != "grid" && tune_mode != "ga")
    throw std::invalid_argument("tune mode must be none, grid or ga");
  grid.validate();
  if (ga.population_size < 2)
    throw std::invalid_argument("GA population must be >= 2");
  if (!(ga.mutation_rate >= 0.0 && ga.mutation_rate <= 1.0))
    throw std::invalid_argument("mutation rate must be in [0, 1]");
}

RunConfig default_run_config() {
  RunConfig config;
  if (const char* env = std::getenv("NBI_OUTPUT_DIR");
      env != nullptr && *env != '\0')
    config.output_dir = env;
  return config;
}

RunConfig load_run_config(const fs::path& path) {
  RunConfig config = default_run_config();
  const Json json = read_json(path);

  if (json.contains("output_dir"))
    config.output_dir = json.at("output_dir").get<std::string>();
  if (json.contains("data")) {
    const auto& data = json.at("data");
    config.data_csv = data.value("csv", config.data_csv);
    config.schema_json = data.value("schema", config.schema_json);
    config.synthetic_rows = data.value("rows", config.synthetic_rows);
    config.synthetic_seed = data.value("seed", config.synthetic_seed);
    config.synthetic_clamp = data.value("clamp", config.synthetic_clamp);
    if (data.contains("fractions")) {
      const auto fractions = data.at("fractions").get<std::vector<double>>();
      if (fractions.size() != 3)
        throw std::invalid_argument("fractions needs three entries");
      std::copy(fractions.begin(), fractions.end(),
                config.split_fractions.begin());
    }
    config.split_seed = data.value("split_seed", config.split_seed);
  }
  if (json.contains("benchmark")) {
    const auto& benchmark = json.at("benchmark");
    if (benchmark.contains("terms"))
      config.benchmark_terms =
          benchmark.at("terms").get<std::vector<std::string>>();
    config.irls.tolerance = benchmark.value("tolerance",
                                            config.irls.tolerance);
    config.irls.max_iterations =
        benchmark.value("max_iterations", config.irls.max_iterations);
  }
  if (json.contains("cann")) {
    const auto& cann = json.at("cann");
    if (cann.contains("hidden_sizes"))
      config.hidden_sizes = cann.at("hidden_sizes").get<std::vector<int>>();
    config.activation = cann.value("activation", config.activation);
    config.lrelu_alpha = cann.value("lrelu_alpha", config.lrelu_alpha);
    config.embedding_dim = cann.value("embedding_dim", config.embedding_dim);
    config.train.batch_size = cann.value("batch_size",
                                         config.train.batch_size);
    config.train.max_epochs = cann.value("max_epochs",
                                         config.train.max_epochs);
    config.train.patience = cann.value("patience", config.train.patience);
    config.train.dropout_rate =
        cann.value("dropout_rate", config.train.dropout_rate);
    config.train.learning_rate =
        cann.value("learning_rate", config.train.learning_rate);
    config.train.rmsprop_decay =
        cann.value("rmsprop_decay", config.train.rmsprop_decay);
    config.train.rmsprop_epsilon =
        cann.value("rmsprop_epsilon", config.train.rmsprop_epsilon);
    config.train.onehot_threshold =
        cann.value("onehot_threshold", config.train.onehot_threshold);
    config.train.seed = cann.value("seed", config.train.seed);
  }
  if (json.contains("nid")) {
    const auto& nid = json.at("nid");
    config.surrogate = nid.value("surrogate", config.surrogate);
    config.aggregation = nid.value("aggregation", config.aggregation);
    config.top_k = nid.value("top_k", config.top_k);
  }
  if (json.contains("selection")) {
    const auto& selection = json.at("selection");
    if (selection.contains("powers"))
      config.forms.powers = selection.at("powers").get<std::vector<int>>();
    if (selection.contains("kpi"))
      config.forms.kpi =
          kpi_from_name(selection.at("kpi").get<std::string>());
    config.forms.include_binned =
        selection.value("include_binned", config.forms.include_binned);
    config.forms.bin_count = selection.value("bin_count",
                                             config.forms.bin_count);
    config.forms.include_clustered =
        selection.value("include_clustered", config.forms.include_clustered);
    config.forms.cluster_k_min =
        selection.value("cluster_k_min", config.forms.cluster_k_min);
    config.forms.cluster_k_max =
        selection.value("cluster_k_max", config.forms.cluster_k_max);
    config.forms.cluster_seed =
        selection.value("cluster_seed", config.forms.cluster_seed);
  }
  if (json.contains("evaluation"))
    config.quantile_bins =
        json.at("evaluation").value("quantile_bins", config.quantile_bins);
  if (json.contains("tuning")) {
    const auto& tuning = json.at("tuning");
    config.tune_mode = tuning.value("mode", config.tune_mode);
    config.grid_seed = tuning.value("seed", config.grid_seed);
    if (tuning.contains("grid")) {
      const auto& grid = tuning.at("grid");
      if (grid.contains("activations")) {
        config.grid.activations.clear();
        for (const auto& name : grid.at("activations"))
          config.grid.activations.push_back(
              activation_from_name(name.get<std::string>()));
      }
      if (grid.contains("dropout_rates"))
        config.grid.dropout_rates =
            grid.at("dropout_rates").get<std::vector<double>>();
      if (grid.contains("learning_rates"))
        config.grid.learning_rates =
            grid.at("learning_rates").get<std::vector<double>>();
      if (grid.contains("embedding_dims"))
        config.grid.embedding_dims =
            grid.at("embedding_dims").get<std::vector<int>>();
      if (grid.contains("hidden_layouts"))
        config.grid.hidden_layouts =
            grid.at("hidden_layouts").get<std::vector<std::vector<int>>>();
    }
    if (tuning.contains("ga")) {
      const auto& ga = tuning.at("ga");
      config.ga.population_size =
          ga.value("population_size", config.ga.population_size);
      config.ga.max_generations =
          ga.value("max_generations", config.ga.max_generations);
      config.ga.mutation_rate =
          ga.value("mutation_rate", config.ga.mutation_rate);
      config.ga.elitism = ga.value("elitism", config.ga.elitism);
      config.ga.stall_patience =
          ga.value("stall_patience", config.ga.stall_patience);
      config.ga.seed = ga.value("seed", config.ga.seed);
    }
  }
  return config;
}

void save_run_config(const RunConfig& config, const fs::path& path) {
  Json json;
  json["output_dir"] = config.output_dir.string();
  Json data;
  data["csv"] = config.data_csv;
  data["schema"] = config.schema_json;
  data["rows"] = config.synthetic_rows;
  data["seed"] = config.synthetic_seed;
  data["clamp"] = config.synthetic_clamp;
  Json fractions = Json::array();
  for (const double f : config.split_fractions) fractions.push_back(f);
  data["fractions"] = std::move(fractions);
  data["split_seed"] = config.split_seed;
  json["data"] = std::move(data);
  Json benchmark;
  benchmark["terms"] = config.benchmark_terms.empty()
                           ? default_benchmark_terms()
                           : config.benchmark_terms;
  benchmark["tolerance"] = config.irls.tolerance;
  benchmark["max_iterations"] = config.irls.max_iterations;
  json["benchmark"] = std::move(benchmark);
  Json cann;
  cann["hidden_sizes"] = config.hidden_sizes;
  cann["activation"] = config.activation;
  cann["lrelu_alpha"] = config.lrelu_alpha;
  cann["embedding_dim"] = config.embedding_dim;
  cann["batch_size"] = config.train.batch_size;
  cann["max_epochs"] = config.train.max_epochs;
  cann["patience"] = config.train.patience;
  cann["dropout_rate"] = config.train.dropout_rate;
  cann["learning_rate"] = config.train.learning_rate;
  cann["rmsprop_decay"] = config.train.rmsprop_decay;
  cann["rmsprop_epsilon"] = config.train.rmsprop_epsilon;
  cann["onehot_threshold"] = config.train.onehot_threshold;
  cann["seed"] = config.train.seed;
  json["cann"] = std::move(cann);
  Json nid;
  nid["surrogate"] = config.surrogate;
  nid["aggregation"] = config.aggregation;
  nid["top_k"] = config.top_k;
  json["nid"] = std::move(nid);
  Json selection;
  selection["powers"] = config.forms.powers;
  selection["kpi"] = kpi_name(config.forms.kpi);
  selection["include_binned"] = config.forms.include_binned;
  selection["bin_count"] = config.forms.bin_count;
  selection["include_clustered"] = config.forms.include_clustered;
  selection["cluster_k_min"] = config.forms.cluster_k_min;
  selection["cluster_k_max"] = config.forms.cluster_k_max;
  selection["cluster_seed"] = config.forms.cluster_seed;
  json["selection"] = std::move(selection);
  Json evaluation;
  evaluation["quantile_bins"] = config.quantile_bins;
  json["evaluation"] = std::move(evaluation);
  Json tuning;
  tuning["mode"] = config.tune_mode;
  tuning["seed"] = config.grid_seed;
  Json grid;
  Json activations = Json::array();
  for (const auto a : config.grid.activations)
    activations.push_back(activation_name(a));
  grid["activations"] = std::move(activations);
  grid["dropout_rates"] = config.grid.dropout_rates;
  grid["learning_rates"] = config.grid.learning_rates;
  grid["embedding_dims"] = config.grid.embedding_dims;
  grid["hidden_layouts"] = config.grid.hidden_layouts;
  tuning["grid"] = std::move(grid);
  Json ga;
  ga["population_size"] = config.ga.population_size;
  ga["max_generations"] = config.ga.max_generations;
  ga["mutation_rate"] = config.ga.mutation_rate;
  ga["elitism"] = config.ga.elitism;
  ga["stall_patience"] = config.ga.stall_patience;
  ga["seed"] = config.ga.seed;
  tuning["ga"] = std::move(ga);
  json["tuning"] = std::move(tuning);
  write_json(json, path);
}

PipelineState load_pipeline_state(const fs::path& output_dir) {
  PipelineState state;
  const fs::path path = output_dir / kState;
  if (!fs::exists(path)) return state;
  const Json json = read_json(path);
  for (const auto& [name, entry] : json.at("artifacts").items()) {
    PipelineState::Artifact artifact;
    artifact.hash = entry.at("hash").get<std::string>();
    for (const auto& [input, hash] : entry.at("inputs").items())
      artifact.inputs[input] = hash.get<std::string>();
    state.artifacts[name] = std::move(artifact);
  }
  return state;
}

void save_pipeline_state(const PipelineState& state,
                         const fs::path& output_dir) {
  nlohmann::json json;  // plain json sorts keys, keeping the file stable
  auto& artifacts = json["artifacts"];
  artifacts = nlohmann::json::object();
  for (const auto& [name, artifact] : state.artifacts) {
    nlohmann::json entry;
    entry["hash"] = artifact.hash;
    entry["inputs"] = artifact.inputs;
    artifacts[name] = std::move(entry);
  }
  write_file(output_dir / kState, json.dump(2) + "\n");
}

void cmd_generate(const RunConfig& config) {
  config.validate();
  const Dataset full = generate_synthetic(
      config.synthetic_rows, config.synthetic_seed, config.synthetic_clamp);
  write_split_artifacts(config, full, "synthetic");
}

void cmd_ingest(const RunConfig& config) {
  config.validate();
  if (config.data_csv.empty())
    throw std::invalid_argument("ingest needs a data CSV path");
  const FeatureSchema schema = config.schema_json.empty()
                                   ? synthetic_schema()
                                   : load_schema_json(config.schema_json);
  const Dataset full = read_dataset_csv(config.data_csv, schema);
  write_split_artifacts(config, full, config.data_csv);
}

void cmd_fit_benchmark(const RunConfig& config) {
  config.validate();
  const fs::path dir = config.output_dir;
  require_artifacts(dir, kDataOutputs, "generate");

  const SplitDataset data = load_split(dir);
  const Dataset fitting = concat_rows(data.train, data.validation);
  const auto terms = benchmark_terms(config, fitting.schema);
  const GlmModel model =
      fit_poisson(fitting, terms, log_exposure_offset(fitting), config.irls);
  save_glm(model, dir / kBenchmark);

  const auto fit_expected =
      predict(model, fitting, log_exposure_offset(fitting));
  const auto test_expected =
      predict(model, data.test, log_exposure_offset(data.test));

  Json summary;
  Json terms_json = Json::array();
  for (const auto& term : model.terms)
    terms_json.push_back(term_to_string(term));
  summary["terms"] = std::move(terms_json);
  summary["labels"] = model.labels;
  summary["aic"] = model.fit.aic;
  summary["bic"] = model.fit.bic;
  summary["residual_deviance"] = model.fit.residual_deviance;
  summary["null_deviance"] = model.fit.null_deviance;
  summary["converged"] = model.fit.converged;
  summary["iterations"] = model.fit.iterations;
  summary["fitting"] = metrics_to_json(portfolio_metrics(fit_expected,
                                                         fitting));
  summary["test"] = metrics_to_json(portfolio_metrics(test_expected,
                                                      data.test));
  Json coefficients = Json::array();
  for (std::size_t j = 0; j < model.coefficients.size(); ++j) {
    Json entry;
    entry["label"] = model.labels[j];
    entry["estimate"] = model.coefficients[j].estimate;
    entry["std_error"] = model.coefficients[j].std_error;
    entry["p_value"] = model.coefficients[j].p_value;
    coefficients.push_back(std::move(entry));
  }
  summary["coefficients"] = std::move(coefficients);
  write_json(summary, dir / kBenchmarkSummary);

  PipelineState state = load_pipeline_state(dir);
  record_stage(state, dir, {kBenchmark, kBenchmarkSummary},
               hash_inputs(dir, {kTrain, kValidation, kTest},
                           benchmark_fingerprint(config)));
}

void cmd_tune(const RunConfig& config) {
  config.validate();
  if (config.tune_mode == "none")
    throw std::invalid_argument("tuning mode is 'none'; set mode grid or ga");
  const fs::path dir = config.output_dir;
  require_artifacts(dir, kDataOutputs, "generate");
  require_artifacts(dir, {kBenchmark}, "fit-benchmark");

  const SplitDataset data = load_split(dir);
  const GlmModel benchmark = load_glm(dir / kBenchmark);
  const NnArchitecture base =
      configured_architecture(config, data.train.schema);
  const EvalFn evaluate = make_cann_evaluator(data, benchmark, config.grid,
                                              base, config.train);

  std::vector<std::string> outputs{kLeaderboard, kTuningBest};
  Genotype best;
  std::uint64_t best_seed = 0;
  if (config.tune_mode == "grid") {
    const GridSearchResult result =
        grid_search(config.grid, evaluate, config.grid_seed);
    write_leaderboard_csv(config.grid, result.leaderboard,
                          dir / kLeaderboard);
    best = result.best_row().genotype;
    best_seed = result.best_row().seed;
  } else {
    GaConfig ga = config.ga;
    ga.seed = config.grid_seed;
    const GaSearchResult result = ga_search(config.grid, ga, evaluate);
    write_leaderboard_csv(config.grid, result.evaluations, dir / kLeaderboard);
    write_generation_csv(result.generations, dir / kGenerations);
    outputs.push_back(kGenerations);
    best = result.best.genotype;
    best_seed = result.best.seed;
  }

  const auto [architecture, train] =
      decode_genotype(config.grid, best, configured_architecture(
                                            config, data.train.schema),
                      config.train);
  Json json;
  json["mode"] = config.tune_mode;
  Json genes = Json::array();
  for (const int g : best.genes) genes.push_back(g);
  json["genotype"] = std::move(genes);
  json["label"] = genotype_label(config.grid, best);
  json["seed"] = best_seed;
  json["activation"] = activation_name(architecture.activation);
  json["hidden_sizes"] = architecture.hidden_sizes;
  json["embedding_dim"] = architecture.embeddings.empty()
                              ? config.embedding_dim
                              : architecture.embeddings[0].dimension;
  json["dropout_rate"] = train.dropout_rate;
  json["learning_rate"] = train.learning_rate;
  write_json(json, dir / kTuningBest);

  PipelineState state = load_pipeline_state(dir);
  record_stage(state, dir, outputs,
               hash_inputs(dir, {kTrain, kValidation, kTest, kBenchmark},
                           tuning_fingerprint(config)));
}

namespace {

// Applies tuning_best.json (when tuning is enabled and the file exists) on
// top of the configured architecture and training settings.
std::pair<NnArchitecture, TrainConfig> effective_cann_settings(
    const RunConfig& config, const FeatureSchema& schema) {
  NnArchitecture architecture = configured_architecture(config, schema);
  TrainConfig train = config.train;
  const fs::path best_path = fs::path(config.output_dir) / kTuningBest;
  if (config.tune_mode != "none" && fs::exists(best_path)) {
    const Json json = read_json(best_path);
    architecture.activation =
        activation_from_name(json.at("activation").get<std::string>());
    architecture.hidden_sizes =
        json.at("hidden_sizes").get<std::vector<int>>();
    const int dim = json.at("embedding_dim").get<int>();
    for (auto& embedding : architecture.embeddings)
      embedding.dimension = dim;
    train.dropout_rate = json.at("dropout_rate").get<double>();
    train.learning_rate = json.at("learning_rate").get<double>();
  }
  return {std::move(architecture), train};
}

std::vector<std::string> cann_input_files(const RunConfig& config) {
  std::vector<std::string> files{kTrain, kValidation, kBenchmark};
  if (config.tune_mode != "none" &&
      fs::exists(fs::path(config.output_dir) / kTuningBest))
    files.push_back(kTuningBest);
  return files;
}

}  // namespace

void cmd_train_cann(const RunConfig& config) {
  config.validate();
  const fs::path dir = config.output_dir;
  require_artifacts(dir, kDataOutputs, "generate");
  require_artifacts(dir, {kBenchmark}, "fit-benchmark");

  const SplitDataset data = load_split(dir);
  const GlmModel benchmark = load_glm(dir / kBenchmark);
  const auto [architecture, train] =
      effective_cann_settings(config, data.train.schema);
  const CannModel model = train_cann(data, benchmark, architecture, train);
  save_cann(model, dir / kCann);

  std::ostringstream log;
  log << "epoch,train_deviance,val_deviance\n";
  for (const auto& entry : model.log)
    log << entry.epoch << ',' << format_double(entry.train_deviance) << ','
        << format_double(entry.val_deviance) << '\n';
  write_file(dir / kTrainingLog, log.str());

  PipelineState state = load_pipeline_state(dir);
  record_stage(state, dir, {kCann, kTrainingLog},
               hash_inputs(dir, cann_input_files(config),
                           cann_fingerprint(config)));
}

void cmd_detect(const RunConfig& config) {
  config.validate();
  const fs::path dir = config.output_dir;
  if (!fs::exists(dir / kCann)) cmd_train_cann(config);

  // Refuse to score a model whose inputs changed since it was trained.
  const PipelineState recorded = load_pipeline_state(dir);
  const auto found = recorded.artifacts.find(kCann);
  if (found != recorded.artifacts.end()) {
    for (const auto& [input, hash] : found->second.inputs) {
      if (input == "config") continue;
      if (!fs::exists(dir / input) || hash_file(dir / input) != hash)
        throw std::runtime_error(
            "stale artifact: " + std::string(kCann) + " was trained against "
            "a different " + input + "; re-run train-cann");
    }
  }

  const CannModel model = load_cann(dir / kCann);
  const auto surrogate = surrogate_from_name(config.surrogate);
  const auto aggregation = aggregation_from_name(config.aggregation);

  const auto input_scores = input_pair_scores(model.weights, surrogate);
  const auto features = rank_pairs(
      aggregate_pair_scores(input_scores, model.input_feature, aggregation));
  write_pair_scores_csv(features, dir / kNidScores);
  write_pair_scores_csv(
      rank_pairs(features, static_cast<std::size_t>(config.top_k)),
      dir / kNidTop);
  write_input_scores_csv(input_scores, model.input_label, dir / kNidInputs);

  PipelineState state = load_pipeline_state(dir);
  record_stage(state, dir, {kNidScores, kNidTop, kNidInputs},
               hash_inputs(dir, {kCann}, nid_fingerprint(config)));
}

namespace {

std::vector<FeaturePairScore> read_top_pairs(const fs::path& path) {
  const std::string text = read_file(path);
  std::istringstream stream(text);
  std::string line;
  std::getline(stream, line);  // header
  std::vector<FeaturePairScore> pairs;
  while (std::getline(stream, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 4)
      throw std::runtime_error("malformed ranking row: " + line);
    FeaturePairScore pair;
    pair.feature_1 = fields[1];
    pair.feature_2 = fields[2];
    if (!parse_double(fields[3], pair.score))
      throw std::runtime_error("malformed score in ranking row: " + line);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

}  // namespace

void cmd_recommend(const RunConfig& config) {
  config.validate();
  const fs::path dir = config.output_dir;
  require_artifacts(dir, kDataOutputs, "generate");
  require_artifacts(dir, {kBenchmark}, "fit-benchmark");
  require_artifacts(dir, {kNidTop}, "detect");

  const SplitDataset data = load_split(dir);
  const GlmModel benchmark = load_glm(dir / kBenchmark);
  auto top = read_top_pairs(dir / kNidTop);
  if (top.size() > static_cast<std::size_t>(config.top_k))
    top.resize(static_cast<std::size_t>(config.top_k));
  if (top.empty())
    throw std::invalid_argument("the ranked pair list is empty");

  std::optional<CannModel> model;
  if (config.forms.include_clustered)
    model.emplace(load_cann(dir / kCann));
  const Recommendation recommendation =
      recommend(data, benchmark, top, config.forms,
                model.has_value() ? &*model : nullptr);
  write_comparison_csv(recommendation, dir / kComparison);

  const auto& winner = recommendation.winning_report();

  // Refit the benchmark with the winning term appended.
  const Dataset fitting = concat_rows(data.train, data.validation);
  std::vector<TermSpec> updated_terms = benchmark.terms;
  updated_terms.push_back(InteractionTerm{winner.form});
  const GlmModel updated = fit_poisson(
      fitting, updated_terms, log_exposure_offset(fitting), config.irls);
  save_glm(updated, dir / kBenchmarkUpdated);

  const auto before_test =
      predict(benchmark, data.test, log_exposure_offset(data.test));
  const auto after_test =
      predict(updated, data.test, log_exposure_offset(data.test));

  Json json;
  json["kpi"] = kpi_name(config.forms.kpi);
  Json top_json = Json::array();
  for (const auto& pair : top) {
    Json entry;
    entry["feature_1"] = pair.feature_1;
    entry["feature_2"] = pair.feature_2;
    entry["score"] = pair.score;
    top_json.push_back(std::move(entry));
  }
  json["top_pairs"] = std::move(top_json);
  Json winner_json;
  winner_json["feature_1"] = winner.feature_1;
  winner_json["feature_2"] = winner.feature_2;
  winner_json["form"] = winner.form_label;
  winner_json["aic"] = winner.aic;
  winner_json["bic"] = winner.bic;
  winner_json["residual_deviance"] = winner.residual_deviance;
  winner_json["test_mean_deviance"] = winner.test_mean_deviance;
  Json winner_coefficients = Json::array();
  for (std::size_t j = 0; j < winner.coefficients.size(); ++j) {
    Json entry;
    entry["label"] = winner.labels[j];
    entry["estimate"] = winner.coefficients[j].estimate;
    entry["std_error"] = winner.coefficients[j].std_error;
    entry["p_value"] = winner.coefficients[j].p_value;
    winner_coefficients.push_back(std::move(entry));
  }
  winner_json["coefficients"] = std::move(winner_coefficients);
  json["winner"] = std::move(winner_json);
  json["term_to_add"] = recommendation.term_text();
  Json before;
  before["test_mean_deviance"] =
      mean_poisson_deviance(before_test, data.test.claims);
  before["residual_deviance"] = benchmark.fit.residual_deviance;
  before["aic"] = benchmark.fit.aic;
  json["benchmark_before"] = std::move(before);
  Json after;
  after["test_mean_deviance"] =
      mean_poisson_deviance(after_test, data.test.claims);
  after["residual_deviance"] = updated.fit.residual_deviance;
  after["aic"] = updated.fit.aic;
  json["benchmark_after"] = std::move(after);
  if (!recommendation.binned_features.empty()) {
    Json binned = Json::array();
    for (const auto& feature : recommendation.binned_features) {
      Json entry;
      entry["name"] = feature.name;
      entry["source"] = feature.source;
      entry["edges"] = feature.edges;
      binned.push_back(std::move(entry));
    }
    json["binned_features"] = std::move(binned);
  }
  if (!recommendation.cluster_maps.empty()) {
    Json clusters = Json::array();
    for (const auto& map : recommendation.cluster_maps) {
      Json entry;
      entry["feature"] = map.feature;
      entry["k"] = map.k;
      entry["assignment"] = map.assignment;
      clusters.push_back(std::move(entry));
    }
    json["cluster_maps"] = std::move(clusters);
  }
  write_json(json, dir / kRecommendation);

  std::vector<std::string> inputs{kTrain, kValidation, kTest, kBenchmark,
                                  kNidTop};
  if (config.forms.include_clustered) inputs.push_back(kCann);
  PipelineState state = load_pipeline_state(dir);
  record_stage(state, dir,
               {kComparison, kRecommendation, kBenchmarkUpdated},
               hash_inputs(dir, inputs, selection_fingerprint(config)));
}

void cmd_evaluate(const RunConfig& config) {
  config.validate();
  const fs::path dir = config.output_dir;
  require_artifacts(dir, kDataOutputs, "generate");
  require_artifacts(dir, {kBenchmark}, "fit-benchmark");
  require_artifacts(dir, {kCann}, "train-cann");

  const SplitDataset data = load_split(dir);
  const GlmModel benchmark = load_glm(dir / kBenchmark);
  const CannModel model = load_cann(dir / kCann);

  const auto competitor = cann_predict(model, data.test, benchmark);
  const auto reference =
      predict(benchmark, data.test, log_exposure_offset(data.test));
  const LiftReport predetermined =
      lift_report(competitor, reference, data.test.claims, data.test.exposure,
                  LiftBinning::predetermined);
  const LiftReport quantile =
      lift_report(competitor, reference, data.test.claims, data.test.exposure,
                  LiftBinning::quantile, config.quantile_bins);
  write_lift_csv(predetermined, dir / kLiftPredetermined);
  write_lift_csv(quantile, dir / kLiftQuantile);

  const Dataset fitting = concat_rows(data.train, data.validation);
  const auto cann_fit = cann_predict(model, fitting, benchmark);
  const auto benchmark_fit =
      predict(benchmark, fitting, log_exposure_offset(fitting));
  const auto cann_metrics = portfolio_metrics(cann_fit, fitting);
  const auto benchmark_metrics = portfolio_metrics(benchmark_fit, fitting);

  Json json;
  Json benchmark_json;
  benchmark_json["test_mean_deviance"] =
      mean_poisson_deviance(reference, data.test.claims);
  benchmark_json["fit_balance_violation"] =
      std::abs(benchmark_metrics.wapf - benchmark_metrics.waof);
  json["benchmark"] = std::move(benchmark_json);
  Json cann_json;
  cann_json["test_mean_deviance"] =
      mean_poisson_deviance(competitor, data.test.claims);
  cann_json["fit_balance_violation"] =
      std::abs(cann_metrics.wapf - cann_metrics.waof);
  json["cann"] = std::move(cann_json);
  Json pb;
  pb["mae_lift_cann"] = predetermined.mae_lift_competitor;
  pb["mae_lift_benchmark"] = predetermined.mae_lift_benchmark;
  json["lift_predetermined"] = std::move(pb);
  Json qbb;
  qbb["mae_lift_cann"] = quantile.mae_lift_competitor;
  qbb["mae_lift_benchmark"] = quantile.mae_lift_benchmark;
  json["lift_quantile"] = std::move(qbb);
  write_json(json, dir / kKpiSummary);

  PipelineState state = load_pipeline_state(dir);
  record_stage(state, dir,
               {kLiftPredetermined, kLiftQuantile, kKpiSummary},
               hash_inputs(dir, {kTrain, kValidation, kTest, kBenchmark,
                                 kCann},
                           evaluation_fingerprint(config)));
}

void cmd_run_all(const RunConfig& config) {
  config.validate();
  const fs::path dir = config.output_dir;
  fs::create_directories(dir);

  auto fresh = [&](const std::vector<std::string>& outputs,
                   const std::vector<std::string>& input_files,
                   const std::string& fingerprint) {
    for (const auto& file : input_files)
      if (!fs::exists(dir / file)) return false;
    const PipelineState state = load_pipeline_state(dir);
    return stage_fresh(state, dir, outputs,
                       hash_inputs(dir, input_files, fingerprint));
  };

  if (!fresh(kDataOutputs, {}, data_fingerprint(config))) {
    if (config.data_csv.empty())
      cmd_generate(config);
    else
      cmd_ingest(config);
  }
  if (!fresh({kBenchmark, kBenchmarkSummary}, {kTrain, kValidation, kTest},
             benchmark_fingerprint(config)))
    cmd_fit_benchmark(config);
  if (config.tune_mode != "none") {
    std::vector<std::string> outputs{kLeaderboard, kTuningBest};
    if (config.tune_mode == "ga") outputs.push_back(kGenerations);
    if (!fresh(outputs, {kTrain, kValidation, kTest, kBenchmark},
               tuning_fingerprint(config)))
      cmd_tune(config);
  }
  if (!fresh({kCann, kTrainingLog}, cann_input_files(config),
             cann_fingerprint(config)))
    cmd_train_cann(config);
  if (!fresh({kNidScores, kNidTop, kNidInputs}, {kCann},
             nid_fingerprint(config)))
    cmd_detect(config);
  {
    std::vector<std::string> inputs{kTrain, kValidation, kTest, kBenchmark,
                                    kNidTop};
    if (config.forms.include_clustered) inputs.push_back(kCann);
    if (!fresh({kComparison, kRecommendation, kBenchmarkUpdated}, inputs,
               selection_fingerprint(config)))
      cmd_recommend(config);
  }
  if (!fresh({kLiftPredetermined, kLiftQuantile, kKpiSummary},
             {kTrain, kValidation, kTest, kBenchmark, kCann},
             evaluation_fingerprint(config)))
    cmd_evaluate(config);
}

}  // namespace nbi
