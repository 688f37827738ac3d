#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nbi/cann.hpp"
#include "nbi/selection.hpp"
#include "nbi/tuning.hpp"

namespace nbi {

// Full description of a pipeline run.  Loadable from a sectioned JSON file;
// command-line flags override individual fields.
struct RunConfig {
  std::filesystem::path output_dir = "nbi-out";

  // data: either synthetic generation or CSV ingestion
  std::string data_csv;     // non-empty -> ingest this file
  std::string schema_json;  // schema for ingested data; empty -> synthetic
  std::size_t synthetic_rows = 200000;
  std::uint64_t synthetic_seed = 1;
  bool synthetic_clamp = true;
  std::array<double, 3> split_fractions{0.8, 0.1, 0.1};
  std::uint64_t split_seed = 1;

  // benchmark GLM
  std::vector<std::string> benchmark_terms;  // empty -> synthetic default
  IrlsOptions irls;

  // CANN
  std::vector<int> hidden_sizes{20, 15, 10};
  std::string activation = "lrelu";
  double lrelu_alpha = 0.3;
  int embedding_dim = 2;
  TrainConfig train;

  // interaction detection
  std::string surrogate = "min";
  std::string aggregation = "min";
  int top_k = 5;

  // selection
  FormsConfig forms;

  // evaluation
  int quantile_bins = 20;

  // tuning
  std::string tune_mode = "none";  // none | grid | ga
  HyperGrid grid;
  std::uint64_t grid_seed = 0;
  GaConfig ga;

  void validate() const;  // throws std::invalid_argument on bad values
};

// Reads a config file; missing keys keep their defaults.  The environment
// variable NBI_OUTPUT_DIR supplies output_dir when the file (or caller)
// does not.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig default_run_config();
void save_run_config(const RunConfig& config,
                     const std::filesystem::path& path);

FeatureSchema load_schema_json(const std::filesystem::path& path);
void save_schema_json(const FeatureSchema& schema,
                      const std::filesystem::path& path);

// Content hashes of every artifact a pipeline stage produced, plus the
// hashes of the inputs it was produced from.  Stages are re-run when any of
// these go out of date, and skipped otherwise.
struct PipelineState {
  struct Artifact {
    std::string hash;
    std::map<std::string, std::string> inputs;
  };
  std::map<std::string, Artifact> artifacts;
};
PipelineState load_pipeline_state(const std::filesystem::path& output_dir);
void save_pipeline_state(const PipelineState& state,
                         const std::filesystem::path& output_dir);

// Stage entry points.  Each loads its inputs from the output directory,
// writes its artifacts and updates the pipeline state.  They throw on
// missing prerequisites; cmd_detect additionally refuses stale inputs.
void cmd_generate(const RunConfig& config);
void cmd_ingest(const RunConfig& config);
void cmd_fit_benchmark(const RunConfig& config);
void cmd_tune(const RunConfig& config);
void cmd_train_cann(const RunConfig& config);
void cmd_detect(const RunConfig& config);
void cmd_recommend(const RunConfig& config);
void cmd_evaluate(const RunConfig& config);
// Runs every stage in order, skipping the ones whose artifacts are fresh.
void cmd_run_all(const RunConfig& config);

}  // namespace nbi
