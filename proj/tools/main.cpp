// Command line front end for the interaction discovery pipeline.
//
// Every subcommand reads an optional JSON config, applies flag overrides on
// top, then runs one pipeline stage against the output directory.  Exit
// codes: 0 on success, 1 when a stage fails, 2 for usage errors.

#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nbi/pipeline.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string output_dir;
};

// Flags shared by every subcommand.
void add_common(CLI::App* sub, CommonFlags& flags) {
  sub->add_option("--config", flags.config_path,
                  "JSON configuration file to start from");
  sub->add_option("--out", flags.output_dir,
                  "Output directory for pipeline artifacts");
}

nbi::RunConfig base_config(const CommonFlags& flags) {
  nbi::RunConfig config = flags.config_path.empty()
                              ? nbi::default_run_config()
                              : nbi::load_run_config(flags.config_path);
  if (!flags.output_dir.empty()) config.output_dir = flags.output_dir;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finds the next pairwise interaction a Poisson benchmark "
               "model is missing"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::function<void(nbi::RunConfig&)> tweak = [](nbi::RunConfig&) {};
  std::function<void(const nbi::RunConfig&)> stage;

  // generate
  {
    auto* sub = app.add_subcommand(
        "generate", "Simulate a synthetic portfolio and split it");
    add_common(sub, flags);
    auto rows = std::make_shared<std::int64_t>(0);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto split_seed = std::make_shared<std::uint64_t>(0);
    auto clamp = std::make_shared<bool>(true);
    auto* rows_opt = sub->add_option("--n", *rows, "Number of rows");
    auto* seed_opt = sub->add_option("--seed", *seed, "Simulation seed");
    auto* split_opt =
        sub->add_option("--split-seed", *split_seed, "Row shuffle seed");
    auto* clamp_opt = sub->add_flag("--clamp,!--no-clamp", *clamp,
                                    "Cap the simulated rate at one");
    sub->callback([=, &tweak, &stage] {
      tweak = [=](nbi::RunConfig& config) {
        if (rows_opt->count() > 0)
          config.synthetic_rows = static_cast<std::size_t>(
              std::max<std::int64_t>(*rows, 0));
        if (rows_opt->count() > 0 && *rows < 1)
          throw CLI::ValidationError("--n", "must be at least 1");
        if (seed_opt->count() > 0) config.synthetic_seed = *seed;
        if (split_opt->count() > 0) config.split_seed = *split_seed;
        if (clamp_opt->count() > 0) config.synthetic_clamp = *clamp;
      };
      stage = nbi::cmd_generate;
    });
  }

  // ingest
  {
    auto* sub = app.add_subcommand(
        "ingest", "Load an external claims CSV and split it");
    add_common(sub, flags);
    auto data = std::make_shared<std::string>();
    auto schema = std::make_shared<std::string>();
    auto split_seed = std::make_shared<std::uint64_t>(0);
    auto* data_opt =
        sub->add_option("--data", *data, "CSV file with claim rows");
    auto* schema_opt =
        sub->add_option("--schema", *schema, "Feature schema JSON");
    auto* split_opt =
        sub->add_option("--split-seed", *split_seed, "Row shuffle seed");
    sub->callback([=, &tweak, &stage] {
      tweak = [=](nbi::RunConfig& config) {
        if (data_opt->count() > 0) config.data_csv = *data;
        if (schema_opt->count() > 0) config.schema_json = *schema;
        if (split_opt->count() > 0) config.split_seed = *split_seed;
      };
      stage = nbi::cmd_ingest;
    });
  }

  // fit-benchmark
  {
    auto* sub = app.add_subcommand(
        "fit-benchmark", "Fit the Poisson GLM benchmark on train+validation");
    add_common(sub, flags);
    auto terms = std::make_shared<std::vector<std::string>>();
    auto* terms_opt = sub->add_option(
        "--term", *terms, "Model term, repeatable (e.g. x_2^2, x_9)");
    sub->callback([=, &tweak, &stage] {
      tweak = [=](nbi::RunConfig& config) {
        if (terms_opt->count() > 0) config.benchmark_terms = *terms;
      };
      stage = nbi::cmd_fit_benchmark;
    });
  }

  // tune
  {
    auto* sub = app.add_subcommand(
        "tune", "Search network hyperparameters (grid or GA)");
    add_common(sub, flags);
    auto mode = std::make_shared<std::string>();
    auto seed = std::make_shared<std::uint64_t>(0);
    auto* mode_opt =
        sub->add_option("--mode", *mode, "Search strategy: grid or ga")
            ->check(CLI::IsMember({"grid", "ga"}));
    auto* seed_opt = sub->add_option("--seed", *seed, "Search seed");
    sub->callback([=, &tweak, &stage] {
      tweak = [=](nbi::RunConfig& config) {
        if (mode_opt->count() > 0) config.tune_mode = *mode;
        if (seed_opt->count() > 0) config.grid_seed = *seed;
      };
      stage = nbi::cmd_tune;
    });
  }

  // train-cann
  {
    auto* sub = app.add_subcommand(
        "train-cann", "Boost the benchmark with a neural adjustment");
    add_common(sub, flags);
    auto epochs = std::make_shared<int>(0);
    auto batch = std::make_shared<int>(0);
    auto lr = std::make_shared<double>(0.0);
    auto dropout = std::make_shared<double>(0.0);
    auto patience = std::make_shared<int>(0);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto activation = std::make_shared<std::string>();
    auto hidden = std::make_shared<std::vector<int>>();
    auto embedding = std::make_shared<int>(0);
    auto* epochs_opt = sub->add_option("--epochs", *epochs, "Epoch cap");
    auto* batch_opt = sub->add_option("--batch", *batch, "Minibatch size");
    auto* lr_opt = sub->add_option("--lr", *lr, "RMSProp learning rate");
    auto* dropout_opt =
        sub->add_option("--dropout", *dropout, "Hidden layer dropout rate");
    auto* patience_opt =
        sub->add_option("--patience", *patience, "Early stopping patience");
    auto* seed_opt = sub->add_option("--seed", *seed, "Training seed");
    auto* act_opt = sub->add_option("--activation", *activation,
                                    "Hidden activation: lrelu|sigmoid|tanh");
    auto* hidden_opt =
        sub->add_option("--hidden", *hidden, "Hidden layer widths");
    auto* embed_opt = sub->add_option("--embedding-dim", *embedding,
                                      "Embedding width for large factors");
    sub->callback([=, &tweak, &stage] {
      tweak = [=](nbi::RunConfig& config) {
        if (epochs_opt->count() > 0) config.train.max_epochs = *epochs;
        if (batch_opt->count() > 0) config.train.batch_size = *batch;
        if (lr_opt->count() > 0) config.train.learning_rate = *lr;
        if (dropout_opt->count() > 0) config.train.dropout_rate = *dropout;
        if (patience_opt->count() > 0) config.train.patience = *patience;
        if (seed_opt->count() > 0) config.train.seed = *seed;
        if (act_opt->count() > 0) config.activation = *activation;
        if (hidden_opt->count() > 0) config.hidden_sizes = *hidden;
        if (embed_opt->count() > 0) config.embedding_dim = *embedding;
      };
      stage = nbi::cmd_train_cann;
    });
  }

  // detect
  {
    auto* sub = app.add_subcommand(
        "detect", "Rank candidate interactions from the trained network");
    add_common(sub, flags);
    auto surrogate = std::make_shared<std::string>();
    auto aggregation = std::make_shared<std::string>();
    auto top_k = std::make_shared<int>(0);
    auto* sur_opt = sub->add_option("--surrogate", *surrogate,
                                    "Pair strength surrogate: min|harmonic");
    auto* agg_opt = sub->add_option(
        "--aggregation", *aggregation,
        "Input-to-feature aggregation: min|mean|max");
    auto* top_opt =
        sub->add_option("--top-k", *top_k, "Number of pairs to keep");
    sub->callback([=, &tweak, &stage] {
      tweak = [=](nbi::RunConfig& config) {
        if (sur_opt->count() > 0) config.surrogate = *surrogate;
        if (agg_opt->count() > 0) config.aggregation = *aggregation;
        if (top_opt->count() > 0) config.top_k = *top_k;
      };
      stage = nbi::cmd_detect;
    });
  }

  // recommend
  {
    auto* sub = app.add_subcommand(
        "recommend", "Pick the best interaction term via small GLM refits");
    add_common(sub, flags);
    auto kpi = std::make_shared<std::string>();
    auto powers = std::make_shared<std::vector<int>>();
    auto binned = std::make_shared<bool>(false);
    auto clustered = std::make_shared<bool>(false);
    auto bins = std::make_shared<int>(0);
    auto* kpi_opt = sub->add_option(
        "--kpi", *kpi, "Ranking criterion: aic|bic|deviance");
    auto* powers_opt =
        sub->add_option("--powers", *powers, "Power grid for numeric pairs");
    auto* binned_opt = sub->add_flag("--binned,!--no-binned", *binned,
                                     "Also try quantile-binned variants");
    auto* clustered_opt =
        sub->add_flag("--clustered,!--no-clustered", *clustered,
                      "Also try embedding-clustered variants");
    auto* bins_opt =
        sub->add_option("--bins", *bins, "Bin count for binned variants");
    sub->callback([=, &tweak, &stage] {
      tweak = [=](nbi::RunConfig& config) {
        if (kpi_opt->count() > 0) config.forms.kpi = nbi::kpi_from_name(*kpi);
        if (powers_opt->count() > 0) config.forms.powers = *powers;
        if (binned_opt->count() > 0) config.forms.include_binned = *binned;
        if (clustered_opt->count() > 0)
          config.forms.include_clustered = *clustered;
        if (bins_opt->count() > 0) config.forms.bin_count = *bins;
      };
      stage = nbi::cmd_recommend;
    });
  }

  // evaluate
  {
    auto* sub = app.add_subcommand(
        "evaluate", "Compare boosted and benchmark models with lift tables");
    add_common(sub, flags);
    auto bins = std::make_shared<int>(0);
    auto* bins_opt =
        sub->add_option("--quantile-bins", *bins, "Quantile bin count");
    sub->callback([=, &tweak, &stage] {
      tweak = [=](nbi::RunConfig& config) {
        if (bins_opt->count() > 0) config.quantile_bins = *bins;
      };
      stage = nbi::cmd_evaluate;
    });
  }

  // run-all
  {
    auto* sub = app.add_subcommand(
        "run-all", "Run every stage in order, skipping fresh ones");
    add_common(sub, flags);
    auto rows = std::make_shared<std::int64_t>(0);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto tune = std::make_shared<std::string>();
    auto* rows_opt = sub->add_option("--n", *rows, "Synthetic row count");
    auto* seed_opt = sub->add_option("--seed", *seed, "Simulation seed");
    auto* tune_opt =
        sub->add_option("--tune", *tune, "Tuning mode: none|grid|ga")
            ->check(CLI::IsMember({"none", "grid", "ga"}));
    sub->callback([=, &tweak, &stage] {
      tweak = [=](nbi::RunConfig& config) {
        if (rows_opt->count() > 0) {
          if (*rows < 1) throw CLI::ValidationError("--n", "must be at least 1");
          config.synthetic_rows = static_cast<std::size_t>(*rows);
        }
        if (seed_opt->count() > 0) config.synthetic_seed = *seed;
        if (tune_opt->count() > 0) config.tune_mode = *tune;
      };
      stage = nbi::cmd_run_all;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    nbi::RunConfig config = base_config(flags);
    tweak(config);
    stage(config);
    return 0;
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
