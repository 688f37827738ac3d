#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "nbi/cann.hpp"

namespace nbi {

// Candidate lists for the five tuned hyper-parameters.  A genotype indexes
// into these lists, gene order as declared here.
struct HyperGrid {
  std::vector<Activation> activations{Activation::lrelu, Activation::sigmoid,
                                      Activation::tanh_act};
  std::vector<double> dropout_rates{0.05};
  std::vector<double> learning_rates{4e-3};
  std::vector<int> embedding_dims{2};
  std::vector<std::vector<int>> hidden_layouts{{20, 15, 10}};

  static constexpr int gene_count = 5;
  std::array<int, gene_count> choices_per_gene() const;
  std::size_t size() const;  // Cartesian product size
  void validate() const;
};

struct Genotype {
  std::array<int, HyperGrid::gene_count> genes{};
  bool operator==(const Genotype&) const = default;
};

// Architecture and training config for one genotype, based on a template
// config (seed, batch size etc. come from the template).
std::pair<NnArchitecture, TrainConfig> decode_genotype(
    const HyperGrid& grid, const Genotype& genotype,
    const NnArchitecture& base_architecture, const TrainConfig& base_config);

std::string genotype_label(const HyperGrid& grid, const Genotype& genotype);

// Outcome of evaluating one candidate: a fitness to minimize plus any
// side KPIs worth reporting (e.g. mae_lift values).
struct EvalOutcome {
  double fitness = 0.0;
  std::map<std::string, double> kpis;
  bool failed = false;
  std::string error;
};

// Candidate evaluator.  The tuner derives a per-call seed so repeated
// evaluations are reproducible; NN-backed evaluators should train with it.
using EvalFn =
    std::function<EvalOutcome(const Genotype&, std::uint64_t seed)>;

struct LeaderboardRow {
  Genotype genotype;
  std::uint64_t seed = 0;
  EvalOutcome outcome;
};

struct GridSearchResult {
  std::vector<LeaderboardRow> leaderboard;  // best first, failures last
  int best = -1;                            // index into leaderboard

  const LeaderboardRow& best_row() const;
};

// Evaluates every point of the Cartesian grid with a seed derived from
// base_seed and the point's flat index.  Throws only if every point fails.
GridSearchResult grid_search(const HyperGrid& grid, const EvalFn& evaluate,
                             std::uint64_t base_seed);

struct GaConfig {
  int population_size = 20;
  int max_generations = 200;
  double mutation_rate = 0.1;
  bool elitism = true;  // offspring replaces the worst only if strictly fitter
  int stall_patience = 50;  // generations without a new best before stopping
  std::uint64_t seed = 0;
};

struct GaGenerationLog {
  int generation = 0;
  double best_fitness = 0.0;
  double offspring_fitness = 0.0;
  bool replaced = false;
};

struct GaSearchResult {
  LeaderboardRow best;
  std::vector<GaGenerationLog> generations;
  std::vector<LeaderboardRow> evaluations;  // every evaluation, in order
};

// Steady-state genetic algorithm: each generation crosses the two fittest
// genotypes gene-wise, mutates genes to random alternatives with probability
// mutation_rate, and the offspring replaces the worst individual iff fitter.
GaSearchResult ga_search(const HyperGrid& grid, const GaConfig& config,
                         const EvalFn& evaluate);

// Library-provided evaluator: trains a CANN for the genotype and returns
// validation mean deviance as fitness, with test-split mae_lift KPIs
// attached.  The referenced data, benchmark and grid must outlive the
// returned function.
EvalFn make_cann_evaluator(const SplitDataset& data, const GlmModel& benchmark,
                           const HyperGrid& grid,
                           const NnArchitecture& base_architecture,
                           const TrainConfig& base_config);

void write_leaderboard_csv(const HyperGrid& grid,
                           const std::vector<LeaderboardRow>& rows,
                           const std::filesystem::path& path);
void write_generation_csv(const std::vector<GaGenerationLog>& generations,
                          const std::filesystem::path& path);

}  // namespace nbi
