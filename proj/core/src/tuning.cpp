#include "nbi/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "nbi/evaluation.hpp"
#include "nbi/text.hpp"

namespace nbi {

std::array<int, HyperGrid::gene_count> HyperGrid::choices_per_gene() const {
  return {static_cast<int>(activations.size()),
          static_cast<int>(dropout_rates.size()),
          static_cast<int>(learning_rates.size()),
          static_cast<int>(embedding_dims.size()),
          static_cast<int>(hidden_layouts.size())};
}

std::size_t HyperGrid::size() const {
  std::size_t total = 1;
  for (const int c : choices_per_gene())
    total *= static_cast<std::size_t>(c);
  return total;
}

void HyperGrid::validate() const {
  for (const int c : choices_per_gene())
    if (c < 1)
      throw std::invalid_argument("every hyper-parameter needs at least one "
                                  "candidate");
}

std::pair<NnArchitecture, TrainConfig> decode_genotype(
    const HyperGrid& grid, const Genotype& genotype,
    const NnArchitecture& base_architecture, const TrainConfig& base_config) {
  const auto choices = grid.choices_per_gene();
  for (int g = 0; g < HyperGrid::gene_count; ++g)
    if (genotype.genes[static_cast<std::size_t>(g)] < 0 ||
        genotype.genes[static_cast<std::size_t>(g)] >=
            choices[static_cast<std::size_t>(g)])
      throw std::invalid_argument("genotype gene out of range");

  NnArchitecture architecture = base_architecture;
  architecture.activation =
      grid.activations[static_cast<std::size_t>(genotype.genes[0])];
  const int dim =
      grid.embedding_dims[static_cast<std::size_t>(genotype.genes[3])];
  for (auto& embedding : architecture.embeddings) embedding.dimension = dim;
  architecture.hidden_sizes =
      grid.hidden_layouts[static_cast<std::size_t>(genotype.genes[4])];

  TrainConfig config = base_config;
  config.dropout_rate =
      grid.dropout_rates[static_cast<std::size_t>(genotype.genes[1])];
  config.learning_rate =
      grid.learning_rates[static_cast<std::size_t>(genotype.genes[2])];
  return {std::move(architecture), config};
}

std::string genotype_label(const HyperGrid& grid, const Genotype& genotype) {
  std::ostringstream out;
  out << activation_name(
             grid.activations[static_cast<std::size_t>(genotype.genes[0])])
      << "/do=" <<
      grid.dropout_rates[static_cast<std::size_t>(genotype.genes[1])]
      << "/lr=" <<
      grid.learning_rates[static_cast<std::size_t>(genotype.genes[2])]
      << "/ed=" <<
      grid.embedding_dims[static_cast<std::size_t>(genotype.genes[3])]
      << "/h=";
  const auto& layout =
      grid.hidden_layouts[static_cast<std::size_t>(genotype.genes[4])];
  for (std::size_t i = 0; i < layout.size(); ++i)
    out << (i ? "|" : "") << layout[i];
  return std::move(out).str();
}

const LeaderboardRow& GridSearchResult::best_row() const {
  if (best < 0) throw std::runtime_error("no successful grid evaluation");
  return leaderboard[static_cast<std::size_t>(best)];
}

GridSearchResult grid_search(const HyperGrid& grid, const EvalFn& evaluate,
                             std::uint64_t base_seed) {
  grid.validate();
  const auto choices = grid.choices_per_gene();

  GridSearchResult result;
  const std::size_t total = grid.size();
  for (std::size_t flat = 0; flat < total; ++flat) {
    Genotype genotype;
    std::size_t rest = flat;
    for (int g = HyperGrid::gene_count - 1; g >= 0; --g) {
      const auto c =
          static_cast<std::size_t>(choices[static_cast<std::size_t>(g)]);
      genotype.genes[static_cast<std::size_t>(g)] =
          static_cast<int>(rest % c);
      rest /= c;
    }
    LeaderboardRow row;
    row.genotype = genotype;
    row.seed = Rng::derive_seed(base_seed, flat);
    row.outcome = evaluate(genotype, row.seed);
    result.leaderboard.push_back(std::move(row));
  }

  std::stable_sort(result.leaderboard.begin(), result.leaderboard.end(),
                   [](const LeaderboardRow& a, const LeaderboardRow& b) {
                     if (a.outcome.failed != b.outcome.failed)
                       return !a.outcome.failed;
                     if (a.outcome.failed) return false;
                     return a.outcome.fitness < b.outcome.fitness;
                   });
  result.best =
      !result.leaderboard.empty() && !result.leaderboard[0].outcome.failed
          ? 0
          : -1;
  if (result.best < 0)
    throw std::runtime_error("every grid point failed to train");
  return result;
}

GaSearchResult ga_search(const HyperGrid& grid, const GaConfig& config,
                         const EvalFn& evaluate) {
  grid.validate();
  if (config.population_size < 2)
    throw std::invalid_argument("population needs at least two genotypes");
  if (!(config.mutation_rate >= 0.0 && config.mutation_rate <= 1.0))
    throw std::invalid_argument("mutation rate must lie in [0, 1]");

  const auto choices = grid.choices_per_gene();
  Rng rng(config.seed);
  std::uint64_t evaluation_counter = 0;

  GaSearchResult result;
  auto run_evaluation = [&](const Genotype& genotype) {
    LeaderboardRow row;
    row.genotype = genotype;
    row.seed = Rng::derive_seed(config.seed, evaluation_counter++);
    row.outcome = evaluate(genotype, row.seed);
    result.evaluations.push_back(row);
    return row;
  };
  auto fitness_of = [](const LeaderboardRow& row) {
    return row.outcome.failed ? std::numeric_limits<double>::infinity()
                              : row.outcome.fitness;
  };

  std::vector<LeaderboardRow> population;
  population.reserve(static_cast<std::size_t>(config.population_size));
  for (int i = 0; i < config.population_size; ++i) {
    Genotype genotype;
    for (int g = 0; g < HyperGrid::gene_count; ++g)
      genotype.genes[static_cast<std::size_t>(g)] = static_cast<int>(
          rng.uniform_int(static_cast<std::uint64_t>(
              choices[static_cast<std::size_t>(g)])));
    population.push_back(run_evaluation(genotype));
  }

  auto best_index = [&]() {
    std::size_t best = 0;
    for (std::size_t i = 1; i < population.size(); ++i)
      if (fitness_of(population[i]) < fitness_of(population[best])) best = i;
    return best;
  };
  result.best = population[best_index()];
  if (std::isinf(fitness_of(result.best)))
    throw std::runtime_error("entire initial population failed to train");

  int stall = 0;
  for (int generation = 1; generation <= config.max_generations;
       ++generation) {
    // Select the two fittest as parents.
    std::size_t first = 0;
    std::size_t second = 1;
    if (fitness_of(population[second]) < fitness_of(population[first]))
      std::swap(first, second);
    for (std::size_t i = 2; i < population.size(); ++i) {
      if (fitness_of(population[i]) < fitness_of(population[first])) {
        second = first;
        first = i;
      } else if (fitness_of(population[i]) < fitness_of(population[second])) {
        second = i;
      }
    }

    // Uniform crossover, then per-gene mutation to a random alternative.
    Genotype child;
    for (int g = 0; g < HyperGrid::gene_count; ++g) {
      const auto gu = static_cast<std::size_t>(g);
      child.genes[gu] = rng.uniform() < 0.5
                            ? population[first].genotype.genes[gu]
                            : population[second].genotype.genes[gu];
      const int c = choices[gu];
      if (c > 1 && rng.uniform() < config.mutation_rate) {
        const int shift = 1 + static_cast<int>(rng.uniform_int(
                                  static_cast<std::uint64_t>(c - 1)));
        child.genes[gu] = (child.genes[gu] + shift) % c;
      }
    }

    const LeaderboardRow offspring = run_evaluation(child);
    std::size_t worst = 0;
    for (std::size_t i = 1; i < population.size(); ++i)
      if (fitness_of(population[i]) > fitness_of(population[worst])) worst = i;

    const bool replace = !config.elitism ||
                         fitness_of(offspring) < fitness_of(population[worst]);
    if (replace) population[worst] = offspring;

    const bool improved =
        fitness_of(offspring) < fitness_of(result.best);
    if (improved) {
      result.best = offspring;
      stall = 0;
    } else {
      ++stall;
    }

    result.generations.push_back({generation, fitness_of(result.best),
                                  fitness_of(offspring), replace});
    if (stall >= config.stall_patience) break;
  }
  return result;
}

EvalFn make_cann_evaluator(const SplitDataset& data, const GlmModel& benchmark,
                           const HyperGrid& grid,
                           const NnArchitecture& base_architecture,
                           const TrainConfig& base_config) {
  return [&data, &benchmark, &grid, base_architecture, base_config](
             const Genotype& genotype, std::uint64_t seed) {
    EvalOutcome outcome;
    try {
      auto [architecture, config] =
          decode_genotype(grid, genotype, base_architecture, base_config);
      config.seed = seed;
      const CannModel model = train_cann(data, benchmark, architecture,
                                         config);

      const auto val_expected =
          cann_predict(model, data.validation, benchmark);
      outcome.fitness =
          mean_poisson_deviance(val_expected, data.validation.claims);
      outcome.kpis["val_deviance"] = outcome.fitness;

      const auto test_competitor = cann_predict(model, data.test, benchmark);
      const auto test_benchmark =
          predict(benchmark, data.test, log_exposure_offset(data.test));
      const auto pb =
          lift_report(test_competitor, test_benchmark, data.test.claims,
                      data.test.exposure, LiftBinning::predetermined);
      const auto qbb =
          lift_report(test_competitor, test_benchmark, data.test.claims,
                      data.test.exposure, LiftBinning::quantile);
      outcome.kpis["mae_lift_pb"] = pb.mae_lift_competitor;
      outcome.kpis["mae_lift_pb_benchmark"] = pb.mae_lift_benchmark;
      outcome.kpis["mae_lift_qbb"] = qbb.mae_lift_competitor;
      outcome.kpis["mae_lift_qbb_benchmark"] = qbb.mae_lift_benchmark;
    } catch (const std::exception& error) {
      outcome.failed = true;
      outcome.error = error.what();
    }
    return outcome;
  };
}

void write_leaderboard_csv(const HyperGrid& grid,
                           const std::vector<LeaderboardRow>& rows,
                           const std::filesystem::path& path) {
  std::ostringstream out;
  out << "rank,genotype,seed,fitness,failed,kpis\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    out << i + 1 << ',' << genotype_label(grid, row.genotype) << ','
        << row.seed << ',';
    if (row.outcome.failed)
      out << ",true," << row.outcome.error;
    else {
      out << format_double(row.outcome.fitness) << ",false,";
      bool first = true;
      for (const auto& [name, value] : row.outcome.kpis) {
        out << (first ? "" : ";") << name << '=' << format_double(value);
        first = false;
      }
    }
    out << '\n';
  }
  write_file(path, out.str());
}

void write_generation_csv(const std::vector<GaGenerationLog>& generations,
                          const std::filesystem::path& path) {
  std::ostringstream out;
  out << "generation,best_fitness,offspring_fitness,replaced\n";
  for (const auto& entry : generations)
    out << entry.generation << ',' << format_double(entry.best_fitness) << ','
        << format_double(entry.offspring_fitness) << ','
        << (entry.replaced ? "true" : "false") << '\n';
  write_file(path, out.str());
}

}  // namespace nbi
