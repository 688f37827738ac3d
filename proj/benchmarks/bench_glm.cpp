#include <benchmark/benchmark.h>

#include "nbi/glm.hpp"
#include "nbi/synthetic.hpp"

namespace {

// Fitting cost of the stock benchmark model at a few portfolio sizes.
void BM_FitBenchmarkGlm(benchmark::State& state) {
  const nbi::Dataset data =
      nbi::generate_synthetic(static_cast<std::size_t>(state.range(0)), 3);
  std::vector<nbi::TermSpec> terms;
  for (const char* name :
       {"intercept", "x_1", "x_2^2", "x_3", "x_3^2", "x_9", "x_10"})
    terms.push_back(nbi::parse_term(name, data.schema));
  const nbi::Offset offset = nbi::log_exposure_offset(data);

  for (auto _ : state) {
    const nbi::GlmModel model = nbi::fit_poisson(data, terms, offset);
    benchmark::DoNotOptimize(model.beta);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_GlmPredict(benchmark::State& state) {
  const nbi::Dataset data =
      nbi::generate_synthetic(static_cast<std::size_t>(state.range(0)), 3);
  std::vector<nbi::TermSpec> terms;
  for (const char* name : {"intercept", "x_1", "x_2^2", "x_9"})
    terms.push_back(nbi::parse_term(name, data.schema));
  const nbi::Offset offset = nbi::log_exposure_offset(data);
  const nbi::GlmModel model = nbi::fit_poisson(data, terms, offset);

  for (auto _ : state) {
    const auto expected = nbi::predict(model, data, offset);
    benchmark::DoNotOptimize(expected.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_FitBenchmarkGlm)->Arg(10000)->Arg(50000)
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GlmPredict)->Arg(50000)->Unit(benchmark::kMillisecond);
