#include <benchmark/benchmark.h>

#include "general/bellwether.hpp"
#include "general/kernels.hpp"
#include "general/synth.hpp"

using namespace general;

namespace {

const synth::Corpus& corpus() {
  static const synth::Corpus c = [] {
    synth::DefectCorpusSpec spec;
    spec.groups = 1;
    spec.projects_per_group = 8;
    spec.rows = 400;
    spec.seed = 1;
    return synth::defect_corpus(spec);
  }();
  return c;
}

template <bool Parallel>
void BM_FitTrees(benchmark::State& state) {
  const ProjectTable& t = corpus().projects.front();
  ForestParams params;
  params.n_trees = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto trees = Parallel ? kernels::fit_trees_parallel(t.rows, t.labels, TreeMode::gini_classify, params, 7)
                          : kernels::fit_trees_serial(t.rows, t.labels, TreeMode::gini_classify, params, 7);
    benchmark::DoNotOptimize(trees);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <Execution Exec>
void BM_Tournament(benchmark::State& state) {
  std::vector<const ProjectTable*> candidates;
  for (const auto& p : corpus().projects) candidates.push_back(&p);
  Pipeline pipeline = Pipeline::defaults(Task::classification);
  pipeline.forest.n_trees = 20;
  // Models are trained once; the benchmark measures the scoring round-robin.
  ModelBank bank(pipeline, 3);
  for (const auto* c : candidates) bank.get(*c);
  for (auto _ : state) {
    auto r = tournament(candidates, bank, Exec);
    benchmark::DoNotOptimize(r);
  }
}

}  // namespace

BENCHMARK(BM_FitTrees<false>)->Name("fit_trees/serial")->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FitTrees<true>)->Name("fit_trees/parallel")->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Tournament<Execution::serial>)->Name("tournament/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Tournament<Execution::parallel>)->Name("tournament/parallel")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
