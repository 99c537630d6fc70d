#include "phylomemy/pipeline.hpp"
#include "synthetic.hpp"

#include <random>

#include <benchmark/benchmark.h>

namespace {

void BM_KinshipMatching(benchmark::State& state) {
    std::mt19937 rng(17);
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto groups = phylo::testing::random_groups(rng, n, 10, 300, 6);
    for (auto _ : state) {
        auto graph = phylo::build_kinship_graph(groups, 10, {});
        benchmark::DoNotOptimize(graph.links.data());
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KinshipMatching)->RangeMultiplier(2)->Range(500, 8000)->Complexity()->Unit(benchmark::kMillisecond);

void BM_SeaLevelRise(benchmark::State& state) {
    std::mt19937 rng(18);
    const auto groups = phylo::testing::random_groups(rng, static_cast<std::size_t>(state.range(0)), 10, 300, 6);
    const auto graph = phylo::build_kinship_graph(groups, 10, {});
    for (auto _ : state) {
        auto p = phylo::rise(graph, {0.5});
        benchmark::DoNotOptimize(p.tree.nodes.data());
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SeaLevelRise)->RangeMultiplier(2)->Range(500, 4000)->Complexity()->Unit(benchmark::kMillisecond);

void BM_EndToEnd(benchmark::State& state) {
    const auto dir = phylo::testing::scratch_dir("bench_end_to_end");
    phylo::testing::BulkSpec spec;
    spec.documents = static_cast<std::size_t>(state.range(0));
    const auto corpus = phylo::testing::bulk_corpus(dir, spec);
    auto cfg = phylo::testing::config_for(corpus, dir / "out.json");
    for (auto _ : state) {
        auto written = phylo::run_build(cfg);
        benchmark::DoNotOptimize(written.data());
    }
}
BENCHMARK(BM_EndToEnd)->Arg(1000)->Arg(5000)->Unit(benchmark::kSecond)->Iterations(1);

}  // namespace

BENCHMARK_MAIN();
