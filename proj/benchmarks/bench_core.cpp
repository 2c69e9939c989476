#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "asap/asap_engine.hpp"
#include "asap/pac_harness.hpp"

using namespace asap;

namespace {

void BM_Gibbs(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<double> a(static_cast<std::size_t>(state.range(0)));
  for (auto& v : a) v = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(gibbs(a, 0.3));
}
BENCHMARK(BM_Gibbs)->Arg(2)->Arg(7)->Arg(64);

// Forward + backward of a full model on one batch, with `range(0)` live ops per edge.
void BM_ModelStep(benchmark::State& state) {
  const auto live = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const OpSet ops = default_opset(8);
  SearchModel model(2, 2, Cell(4, 8, ops, rng), rng);
  for (auto& e : model.cell().edges()) {
    while (e.live_count() > live) e.prune_at(e.live_count() - 1);
  }
  const Dataset d = make_dataset(DatasetKind::kXorGrid, 64, 2, 2, 0.05, 3);
  for (auto _ : state) {
    Graph g;
    const Var loss = g.cross_entropy(model.forward(g, d.features, 0.5), d.labels);
    g.backward(loss);
    benchmark::DoNotOptimize(loss.value().item());
  }
  state.counters["live_ops"] = static_cast<double>(model.cell().live_ops());
}
BENCHMARK(BM_ModelStep)->Arg(7)->Arg(4)->Arg(2)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_AlphaGrad(benchmark::State& state) {
  Rng rng(4);
  const OpSet ops = default_opset(8);
  std::vector<std::size_t> all(ops.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  MixedEdge e(0, 2, ops, all, 8, rng);
  Graph g;
  const Var out = e.forward(g, g.constant(Tensor({64, 8}, 0.3)), 0.7);
  g.backward(g.sum(out));
  for (auto _ : state) benchmark::DoNotOptimize(alpha_grad(e));
}
BENCHMARK(BM_AlphaGrad);

void BM_SearchEpoch(benchmark::State& state) {
  const auto [train, val] = split_half(make_dataset(DatasetKind::kXorGrid, 1000, 2, 2, 0.05, 5), 5);
  SearchConfig cfg;
  cfg.epochs = 1;
  cfg.width = 4;
  cfg.batch_size = 32;
  cfg.grace_epochs = 0;
  for (auto _ : state) benchmark::DoNotOptimize(search(cfg, train, val).trace.epochs.size());
}
BENCHMARK(BM_SearchEpoch)->Unit(benchmark::kMillisecond);

void BM_PacTrial(benchmark::State& state) {
  const GradientStream s = gap_stream(static_cast<std::size_t>(state.range(0)), 0.3, 1.0, NoiseLaw::kUniform, 6);
  std::uint64_t trial = 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_trial(s, trial++).steps);
}
BENCHMARK(BM_PacTrial)->Arg(2)->Arg(10)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
