// Copyright 2026 The LEAN Pruning Authors
// Licensed under the Apache License, Version 2.0

#include <benchmark/benchmark.h>

#include <random>

#include "lean/generators.hpp"
#include "lean/opnorm.hpp"
#include "lean/prune_graph.hpp"
#include "lean/pruners.hpp"

namespace {

lean::Kernel random_kernel(int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> dist;
  std::vector<float> values(static_cast<std::size_t>(k) * k);
  for (auto& v : values) v = dist(rng);
  return lean::Kernel(k, std::move(values));
}

// Args: image size n, kernel size k, stride.
void BM_OperatorNorm(benchmark::State& state) {
  lean::NormConfig cfg;
  cfg.n = static_cast<int>(state.range(0));
  const auto op = lean::make_conv(0, 0, 1, random_kernel(static_cast<int>(state.range(1)), 1),
                                  static_cast<int>(state.range(2)));
  for (auto _ : state) benchmark::DoNotOptimize(lean::operator_norm(op, cfg));
}
BENCHMARK(BM_OperatorNorm)->Args({64, 3, 1})->Args({64, 3, 2})->Args({128, 3, 1})->Args({256, 5, 2});

void BM_LongestPathChain(benchmark::State& state) {
  const auto length = static_cast<lean::NodeId>(state.range(0));
  std::vector<lean::NodeId> nodes;
  std::vector<lean::GraphEdge> edges;
  for (lean::NodeId i = 0; i <= length; ++i) nodes.push_back(i);
  for (lean::NodeId i = 0; i < length; ++i) {
    edges.push_back(lean::GraphEdge{i, i, i + 1, 1.5, true, lean::OpKind::conv, false});
  }
  const lean::PruneGraph graph(nodes, edges);
  for (auto _ : state) benchmark::DoNotOptimize(lean::longest_path(graph));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LongestPathChain)->RangeMultiplier(4)->Range(1 << 10, 1 << 18)->Unit(benchmark::kMicrosecond);

void BM_BuildGraphMsd(benchmark::State& state) {
  const auto net = lean::generate_msd(static_cast<int>(state.range(0)), 1, 1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(lean::build_graph(net, lean::NormConfig{}));
}
BENCHMARK(BM_BuildGraphMsd)->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_LeanStepMsd(benchmark::State& state) {
  const auto net = lean::generate_msd(static_cast<int>(state.range(0)), 1, 1, 1);
  lean::PruneConfig cfg;
  cfg.p_ratio = 0.1;
  for (auto _ : state) benchmark::DoNotOptimize(lean::prune_driver(net, cfg));
}
BENCHMARK(BM_LeanStepMsd)->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_ThresholdStepMsd(benchmark::State& state) {
  const auto net = lean::generate_msd(100, 1, 1, 1);
  lean::PruneConfig cfg;
  cfg.method = state.range(0) == 0 ? lean::PruneMethod::magnitude : lean::PruneMethod::opnorm;
  cfg.p_ratio = 0.1;
  for (auto _ : state) benchmark::DoNotOptimize(lean::prune_driver(net, cfg));
}
BENCHMARK(BM_ThresholdStepMsd)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
