// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "aad/aggregation.hpp"
#include "aad/metrics.hpp"
#include "aad/ops.hpp"
#include "aad/phantom.hpp"
#include "aad/rng.hpp"
#include "aad/training.hpp"

namespace {

using namespace aad;

nn::Tensor<float> random_tensor(std::vector<int> shape, std::uint64_t seed) {
  Rng rng(seed);
  nn::Tensor<float> t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform(-1, 1));
  return t;
}

void BM_Conv3x3(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int hw = static_cast<int>(state.range(1));
  const auto x = random_tensor({4, c, hw, hw}, 1);
  const auto w = random_tensor({c, c, 3, 3}, 2);
  const auto b = random_tensor({c}, 3);
  for (auto _ : state) {
    nn::Graph<float> g;
    const nn::Var xv = g.leaf(x);
    const nn::Var y = nn::conv2d(g, xv, g.leaf(w), g.leaf(b), 1, 1);
    g.backward(nn::mean_square(g, y));
    benchmark::DoNotOptimize(g.grad(xv).data());
  }
  state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_Conv3x3)->Args({16, 64})->Args({64, 16})->Unit(benchmark::kMillisecond);

void BM_GeneratorForward(benchmark::State& state) {
  gen::GeneratorConfig cfg;
  cfg.arch = static_cast<gen::Arch>(state.range(0));
  const auto params = gen::build_generator(cfg, 1);
  const auto x = random_tensor({1, 3, 64, 64}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(gen::generator_forward(cfg, params, x).data());
  state.SetLabel(std::string(gen::to_string(cfg.arch)));
}
BENCHMARK(BM_GeneratorForward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  train::TrainConfig cfg;
  std::vector<data::MultimodalSample> batch;
  for (int i = 0; i < cfg.batch_size; ++i) {
    batch.push_back(data::generate_phantom_sample(1, data::Split::train, i, {64, 64, 24, 24}));
  }
  std::vector<const data::MultimodalSample*> ptrs;
  for (const auto& s : batch) ptrs.push_back(&s);
  train::TrainState st = train::TrainState::initialize(cfg);
  for (auto _ : state) benchmark::DoNotOptimize(train::train_step(st, ptrs, cfg).g_total);
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
  const auto a = data::generate_phantom_sample(1, data::Split::val, 0, {64, 64, 24, 24});
  const auto b = data::generate_phantom_sample(1, data::Split::val, 1, {64, 64, 24, 24});
  for (auto _ : state) benchmark::DoNotOptimize(metrics::ssim(a.y_early, b.y_early));
}
BENCHMARK(BM_Ssim)->Unit(benchmark::kMicrosecond);

void BM_AggregateEmbed(benchmark::State& state) {
  ad::AttentionMap g(32, 32, 0.3f);
  ad::AttentionMap l(12, 12, 0.7f);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        agg::aggregate_attention(g, l, {20, 20, 24, 24}, 64, 64, agg::EnsembleMode::embed).values.data());
  }
}
BENCHMARK(BM_AggregateEmbed)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
