// Copyright 2026 The n2l Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "n2l/autodiff.h"
#include "n2l/bitstream.h"
#include "n2l/model.h"
#include "n2l/noise.h"

namespace n2l {
namespace {

Tensor random_tensor(Shape s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Tensor t(s);
  for (double& v : t.data()) v = d(rng);
  return t;
}

// Args: channels in, channels out, kernel, groups, side.
void BM_Conv2dForwardBackward(benchmark::State& state) {
  const int cin = state.range(0), cout = state.range(1), k = state.range(2),
            groups = state.range(3), side = state.range(4);
  const Tensor x = random_tensor(Shape{1, cin, side, side}, 1);
  Tensor w = random_tensor(Shape{cout, cin / groups, k, k}, 2);
  Tensor b = random_tensor(Shape{1, cout, 1, 1}, 3);
  const Tensor t = random_tensor(Shape{1, cout, side, side}, 4);
  w.set_requires_grad(true);
  b.set_requires_grad(true);
  Graph g;
  for (auto _ : state) {
    g.reset();
    Var y = conv2d(g.input(x), g.leaf(w), g.leaf(b), k, groups);
    g.backward(mse_loss(y, g.input(t)));
    benchmark::DoNotOptimize(w.grad().data());
  }
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_Conv2dForwardBackward)
    ->ArgNames({"cin", "cout", "k", "groups", "side"})
    ->Args({8, 16, 1, 1, 64})    // block expand
    ->Args({56, 8, 1, 1, 64})    // GPP projection
    ->Args({8, 8, 3, 8, 64})     // depthwise
    ->Args({8, 8, 3, 1, 64})     // dense 3x3, generic path
    ->Args({8, 16, 1, 1, 256});

void BM_Gelu(benchmark::State& state) {
  const Tensor x = random_tensor(Shape{1, 16, 64, 64}, 5);
  Graph g;
  for (auto _ : state) {
    g.reset();
    benchmark::DoNotOptimize(g.value(gelu(g.input(x))).data().data());
  }
  state.SetItemsProcessed(state.iterations() * x.size());
}
BENCHMARK(BM_Gelu);

// One training step (forward + backward) of the full model.
void BM_TrainStep(benchmark::State& state) {
  const int side = state.range(1);
  const ModelConfig cfg = setting(state.range(0));
  CodecModel model = CodecModel::initialized(cfg, 0);
  model.set_requires_grad(true);
  const NoisePyramid noise = build_pyramid(Seed{0}, cfg, side, side);
  const Tensor pe = build_pe(side, side, cfg.pe_dims);
  const Tensor target = random_tensor(Shape{1, 3, side, side}, 7);
  Graph g;
  for (auto _ : state) {
    g.reset();
    model.zero_grad();
    Reconstruction r = reconstruct(g, model, g.input(noise.fused), g.input(pe));
    g.backward(mse_loss(r.image, g.input(target)));
  }
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_TrainStep)->ArgNames({"setting", "side"})->Args({0, 64})->Args({4, 64})
    ->Args({0, 256})->Unit(benchmark::kMillisecond);

// Decoder-side cost: forward pass only.
void BM_Render(benchmark::State& state) {
  const int side = state.range(1);
  const ModelConfig cfg = setting(state.range(0));
  CodecModel model = CodecModel::initialized(cfg, 0);
  const NoisePyramid noise = build_pyramid(Seed{0}, cfg, side, side);
  const Tensor pe = build_pe(side, side, cfg.pe_dims);
  for (auto _ : state) benchmark::DoNotOptimize(render(model, noise.fused, pe).data().data());
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_Render)->ArgNames({"setting", "side"})->Args({0, 256})->Args({4, 256})
    ->Unit(benchmark::kMillisecond);

void BM_ExpGolomb(benchmark::State& state) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> d(0.0, 40.0);
  std::vector<std::uint32_t> codes(16384);
  for (auto& c : codes) c = zigzag(static_cast<std::int32_t>(std::lround(d(rng))));
  const bool decode = state.range(0);
  const auto bytes = exp_golomb_encode(codes);
  for (auto _ : state) {
    if (decode) {
      benchmark::DoNotOptimize(exp_golomb_decode(bytes, codes.size()).data());
    } else {
      benchmark::DoNotOptimize(exp_golomb_encode(codes).data());
    }
  }
  state.SetItemsProcessed(state.iterations() * codes.size());
  state.SetLabel(decode ? "decode" : "encode");
}
BENCHMARK(BM_ExpGolomb)->Arg(0)->Arg(1);

void BM_NoisePyramid(benchmark::State& state) {
  const ModelConfig cfg = setting(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_pyramid(Seed{1}, cfg, 256, 256).fused.data().data());
  }
}
BENCHMARK(BM_NoisePyramid)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace n2l

BENCHMARK_MAIN();
