// Copyright 2026 The tsood Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include "tsood/model.hpp"
#include "tsood/tensor.hpp"

namespace {

using namespace tsood;

void BM_Matmul(benchmark::State& state) {
  const int64_t n = state.range(0);
  Rng rng(1);
  Tensor a = Tensor::randn({n, n}, rng);
  Tensor b = Tensor::randn({n, n}, rng);
  for (auto _ : state) {
    Tensor c = matmul(a, b);
    benchmark::DoNotOptimize(c.data().data());
  }
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_Conv1d(benchmark::State& state) {
  const int64_t width = state.range(0);
  Rng rng(2);
  Tensor x = Tensor::randn({16, width, 45}, rng);
  Tensor w = Tensor::randn({width, width, 5}, rng);
  for (auto _ : state) {
    Tensor y = conv1d(x, w, Tensor(), Padding::Same);
    benchmark::DoNotOptimize(y.data().data());
  }
  state.SetItemsProcessed(state.iterations() * 16 * width * width * 45 * 5);
}
BENCHMARK(BM_Conv1d)->Arg(16)->Arg(32)->Arg(64);

void BM_ResNetForward(benchmark::State& state) {
  ModelConfig mc;
  mc.arch = Arch::ResNet1D;
  mc.in_channels = 3;
  mc.seq_len = 45;
  mc.n_classes = 8;
  mc.width = state.range(0);
  mc.seed = 3;
  auto model = Backbone::build(mc);
  Rng rng(4);
  Tensor x = Tensor::randn({16, 3, 45}, rng);
  for (auto _ : state) {
    ForwardOutputs out = model->forward(x, false);
    benchmark::DoNotOptimize(out.logits.data().data());
  }
}
BENCHMARK(BM_ResNetForward)->Arg(32)->Arg(64);

void BM_ResNetTrainStep(benchmark::State& state) {
  ModelConfig mc;
  mc.arch = Arch::ResNet1D;
  mc.in_channels = 3;
  mc.seq_len = 45;
  mc.n_classes = 8;
  mc.width = 64;
  mc.seed = 3;
  auto model = Backbone::build(mc);
  Rng rng(5);
  Tensor x = Tensor::randn({16, 3, 45}, rng);
  for (auto _ : state) {
    Tape tape;
    ForwardOutputs out = model->forward(x, true, &tape);
    Tensor loss = mean(logsumexp(out.logits));
    GradientMap grads = tape.backward(loss);
    benchmark::DoNotOptimize(&grads);
  }
}
BENCHMARK(BM_ResNetTrainStep);

}  // namespace
