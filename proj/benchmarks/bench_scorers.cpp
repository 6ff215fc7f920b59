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

#include "tsood/scorers.hpp"

namespace {

using namespace tsood;

struct ScorerFixture {
  std::unique_ptr<Backbone> model;
  TimeSeriesDataset id_train;
  Tensor sample;

  ScorerFixture() {
    ModelConfig mc;
    mc.arch = Arch::ResNet1D;
    mc.in_channels = 3;
    mc.seq_len = 45;
    mc.n_classes = 4;
    mc.width = 64;
    mc.seed = 7;
    model = Backbone::build(mc);
    SyntheticConfig sc;
    sc.classes = 4;
    sc.n_per_class = 24;
    sc.d = 3;
    sc.L = 45;
    sc.seed = 9;
    id_train = generate_synthetic(sc);
    std::vector<int64_t> one = {0};
    sample = id_train.batch(one);
  }
};

ScorerFixture& fixture() {
  static ScorerFixture f;
  return f;
}

void BM_ScorePerSample(benchmark::State& state, Method method) {
  auto& f = fixture();
  ScorerSpec spec;
  spec.method = method;
  FittedScorer fitted = fit_scorer(spec, *f.model, f.id_train);
  // shared forward outside the loop, matching the scoring-only timing mode
  ForwardOutputs out = f.model->forward(f.sample, false);
  if (method == Method::ODIN) {
    for (auto _ : state) {
      const double s = score_sample(fitted, *f.model, f.sample);
      benchmark::DoNotOptimize(s);
    }
  } else {
    for (auto _ : state) {
      const double s =
          score_from_outputs(fitted, out.prelogit.data(), out.logits.data());
      benchmark::DoNotOptimize(s);
    }
  }
}

void BM_ScoreMsp(benchmark::State& s) { BM_ScorePerSample(s, Method::MSP); }
void BM_ScoreOdin(benchmark::State& s) { BM_ScorePerSample(s, Method::ODIN); }
void BM_ScoreEbo(benchmark::State& s) { BM_ScorePerSample(s, Method::EBO); }
void BM_ScoreGradnorm(benchmark::State& s) {
  BM_ScorePerSample(s, Method::GradNorm);
}
void BM_ScoreReact(benchmark::State& s) { BM_ScorePerSample(s, Method::ReACT); }
void BM_ScoreDice(benchmark::State& s) { BM_ScorePerSample(s, Method::DICE); }
void BM_ScoreMds(benchmark::State& s) { BM_ScorePerSample(s, Method::MDS); }
void BM_ScoreDfmPca(benchmark::State& s) {
  BM_ScorePerSample(s, Method::DfmPca);
}
void BM_ScoreDfmIf(benchmark::State& s) { BM_ScorePerSample(s, Method::DfmIf); }
void BM_ScoreDfmOcsvm(benchmark::State& s) {
  BM_ScorePerSample(s, Method::DfmOcsvm);
}

BENCHMARK(BM_ScoreMsp);
BENCHMARK(BM_ScoreOdin);
BENCHMARK(BM_ScoreEbo);
BENCHMARK(BM_ScoreGradnorm);
BENCHMARK(BM_ScoreReact);
BENCHMARK(BM_ScoreDice);
BENCHMARK(BM_ScoreMds);
BENCHMARK(BM_ScoreDfmPca);
BENCHMARK(BM_ScoreDfmIf);
BENCHMARK(BM_ScoreDfmOcsvm);

}  // namespace
