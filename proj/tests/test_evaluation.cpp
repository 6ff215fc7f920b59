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

#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "tsood/metrics.hpp"

using namespace tsood;
using tsood::testing::auroc_pair_oracle;

TEST_CASE("auroc: perfect separation scores 1") {
  std::vector<double> s = {0.1, 0.9};
  std::vector<int> l = {0, 1};
  CHECK(auroc(s, l) == 1.0);
}

TEST_CASE("auroc: all ties score 0.5") {
  std::vector<double> s = {0.4, 0.4, 0.4, 0.4};
  std::vector<int> l = {0, 1, 0, 1};
  CHECK(auroc(s, l) == 0.5);
}

TEST_CASE("auroc: hand-counted pair fixture scores 0.75") {
  std::vector<double> s = {0.2, 0.8, 0.7, 0.6};
  std::vector<int> l = {0, 1, 0, 1};
  CHECK(auroc(s, l) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("auroc equals the O(n^2) pair-counting oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int64_t n = 2 + rng.randint(499);
    std::vector<double> s;
    std::vector<int> l;
    bool has_pos = false, has_neg = false;
    for (int64_t i = 0; i < n; ++i) {
      // coarse quantization forces plenty of ties
      s.push_back(std::round(rng.uniform(0.0, 1.0) * 8.0) / 8.0);
      l.push_back(int(rng.uniform() < 0.4));
      has_pos |= l.back() == 1;
      has_neg |= l.back() == 0;
    }
    if (!has_pos || !has_neg) continue;
    CHECK(std::fabs(auroc(s, l) - auroc_pair_oracle(s, l)) <= 1e-12);
  }
}

TEST_CASE("auroc rank symmetry: negating scores flips around 0.5") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s;
    std::vector<int> l = {0, 1};
    s.push_back(rng.normal());
    s.push_back(rng.normal());
    for (int i = 0; i < 40; ++i) {
      s.push_back(std::round(rng.normal() * 4.0) / 4.0);
      l.push_back(int(rng.uniform() < 0.5));
    }
    std::vector<double> neg(s.size());
    for (size_t i = 0; i < s.size(); ++i) neg[i] = -s[i];
    CHECK(auroc(s, l) + auroc(neg, l) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("auroc and aupr are invariant under monotone transforms") {
  Rng rng(7);
  std::vector<double> s;
  std::vector<int> l;
  for (int i = 0; i < 100; ++i) {
    s.push_back(rng.uniform(-2.0, 2.0));
    l.push_back(int(rng.uniform() < 0.5));
  }
  l[0] = 0;
  l[1] = 1;
  std::vector<double> warped(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    warped[i] = std::exp(0.7 * s[i]) + 3.0;  // strictly increasing
  }
  CHECK(auroc(s, l) == doctest::Approx(auroc(warped, l)).epsilon(1e-12));
  CHECK(aupr(s, l) == doctest::Approx(aupr(warped, l)).epsilon(1e-12));
}

TEST_CASE("auroc requires both classes") {
  std::vector<double> s = {0.1, 0.2};
  std::vector<int> l = {1, 1};
  CHECK_THROWS_AS((void)auroc(s, l), DataError);
  CHECK_THROWS_AS((void)aupr(std::vector<double>{0.1},
                             std::vector<int>{0}),
                  DataError);
}

TEST_CASE("aupr: perfect ranking scores 1") {
  std::vector<double> s = {0.9, 0.8, 0.2, 0.1};
  std::vector<int> l = {1, 1, 0, 0};
  CHECK(aupr(s, l) == doctest::Approx(1.0));
}

TEST_CASE("aupr: three-sample fixture scores (1 + 2/3)/2") {
  std::vector<double> s = {0.9, 0.8, 0.7};
  std::vector<int> l = {1, 0, 1};
  CHECK(aupr(s, l) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-12));
  CHECK(aupr(s, l) == doctest::Approx(0.8333333).epsilon(1e-6));
}

TEST_CASE("aupr: random scores on balanced labels sit near prevalence") {
  Rng rng(9);
  std::vector<double> s;
  std::vector<int> l;
  for (int i = 0; i < 1000; ++i) {
    s.push_back(rng.uniform(0.0, 1.0));
    l.push_back(i % 2);
  }
  const double ap = aupr(s, l);
  CHECK(ap > 0.4);
  CHECK(ap < 0.6);
}

TEST_CASE("pearson: exact linear relations") {
  std::vector<double> x = {1, 2, 3, 4};
  std::vector<double> y = {2, 4, 6, 8};
  CHECK(pearson_corr(x, y) == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> z = {-1, -2, -3, -4};
  CHECK(pearson_corr(x, z) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("pearson: hand-computed 0.5 fixture") {
  std::vector<double> x = {1, 2, 3};
  std::vector<double> y = {1, 3, 2};
  CHECK(pearson_corr(x, y) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("pearson rejects zero variance") {
  std::vector<double> x = {1, 1, 1};
  std::vector<double> y = {1, 2, 3};
  CHECK_THROWS_AS((void)pearson_corr(x, y), DataError);
}

TEST_CASE("correlation study: planted linear relation recovers 1.0") {
  std::vector<RunSummary> runs;
  for (int i = 0; i < 5; ++i) {
    RunSummary r;
    r.dataset = "d" + std::to_string(i);
    r.id_accuracy = 0.5 + 0.08 * i;
    r.method_auroc["msp"] = 0.4 + 0.1 * i;             // linear in accuracy
    r.method_auroc["ebo"] = 0.9 - 0.05 * i;            // anti-linear
    r.method_auroc["mds"] = 0.7;                       // constant: n/a
    runs.push_back(r);
  }
  auto entries = correlation_study(runs);
  REQUIRE(entries.size() == 3);
  for (const auto& e : entries) {
    CHECK(!e.degenerate);
    if (e.method == "msp") {
      CHECK(e.valid);
      CHECK(e.pcc == doctest::Approx(1.0).epsilon(1e-9));
    } else if (e.method == "ebo") {
      CHECK(e.valid);
      CHECK(e.pcc == doctest::Approx(-1.0).epsilon(1e-9));
    } else {
      CHECK(!e.valid);  // zero variance cell
    }
  }
}

TEST_CASE("correlation study: two runs are flagged degenerate") {
  std::vector<RunSummary> runs(2);
  runs[0].dataset = "a";
  runs[0].id_accuracy = 0.6;
  runs[0].method_auroc["msp"] = 0.5;
  runs[1].dataset = "b";
  runs[1].id_accuracy = 0.8;
  runs[1].method_auroc["msp"] = 0.7;
  auto entries = correlation_study(runs);
  REQUIRE(entries.size() == 1);
  CHECK(entries[0].degenerate);
  CHECK(entries[0].valid);
  CHECK(std::fabs(std::fabs(entries[0].pcc) - 1.0) < 1e-9);
}

TEST_CASE("correlation study needs two runs") {
  std::vector<RunSummary> runs(1);
  CHECK_THROWS_AS((void)correlation_study(runs), DataError);
}

TEST_CASE("eval report json round trip") {
  EvalReport report;
  report.dataset = "toy";
  report.arch = "resnet1d";
  report.loss = "ce";
  report.seed = 42;
  report.config_digest = "deadbeef01020304";
  report.split.id_classes = {0, 1};
  report.split.ood_classes = {2, 3};
  report.split.seed = 7;
  report.id_accuracy = 0.9375;
  report.methods["msp"] = {0.75, 0.6875, 0.12};
  report.methods["dfm-pca"] = {0.96875, 0.953125, 0.03};
  const std::string text = eval_report_to_json(report);
  EvalReport back = eval_report_from_json(text);
  CHECK(back.dataset == report.dataset);
  CHECK(back.id_accuracy == report.id_accuracy);
  CHECK(back.methods.at("msp").auroc == 0.75);
  CHECK(back.methods.at("dfm-pca").aupr == 0.953125);
  CHECK(back.split.id_classes == report.split.id_classes);
  // identical reports serialize byte-identically
  CHECK(eval_report_to_json(back) == text);
}

TEST_CASE("overhead benchmark produces one positive row per method") {
  ModelConfig mc;
  mc.arch = Arch::ResNet1D;
  mc.in_channels = 2;
  mc.seq_len = 12;
  mc.n_classes = 2;
  mc.width = 4;
  mc.seed = 3;
  auto model = Backbone::build(mc);
  SyntheticConfig sc;
  sc.classes = 2;
  sc.n_per_class = 4;
  sc.d = 2;
  sc.L = 12;
  sc.seed = 5;
  TimeSeriesDataset mixture = generate_synthetic(sc);

  std::vector<FittedScorer> scorers;
  for (Method m : {Method::MSP, Method::EBO, Method::MDS}) {
    ScorerSpec spec;
    spec.method = m;
    scorers.push_back(fit_scorer(spec, *model, mixture));
  }
  OverheadReport report = overhead_benchmark(scorers, *model, mixture, 2, 3);
  REQUIRE(report.rows.size() == 3);
  for (const auto& row : report.rows) CHECK(row.mean_ms > 0.0);
  CHECK(report.jobs == 1);

  // two invocations agree within 3x per method
  OverheadReport again = overhead_benchmark(scorers, *model, mixture, 2, 3);
  for (size_t i = 0; i < report.rows.size(); ++i) {
    const double ratio = report.rows[i].mean_ms / again.rows[i].mean_ms;
    CHECK(ratio > 1.0 / 3.0);
    CHECK(ratio < 3.0);
  }

  // repeats=1 vs repeats=10 stay within the same order of magnitude
  OverheadReport r1 = overhead_benchmark(scorers, *model, mixture, 2, 1);
  OverheadReport r10 = overhead_benchmark(scorers, *model, mixture, 2, 10);
  for (size_t i = 0; i < r1.rows.size(); ++i) {
    const double ratio = r1.rows[i].mean_ms / r10.rows[i].mean_ms;
    CHECK(ratio > 0.1);
    CHECK(ratio < 10.0);
  }
}
