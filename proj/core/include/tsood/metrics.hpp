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

#ifndef TSOOD_METRICS_HPP_
#define TSOOD_METRICS_HPP_

#include <map>
#include <span>
#include <string>
#include <vector>

#include "tsood/dataset.hpp"
#include "tsood/model.hpp"
#include "tsood/scorers.hpp"

namespace tsood {

/// Rank-based (Mann-Whitney) AUROC with midrank tie handling; labels use
/// 1 for the OOD (positive) class. Throws DataError when a class is absent.
double auroc(std::span<const double> scores, std::span<const int> labels);

/// Average precision over descending-score thresholds with ties grouped;
/// the positive class is OOD.
double aupr(std::span<const double> scores, std::span<const int> labels);

/// Pearson correlation; throws DataError on zero variance or fewer than
/// two points.
double pearson_corr(std::span<const double> x, std::span<const double> y);

/// One pipeline run's summary, the unit of the correlation study.
struct RunSummary {
  std::string dataset;
  double id_accuracy = 0.0;
  std::map<std::string, double> method_auroc;
};

struct CorrelationEntry {
  std::string method;
  double pcc = 0.0;
  bool valid = false;       // false: zero variance ("n/a" cell)
  bool degenerate = false;  // exactly two runs: pcc is forced to +-1
};

/// Per-method correlation between ID accuracy and AUROC across runs.
std::vector<CorrelationEntry> correlation_study(
    const std::vector<RunSummary>& runs);

struct MethodResult {
  double auroc = 0.0;
  double aupr = 0.0;
  double mean_latency_ms = 0.0;
};

struct EvalReport {
  std::string dataset;
  std::string arch;
  std::string loss;
  uint64_t seed = 0;
  std::string config_digest;
  SplitSpec split;
  double id_accuracy = 0.0;
  std::map<std::string, MethodResult> methods;  // keyed by method name
};

std::string eval_report_to_json(const EvalReport& report);
EvalReport eval_report_from_json(const std::string& text);

struct OverheadRow {
  std::string method;
  double mean_ms = 0.0;
};

struct OverheadReport {
  std::vector<OverheadRow> rows;
  int64_t warmup = 0;
  int64_t repeats = 0;
  bool include_forward = false;
  int64_t jobs = 1;  // the benchmark is strictly single-threaded
};

/// Sequential single-sample scoring on the monotonic clock; warmup
/// iterations are excluded and the mean is over repeats x samples. The
/// shared forward pass is outside the timed region unless include_forward
/// is set.
OverheadReport overhead_benchmark(
    const std::vector<FittedScorer>& scorers, Backbone& model,
    const TimeSeriesDataset& mixture, int64_t warmup, int64_t repeats,
    bool include_forward = false);

/// scores.csv rows: sample_id, truth (id|ood), method, score, latency_ms.
void write_scores_csv(const std::string& path,
                      const std::vector<std::string>& methods,
                      const std::vector<BatchScores>& per_method,
                      std::span<const int> is_ood,
                      const std::string& header_comment);

void write_overhead_csv(const OverheadReport& report, const std::string& path,
                        const std::string& header_comment);

void write_correlation_csv(const std::vector<CorrelationEntry>& entries,
                           const std::string& path,
                           const std::string& header_comment);

}  // namespace tsood

#endif  // TSOOD_METRICS_HPP_
