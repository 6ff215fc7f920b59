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

#ifndef TSOOD_PIPELINE_HPP_
#define TSOOD_PIPELINE_HPP_

#include <string>
#include <vector>

#include "tsood/config.hpp"
#include "tsood/metrics.hpp"

namespace tsood {

/// Split + normalization with an access guard: the OOD test portion is
/// sealed until scorer fitting has been declared complete, so no fit path
/// can read it.
class EvalSession {
 public:
  EvalSession(IdOodSplit split, ChannelStats stats);

  const TimeSeriesDataset& id_train() const { return split_.id_train; }
  const TimeSeriesDataset& id_test() const { return split_.id_test; }
  const SplitSpec& spec() const { return split_.spec; }
  const ChannelStats& stats() const { return stats_; }

  void mark_scorers_fitted() { scorers_fitted_ = true; }
  bool scorers_fitted() const { return scorers_fitted_; }

  /// Throws LogicError until mark_scorers_fitted() has been called.
  const TimeSeriesDataset& ood_test() const;

 private:
  IdOodSplit split_;
  ChannelStats stats_;
  bool scorers_fitted_ = false;
};

/// Loads train/test parts from the configured source (.ts files or the
/// synthetic generator; the synthetic test part draws from an independent
/// stream).
void load_dataset_pair(const DatasetConfig& config, TimeSeriesDataset& train,
                       TimeSeriesDataset& test);

/// split + id_train-only normalization applied to all three parts
EvalSession make_session(const DatasetConfig& config, uint64_t seed);

struct TrainRunResult {
  std::string checkpoint_dir;
  TrainingMeta meta;
};

/// Split, normalize, train, write checkpoint + train_log.csv under
/// config.out_dir.
TrainRunResult run_train(const PipelineConfig& config);

struct EvalRunResult {
  EvalReport report;
  std::string results_path;
  std::string scores_path;
};

/// Fits every configured scorer on ID train, scores the 50/50 mixture,
/// writes results.json + scores.csv (and scorer_* files beside the
/// checkpoint).
EvalRunResult run_eval(const PipelineConfig& config,
                       const std::string& checkpoint_dir);

/// Table-4-shaped per-method overhead; always single-threaded regardless
/// of the requested job count.
OverheadReport run_bench(const PipelineConfig& config,
                         const std::string& checkpoint_dir,
                         int64_t requested_jobs = 1);

struct MatrixCellOutcome {
  std::string cell_id;
  std::string dataset;
  std::string arch;
  std::string loss;
  std::string augmentation;
  uint64_t seed = 0;
  bool ok = false;
  std::string error;
  EvalReport report;  // valid when ok
};

struct MatrixResult {
  std::vector<MatrixCellOutcome> cells;
  std::string summary_path;
  std::string correlation_path;  // empty when fewer than 2 datasets
  std::string failures_path;     // empty when every cell succeeded
};

/// Cartesian product of datasets x archs x losses x augmentations x seeds.
/// Cell failures are recorded and the sweep continues. jobs > 1 runs cells
/// in parallel worker threads.
MatrixResult run_matrix(const MatrixConfig& config, int64_t jobs = 1);

/// Human-readable checkpoint summary (for the `inspect` subcommand).
std::string describe_checkpoint(const std::string& checkpoint_dir);

}  // namespace tsood

#endif  // TSOOD_PIPELINE_HPP_
