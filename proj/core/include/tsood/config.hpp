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

#ifndef TSOOD_CONFIG_HPP_
#define TSOOD_CONFIG_HPP_

#include <optional>
#include <string>
#include <vector>

#include "tsood/augment.hpp"
#include "tsood/dataset.hpp"
#include "tsood/model.hpp"
#include "tsood/scorers.hpp"
#include "tsood/train.hpp"

namespace tsood {

struct DatasetConfig {
  std::string name;
  // exactly one source: synthetic spec or a pair of .ts paths
  std::optional<SyntheticConfig> synthetic;
  int64_t synthetic_test_per_class = 0;  // 0: same as train
  std::string train_path;
  std::string test_path;
};

/// One fully-specified run: a single config file determines everything.
struct PipelineConfig {
  DatasetConfig dataset;
  Arch arch = Arch::ResNet1D;
  int64_t width = 64;
  LossKind loss = LossKind::CE;
  AugmentationSpec augmentation;
  bool augment_ce = false;
  TrainConfig train;
  std::vector<ScorerSpec> scorers;
  uint64_t seed = 1;
  std::string out_dir = "out";

  bool record_latency = true;
  bool include_forward = false;
  int64_t bench_warmup = 20;
  int64_t bench_repeats = 100;

  std::string config_digest;  // over the canonicalized source text
};

/// Matrix sweep: the cartesian product of the lists, sharing the scalar
/// settings of the base config.
struct MatrixConfig {
  std::vector<DatasetConfig> datasets;
  std::vector<Arch> archs;
  std::vector<LossKind> losses;
  std::vector<AugmentationSpec> augmentations;
  std::vector<uint64_t> seeds;
  PipelineConfig base;
  std::string out_dir = "out";
};

/// Parses the JSON config file. Overrides, when given, replace out_dir and
/// seed before the digest is computed. Throws ConfigError naming the bad
/// key.
PipelineConfig load_pipeline_config(const std::string& path,
                                    const std::optional<std::string>& out_dir,
                                    const std::optional<uint64_t>& seed);

MatrixConfig load_matrix_config(const std::string& path,
                                const std::optional<std::string>& out_dir,
                                const std::optional<uint64_t>& seed);

/// Digest used to stamp every output file: fnv1a over the canonical
/// (key-sorted) JSON dump plus the effective seed.
std::string config_digest_of(const std::string& canonical_json,
                             uint64_t seed);

}  // namespace tsood

#endif  // TSOOD_CONFIG_HPP_
