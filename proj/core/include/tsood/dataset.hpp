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

#ifndef TSOOD_DATASET_HPP_
#define TSOOD_DATASET_HPP_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tsood/common.hpp"
#include "tsood/tensor.hpp"

namespace tsood {

/// Equal-length multivariate time-series classification data:
/// n instances, d channels, L timesteps, one class label each.
struct TimeSeriesDataset {
  std::vector<float> values;  // n*d*L row-major
  int64_t n = 0;
  int64_t d = 0;
  int64_t L = 0;
  std::vector<int> labels;               // index into class_names
  std::vector<std::string> class_names;  // declaration order
  std::string name;
  std::string split_tag;  // "train" | "test"

  std::span<const float> instance(int64_t i) const {
    return {values.data() + size_t(i * d * L), size_t(d * L)};
  }
  std::span<float> instance_mut(int64_t i) {
    return {values.data() + size_t(i * d * L), size_t(d * L)};
  }
  int64_t n_classes() const { return int64_t(class_names.size()); }

  /// Copies the selected instances into a Tensor batch (b, d, L).
  Tensor batch(std::span<const int64_t> indices) const;
  /// All instances as one (n, d, L) Tensor.
  Tensor all() const;
};

/// Parses the `.ts` text format: `#` comment lines, `@directive` header
/// lines, `@data`, then one instance per line as d colon-separated channel
/// blocks of comma-separated floats with the class name as the final field.
TimeSeriesDataset parse_ts_file(std::istream& in, const std::string& name = "");
TimeSeriesDataset parse_ts_string(const std::string& text,
                                  const std::string& name = "");
TimeSeriesDataset load_ts_file(const std::string& path);

/// Serializes back to the same grammar; parse -> serialize -> parse is an
/// identity on values and labels.
std::string to_ts_string(const TimeSeriesDataset& ds);
void save_ts_file(const TimeSeriesDataset& ds, const std::string& path);

struct SyntheticConfig {
  int64_t classes = 4;
  int64_t n_per_class = 50;
  int64_t d = 2;
  int64_t L = 32;
  double noise_sigma = 0.1;
  uint64_t seed = 1;
  std::string name = "synthetic";
  std::string split_tag = "train";
};

/// Sinusoid classes: class c runs at frequency c+1 cycles per window on
/// every channel, with a random phase per instance/channel and Gaussian
/// noise. Deterministic per seed.
TimeSeriesDataset generate_synthetic(const SyntheticConfig& config);

struct SplitSpec {
  std::vector<int> id_classes;
  std::vector<int> ood_classes;
  uint64_t seed = 0;
};

struct IdOodSplit {
  TimeSeriesDataset id_train;
  TimeSeriesDataset id_test;
  TimeSeriesDataset ood_test;
  SplitSpec spec;
};

/// First ceil(C/2) classes in declaration order are in-distribution. The
/// OOD portion of the training split is discarded.
IdOodSplit split_id_ood(const TimeSeriesDataset& train,
                        const TimeSeriesDataset& test, uint64_t seed = 0);

struct EvalMixture {
  TimeSeriesDataset instances;  // balanced blend, shuffled
  std::vector<int> is_ood;      // 0 = ID, 1 = OOD, aligned with instances
  std::vector<int64_t> source_index;  // index into the originating split
};

/// Balanced mixture: min(|id_test|, |ood_test|) from each side, sampled
/// without replacement, concatenated and shuffled.
EvalMixture make_eval_mixture(const TimeSeriesDataset& id_test,
                              const TimeSeriesDataset& ood_test,
                              uint64_t seed);

struct ChannelStats {
  std::vector<float> mean;  // per channel
  std::vector<float> stddev;
};

/// Per-channel statistics over all instances and timesteps.
ChannelStats fit_channel_stats(const TimeSeriesDataset& source);

/// z-scores every channel in place with the given stats (std floor 1e-8).
void apply_channel_stats(const ChannelStats& stats, TimeSeriesDataset& target);

}  // namespace tsood

#endif  // TSOOD_DATASET_HPP_
