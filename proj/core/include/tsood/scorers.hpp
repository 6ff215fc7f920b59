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

#ifndef TSOOD_SCORERS_HPP_
#define TSOOD_SCORERS_HPP_

#include <limits>
#include <string>
#include <vector>

#include "tsood/dataset.hpp"
#include "tsood/feature_models.hpp"
#include "tsood/model.hpp"

namespace tsood {

/// The ten post-hoc scoring methods. Convention everywhere: higher score
/// means more out-of-distribution.
enum class Method {
  MSP,
  ODIN,
  EBO,
  GradNorm,
  ReACT,
  DICE,
  MDS,
  DfmPca,
  DfmIf,
  DfmOcsvm,
};

Method method_from_string(const std::string& s);
std::string method_to_string(Method m);
std::vector<Method> all_methods();

struct ScorerSpec {
  Method method = Method::MSP;
  double temperature = 1.0;         // energy temperature (EBO/ReACT/DICE)
  double odin_temperature = 1000.0;
  double odin_epsilon = 0.002;
  double react_percentile = 90.0;   // of all ID prelogit activations
  double dice_prune_fraction = 0.7;
  double pca_retained = 0.97;
  int64_t if_trees = 100;
  int64_t if_psi = 256;             // capped at the class sample count
  uint64_t if_seed = 1;
  double ocsvm_nu = 0.1;
  double ocsvm_gamma = 0.0;         // <= 0 selects 1/(F * mean variance)
};

/// Fitted state is public: reduction tests inject degenerate values
/// (e.g. an infinite ReACT threshold) directly.
struct FittedScorer {
  ScorerSpec spec;
  int64_t n_classes = 0;
  int64_t feature_dim = 0;

  // head snapshot shared by the logit-space methods
  std::vector<double> head_weight;  // C x F
  std::vector<double> head_bias;    // C

  double react_clip = std::numeric_limits<double>::infinity();
  std::vector<double> dice_mask;    // C x F of 0/1

  GaussianClassModel mds;
  PcaClassModel pca;
  IsolationForestModel iforest;
  OcsvmClassModel ocsvm;
};

/// Fits from the trained model and normalized ID training data only.
FittedScorer fit_scorer(const ScorerSpec& spec, Backbone& model,
                        const TimeSeriesDataset& id_train);

/// The DICE mask: per output unit, 1.0 on the top ceil((1-prune)*F)
/// contributions weight * mean_activation, 0.0 elsewhere. Ties keep the
/// lower feature index.
std::vector<double> dice_mask_from(std::span<const double> head_weight,
                                   std::span<const double> feature_mean,
                                   double prune_fraction, int64_t n_classes,
                                   int64_t feature_dim);

/// Scores one sample given the shared forward outputs. Not valid for ODIN,
/// which perturbs the input.
double score_from_outputs(const FittedScorer& scorer,
                          std::span<const float> prelogit,
                          std::span<const float> logits);

/// Scores one sample (1,d,L); runs whatever forward/backward passes the
/// method needs.
double score_sample(const FittedScorer& scorer, Backbone& model,
                    const Tensor& x);

struct BatchScores {
  std::vector<double> scores;       // aligned with the mixture order
  std::vector<double> latency_ms;   // per sample; zero when not recorded
};

/// Sequential per-sample scoring. When record_latency is set, each sample
/// is timed on the monotonic clock; include_forward controls whether the
/// shared forward pass is inside the timed region (default off: all
/// methods reuse the same logits/features).
BatchScores score_batch(const FittedScorer& scorer, Backbone& model,
                        const TimeSeriesDataset& mixture,
                        bool record_latency = false,
                        bool include_forward = false);

/// scorer_<method>.json + scorer_<method>.bin in `dir` (little-endian
/// float64 stream).
void save_scorer(const FittedScorer& scorer, const std::string& dir);
FittedScorer load_scorer(const std::string& dir, Method method);

}  // namespace tsood

#endif  // TSOOD_SCORERS_HPP_
