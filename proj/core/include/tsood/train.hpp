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

#ifndef TSOOD_TRAIN_HPP_
#define TSOOD_TRAIN_HPP_

#include <span>
#include <string>
#include <vector>

#include "tsood/augment.hpp"
#include "tsood/dataset.hpp"
#include "tsood/model.hpp"
#include "tsood/tensor.hpp"

namespace tsood {

enum class LossKind { CE, MPC };

LossKind loss_kind_from_string(const std::string& s);
std::string loss_kind_to_string(LossKind k);

struct TrainConfig {
  LossKind loss = LossKind::CE;
  int64_t epochs = 100;
  int64_t batch_size = 16;
  double learning_rate = 1e-3;
  double temperature = 0.07;  // MPC softmax temperature
  AugmentationSpec augmentation{AugKind::MagnitudeWarp, 0.2, 5, 4,
                                0.1,  {0.5, 2.0},       0.9, 0.1};
  bool augment_ce = false;  // CE normally trains on raw series
  int64_t linear_probe_epochs = 50;
  uint64_t seed = 1;
};

/// Mean cross-entropy of a logit batch against integer labels, computed
/// stably as logsumexp(logits) - logit[label].
Tensor cross_entropy_loss(const Tensor& logits, std::span<const int> labels);

/// Multi-positive contrastive loss over raw similarity scores S (N anchors
/// by M candidates, before temperature scaling). match is the 0/1 matrix;
/// the target distribution normalizes each row of match.
Tensor mpc_loss_from_sims(const Tensor& sims, const Tensor& match, double tau);

/// anchors (N,F) and candidates (M,F) must be l2-normalized.
Tensor mpc_loss(const Tensor& anchors, const Tensor& candidates,
                const Tensor& match, double tau);

/// Adam over a set of parameter tensors, updating them in place.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double learning_rate, double beta1 = 0.9,
                         double beta2 = 0.999, double eps = 1e-8);
  void add_params(std::vector<std::pair<std::string, Tensor>>& params);
  /// t must outlive the optimizer (registry entry or other stable tensor).
  void add_param(Tensor& t);
  void step(const GradientMap& grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<Tensor*> params_;  // registry entries outlive the optimizer
  std::vector<std::vector<double>> m_, v_;
};

struct EpochLog {
  int64_t epoch;
  double loss;
  double id_val_accuracy;
};

struct TrainResult {
  TrainingMeta meta;
  std::vector<EpochLog> log;
};

/// Trains in place. CE: shuffled mini-batch Adam on the classifier.
/// MPC: two augmented views per sample feed a projection head and the
/// contrastive loss (positives = same class), then a linear probe fits the
/// classification head on frozen prelogit features so logit-based scorers
/// apply. id_val, when given, is only logged.
TrainResult train_model(Backbone& model, const TimeSeriesDataset& id_train,
                        const TimeSeriesDataset* id_val,
                        const TrainConfig& config);

/// Fraction of argmax(logits) == label; ties resolve to the lowest index.
double evaluate_id_accuracy(Backbone& model, const TimeSeriesDataset& data,
                            int64_t batch_size = 64);

void write_train_log(const std::vector<EpochLog>& log, const std::string& path,
                     const std::string& header_comment);

}  // namespace tsood

#endif  // TSOOD_TRAIN_HPP_
