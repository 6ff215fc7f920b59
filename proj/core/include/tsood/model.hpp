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

#ifndef TSOOD_MODEL_HPP_
#define TSOOD_MODEL_HPP_

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "tsood/common.hpp"
#include "tsood/dataset.hpp"
#include "tsood/tensor.hpp"

namespace tsood {

enum class Arch { ResNet1D, TST, LSTM };

Arch arch_from_string(const std::string& s);
std::string arch_to_string(Arch a);

struct ModelConfig {
  Arch arch = Arch::ResNet1D;
  int64_t in_channels = 1;
  int64_t seq_len = 1;
  int64_t n_classes = 2;
  int64_t width = 64;
  uint64_t seed = 1;
};

/// logits = prelogit @ head_weight^T + head_bias for every architecture;
/// prelogit is the input of the final linear layer.
struct ForwardOutputs {
  Tensor logits;    // (batch, n_classes)
  Tensor prelogit;  // (batch, width)
};

/// A neural sequence classifier built from tensor-core primitives.
/// Parameters and buffers live in ordered name->tensor registries; forward
/// reads them through the registry so a watched parameter is the same
/// object the graph touches.
class Backbone {
 public:
  virtual ~Backbone() = default;

  /// x is (batch, in_channels, seq_len). In training mode batch-norm uses
  /// batch statistics and updates its running buffers.
  virtual ForwardOutputs forward(const Tensor& x, bool training,
                                 Tape* tape = nullptr) = 0;

  const ModelConfig& config() const { return config_; }
  int64_t feature_dim() const { return config_.width; }

  std::vector<std::pair<std::string, Tensor>>& params() { return params_; }
  const std::vector<std::pair<std::string, Tensor>>& params() const {
    return params_;
  }
  std::vector<std::pair<std::string, Tensor>>& buffers() { return buffers_; }
  const std::vector<std::pair<std::string, Tensor>>& buffers() const {
    return buffers_;
  }

  Tensor& param(const std::string& name);
  const Tensor& param(const std::string& name) const;

  /// Final linear layer, shape (n_classes, width) / (n_classes).
  const Tensor& head_weight() const { return param("head.weight"); }
  const Tensor& head_bias() const { return param("head.bias"); }

  int64_t param_count() const;
  void watch_params(Tape& tape);

  static std::unique_ptr<Backbone> build(const ModelConfig& config);

 protected:
  explicit Backbone(ModelConfig config) : config_(std::move(config)) {}
  Tensor& add_param(const std::string& name, Tensor init);
  Tensor& add_buffer(const std::string& name, Tensor init);

  ModelConfig config_;
  std::vector<std::pair<std::string, Tensor>> params_;
  std::vector<std::pair<std::string, Tensor>> buffers_;
};

std::unique_ptr<Backbone> build_resnet1d(const ModelConfig& config);
std::unique_ptr<Backbone> build_tst(const ModelConfig& config);
std::unique_ptr<Backbone> build_lstm(const ModelConfig& config);

/// Gradient of a scalar objective of the outputs w.r.t. the input, eval
/// mode. The objective must build its value from the outputs with taped
/// kernels.
Tensor input_gradient(
    Backbone& model, const Tensor& x,
    const std::function<Tensor(const ForwardOutputs&)>& objective);

struct TrainingMeta {
  std::string loss_kind = "none";  // "ce" | "mpc" | "none"
  int64_t epochs = 0;
  double final_train_accuracy = -1.0;
  double final_val_accuracy = -1.0;
  std::string config_digest;
  uint64_t seed = 0;
};

/// Everything needed to score: the trained backbone, the normalization
/// statistics it expects, and how it was trained.
struct ModelArtifacts {
  std::unique_ptr<Backbone> model;
  ChannelStats stats;
  TrainingMeta meta;
};

/// Checkpoint directory: manifest.json (arch, config, ordered tensor names
/// and shapes, stats, metadata) + weights.bin (little-endian float32 in
/// manifest order). Round-trips bit-exactly.
void save_checkpoint(const ModelArtifacts& artifacts, const std::string& dir);
ModelArtifacts load_checkpoint(const std::string& dir);

}  // namespace tsood

#endif  // TSOOD_MODEL_HPP_
