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

#include "tsood/model.hpp"

namespace tsood {

Arch arch_from_string(const std::string& s) {
  if (s == "resnet1d" || s == "resnet") return Arch::ResNet1D;
  if (s == "tst" || s == "transformer") return Arch::TST;
  if (s == "lstm") return Arch::LSTM;
  throw ConfigError("unknown architecture '" + s + "'");
}

std::string arch_to_string(Arch a) {
  switch (a) {
    case Arch::ResNet1D: return "resnet1d";
    case Arch::TST: return "tst";
    case Arch::LSTM: return "lstm";
  }
  throw ConfigError("unknown architecture tag");
}

Tensor& Backbone::param(const std::string& name) {
  for (auto& [n, t] : params_) {
    if (n == name) return t;
  }
  throw ConfigError("no parameter named '" + name + "'");
}

const Tensor& Backbone::param(const std::string& name) const {
  for (const auto& [n, t] : params_) {
    if (n == name) return t;
  }
  throw ConfigError("no parameter named '" + name + "'");
}

int64_t Backbone::param_count() const {
  int64_t total = 0;
  for (const auto& [n, t] : params_) total += t.size();
  return total;
}

void Backbone::watch_params(Tape& tape) {
  for (auto& [n, t] : params_) tape.watch(t);
}

Tensor& Backbone::add_param(const std::string& name, Tensor init) {
  init.set_requires_grad(true);
  params_.emplace_back(name, std::move(init));
  return params_.back().second;
}

Tensor& Backbone::add_buffer(const std::string& name, Tensor init) {
  buffers_.emplace_back(name, std::move(init));
  return buffers_.back().second;
}

std::unique_ptr<Backbone> Backbone::build(const ModelConfig& config) {
  if (config.in_channels <= 0 || config.seq_len <= 0 || config.width <= 0) {
    throw ConfigError("model config: dimensions must be positive");
  }
  if (config.n_classes < 2) {
    throw ConfigError("model config: need at least 2 classes");
  }
  switch (config.arch) {
    case Arch::ResNet1D: return build_resnet1d(config);
    case Arch::TST: return build_tst(config);
    case Arch::LSTM: return build_lstm(config);
  }
  throw ConfigError("unknown architecture tag");
}

Tensor input_gradient(
    Backbone& model, const Tensor& x,
    const std::function<Tensor(const ForwardOutputs&)>& objective) {
  Tape tape;
  Tensor xw = x.clone();
  tape.watch(xw);
  ForwardOutputs out = model.forward(xw, /*training=*/false, &tape);
  Tensor loss = objective(out);
  GradientMap grads = tape.backward(loss);
  return grads.at(xw);
}

}  // namespace tsood
