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

#include "tsood/model.hpp"

namespace tsood {

namespace {

/// Two stacked unidirectional LSTM layers; the last hidden state feeds a
/// fully connected layer whose relu output is the prelogit, then the
/// linear head. Gate order i, f, g, o; forget bias starts at 1.
class Lstm : public Backbone {
 public:
  explicit Lstm(const ModelConfig& config) : Backbone(config) {
    Rng rng(config.seed);
    const int64_t w = config.width;
    const float bound = float(1.0 / std::sqrt(double(w)));
    auto uniform_init = [&](Shape shape) {
      return Tensor::uniform(std::move(shape), rng, -bound, bound);
    };
    for (int l = 0; l < 2; ++l) {
      const std::string p = "lstm" + std::to_string(l + 1) + ".";
      const int64_t in = l == 0 ? config.in_channels : w;
      add_param(p + "w_ih", uniform_init({4 * w, in}));
      add_param(p + "w_hh", uniform_init({4 * w, w}));
      Tensor bias = Tensor::zeros({4 * w});
      {
        auto bd = bias.mutable_data();
        for (int64_t i = w; i < 2 * w; ++i) bd[size_t(i)] = 1.0f;
      }
      add_param(p + "bias", bias);
    }
    add_param("fc.weight", uniform_init({w, w}));
    add_param("fc.bias", Tensor::zeros({w}));
    add_param("head.weight", uniform_init({config.n_classes, w}));
    add_param("head.bias", Tensor::zeros({config.n_classes}));
  }

  ForwardOutputs forward(const Tensor& x, bool training,
                         Tape* tape) override {
    (void)training;
    if (x.ndim() != 3 || x.dim(1) != config_.in_channels ||
        x.dim(2) != config_.seq_len) {
      throw ShapeError("lstm forward: input " + shape_str(x.shape()) +
                       " does not match config (b," +
                       std::to_string(config_.in_channels) + "," +
                       std::to_string(config_.seq_len) + ")");
    }
    if (tape) watch_params(*tape);
    const int64_t b = x.dim(0);
    const int64_t L = config_.seq_len;
    const int64_t w = config_.width;

    std::vector<Tensor> seq;  // layer inputs per timestep, (b, in)
    seq.reserve(size_t(L));
    for (int64_t t = 0; t < L; ++t) {
      seq.push_back(reshape(slice(x, 2, t, t + 1), {b, config_.in_channels}));
    }

    Tensor last_h;
    for (int l = 0; l < 2; ++l) {
      const std::string p = "lstm" + std::to_string(l + 1) + ".";
      Tensor wx = transpose(param(p + "w_ih"), 0, 1);  // (in, 4w)
      Tensor wh = transpose(param(p + "w_hh"), 0, 1);  // (w, 4w)
      const Tensor& bias = param(p + "bias");
      Tensor h = Tensor::zeros({b, w});
      Tensor c = Tensor::zeros({b, w});
      for (int64_t t = 0; t < L; ++t) {
        Tensor gates =
            add(add(matmul(seq[size_t(t)], wx), matmul(h, wh)), bias);
        Tensor ig = sigmoid(slice(gates, 1, 0, w));
        Tensor fg = sigmoid(slice(gates, 1, w, 2 * w));
        Tensor gg = tanh(slice(gates, 1, 2 * w, 3 * w));
        Tensor og = sigmoid(slice(gates, 1, 3 * w, 4 * w));
        c = add(mul(fg, c), mul(ig, gg));
        h = mul(og, tanh(c));
        seq[size_t(t)] = h;  // becomes next layer's input
      }
      last_h = h;
    }

    ForwardOutputs out;
    out.prelogit = relu(add(matmul(last_h, transpose(param("fc.weight"), 0, 1)),
                            param("fc.bias")));
    out.logits = add(matmul(out.prelogit, transpose(param("head.weight"), 0, 1)),
                     param("head.bias"));
    return out;
  }
};

}  // namespace

std::unique_ptr<Backbone> build_lstm(const ModelConfig& config) {
  return std::make_unique<Lstm>(config);
}

}  // namespace tsood
