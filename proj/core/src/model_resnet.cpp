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

Tensor he_init(Shape shape, int64_t fan_in, Rng& rng) {
  return Tensor::randn(std::move(shape), rng,
                       float(std::sqrt(2.0 / double(fan_in))));
}

/// Three residual blocks of three convolutions (kernels 7/5/3) with
/// batch-norm and relu, a 1x1 projection where widths change, global
/// average pooling, then a linear classifier.
class ResNet1D : public Backbone {
 public:
  explicit ResNet1D(const ModelConfig& config) : Backbone(config) {
    Rng rng(config.seed);
    const int64_t w = config.width;
    for (int b = 0; b < 3; ++b) {
      const int64_t in_ch = b == 0 ? config.in_channels : w;
      const std::string p = "block" + std::to_string(b + 1) + ".";
      const int64_t ks[3] = {7, 5, 3};
      int64_t ic = in_ch;
      for (int c = 0; c < 3; ++c) {
        const std::string cp = p + "conv" + std::to_string(c + 1);
        add_param(cp + ".weight", he_init({w, ic, ks[c]}, ic * ks[c], rng));
        add_param(cp + ".bn.gamma", Tensor::ones({w}));
        add_param(cp + ".bn.beta", Tensor::zeros({w}));
        add_buffer(cp + ".bn.running_mean", Tensor::zeros({w}));
        add_buffer(cp + ".bn.running_var", Tensor::ones({w}));
        ic = w;
      }
      if (in_ch != w) {
        add_param(p + "proj.weight", he_init({w, in_ch, 1}, in_ch, rng));
        add_param(p + "proj.bn.gamma", Tensor::ones({w}));
        add_param(p + "proj.bn.beta", Tensor::zeros({w}));
        add_buffer(p + "proj.bn.running_mean", Tensor::zeros({w}));
        add_buffer(p + "proj.bn.running_var", Tensor::ones({w}));
      }
    }
    add_param("head.weight", he_init({config.n_classes, w}, w, rng));
    add_param("head.bias", Tensor::zeros({config.n_classes}));
  }

  ForwardOutputs forward(const Tensor& x, bool training,
                         Tape* tape) override {
    if (x.ndim() != 3 || x.dim(1) != config_.in_channels ||
        x.dim(2) != config_.seq_len) {
      throw ShapeError("resnet1d forward: input " + shape_str(x.shape()) +
                       " does not match config (b," +
                       std::to_string(config_.in_channels) + "," +
                       std::to_string(config_.seq_len) + ")");
    }
    if (tape) watch_params(*tape);
    Tensor h = x;
    for (int b = 0; b < 3; ++b) {
      const std::string p = "block" + std::to_string(b + 1) + ".";
      Tensor skip = h;
      Tensor a = h;
      for (int c = 0; c < 3; ++c) {
        const std::string cp = p + "conv" + std::to_string(c + 1);
        a = conv1d(a, param(cp + ".weight"), Tensor(), Padding::Same);
        a = batch_norm1d(a, param(cp + ".bn.gamma"), param(cp + ".bn.beta"),
                         buffer(cp + ".bn.running_mean"),
                         buffer(cp + ".bn.running_var"), training);
        if (c < 2) a = relu(a);
      }
      if (has_param(p + "proj.weight")) {
        skip = conv1d(skip, param(p + "proj.weight"), Tensor(), Padding::Same);
        skip = batch_norm1d(skip, param(p + "proj.bn.gamma"),
                            param(p + "proj.bn.beta"),
                            buffer(p + "proj.bn.running_mean"),
                            buffer(p + "proj.bn.running_var"), training);
      }
      h = relu(add(a, skip));
    }
    ForwardOutputs out;
    out.prelogit = global_avg_pool(h);  // (b, w)
    out.logits = add(matmul(out.prelogit, transpose(param("head.weight"), 0, 1)),
                     param("head.bias"));
    return out;
  }

 private:
  bool has_param(const std::string& name) const {
    for (const auto& [n, t] : params_) {
      if (n == name) return true;
    }
    return false;
  }
  Tensor& buffer(const std::string& name) {
    for (auto& [n, t] : buffers_) {
      if (n == name) return t;
    }
    throw ConfigError("no buffer named '" + name + "'");
  }
};

}  // namespace

std::unique_ptr<Backbone> build_resnet1d(const ModelConfig& config) {
  return std::make_unique<ResNet1D>(config);
}

}  // namespace tsood
