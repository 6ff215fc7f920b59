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

constexpr int kLayers = 3;
constexpr int64_t kHeads = 4;

Tensor xavier_init(Shape shape, int64_t fan_in, int64_t fan_out, Rng& rng) {
  return Tensor::randn(std::move(shape), rng,
                       float(std::sqrt(2.0 / double(fan_in + fan_out))));
}

/// Linear input projection, learned positional embedding, three
/// post-norm encoder layers (4-head self-attention + 2x feed-forward),
/// mean pooling over time, linear classifier.
class Tst : public Backbone {
 public:
  explicit Tst(const ModelConfig& config) : Backbone(config) {
    if (config.width % kHeads != 0) {
      throw ConfigError("tst: width must be divisible by " +
                        std::to_string(kHeads) + " heads");
    }
    Rng rng(config.seed);
    const int64_t w = config.width;
    const int64_t d = config.in_channels;
    add_param("in_proj.weight", xavier_init({d, w}, d, w, rng));
    add_param("in_proj.bias", Tensor::zeros({w}));
    add_param("pos_embedding", Tensor::randn({config.seq_len, w}, rng, 0.02f));
    for (int l = 0; l < kLayers; ++l) {
      const std::string p = "encoder" + std::to_string(l + 1) + ".";
      for (const char* m : {"q", "k", "v", "o"}) {
        add_param(p + "attn." + m + ".weight", xavier_init({w, w}, w, w, rng));
        add_param(p + "attn." + m + ".bias", Tensor::zeros({w}));
      }
      add_param(p + "ln1.gamma", Tensor::ones({w}));
      add_param(p + "ln1.beta", Tensor::zeros({w}));
      add_param(p + "ff1.weight", xavier_init({w, 2 * w}, w, 2 * w, rng));
      add_param(p + "ff1.bias", Tensor::zeros({2 * w}));
      add_param(p + "ff2.weight", xavier_init({2 * w, w}, 2 * w, w, rng));
      add_param(p + "ff2.bias", Tensor::zeros({w}));
      add_param(p + "ln2.gamma", Tensor::ones({w}));
      add_param(p + "ln2.beta", Tensor::zeros({w}));
    }
    add_param("head.weight", xavier_init({config.n_classes, w}, w,
                                         config.n_classes, rng));
    add_param("head.bias", Tensor::zeros({config.n_classes}));
  }

  ForwardOutputs forward(const Tensor& x, bool training,
                         Tape* tape) override {
    (void)training;  // no dropout; train and eval coincide
    if (x.ndim() != 3 || x.dim(1) != config_.in_channels ||
        x.dim(2) != config_.seq_len) {
      throw ShapeError("tst forward: input " + shape_str(x.shape()) +
                       " does not match config (b," +
                       std::to_string(config_.in_channels) + "," +
                       std::to_string(config_.seq_len) + ")");
    }
    if (tape) watch_params(*tape);
    const int64_t b = x.dim(0);
    const int64_t L = config_.seq_len;
    const int64_t w = config_.width;
    const int64_t dk = w / kHeads;

    Tensor h = transpose(x, 1, 2);                       // (b, L, d)
    h = reshape(h, {b * L, config_.in_channels});
    h = add(matmul(h, param("in_proj.weight")), param("in_proj.bias"));
    h = reshape(h, {b, L, w});
    h = add(h, param("pos_embedding"));                  // (L,w) broadcast

    for (int l = 0; l < kLayers; ++l) {
      const std::string p = "encoder" + std::to_string(l + 1) + ".";
      Tensor flat = reshape(h, {b * L, w});

      auto project = [&](const char* m) {
        Tensor t = add(matmul(flat, param(p + "attn." + m + ".weight")),
                       param(p + "attn." + m + ".bias"));
        t = reshape(t, {b, L, kHeads, dk});
        t = transpose(t, 1, 2);                          // (b, H, L, dk)
        return reshape(t, {b * kHeads, L, dk});
      };
      Tensor q = project("q");
      Tensor k = project("k");
      Tensor v = project("v");

      Tensor scores = bmm(q, transpose(k, 1, 2));        // (bH, L, L)
      scores = mul_scalar(scores, float(1.0 / std::sqrt(double(dk))));
      Tensor attn = softmax(scores);
      Tensor ctx = bmm(attn, v);                         // (bH, L, dk)
      ctx = reshape(ctx, {b, kHeads, L, dk});
      ctx = transpose(ctx, 1, 2);                        // (b, L, H, dk)
      ctx = reshape(ctx, {b * L, w});
      Tensor attn_out = add(matmul(ctx, param(p + "attn.o.weight")),
                            param(p + "attn.o.bias"));
      attn_out = reshape(attn_out, {b, L, w});

      h = layer_norm(add(h, attn_out), param(p + "ln1.gamma"),
                     param(p + "ln1.beta"));

      Tensor ff = reshape(h, {b * L, w});
      ff = relu(add(matmul(ff, param(p + "ff1.weight")), param(p + "ff1.bias")));
      ff = add(matmul(ff, param(p + "ff2.weight")), param(p + "ff2.bias"));
      ff = reshape(ff, {b, L, w});
      h = layer_norm(add(h, ff), param(p + "ln2.gamma"), param(p + "ln2.beta"));
    }

    ForwardOutputs out;
    out.prelogit = reduce_mean(h, 1);                    // (b, w)
    out.logits = add(matmul(out.prelogit, transpose(param("head.weight"), 0, 1)),
                     param("head.bias"));
    return out;
  }
};

}  // namespace

std::unique_ptr<Backbone> build_tst(const ModelConfig& config) {
  return std::make_unique<Tst>(config);
}

}  // namespace tsood
