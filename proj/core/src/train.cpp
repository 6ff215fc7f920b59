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

#include "tsood/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace tsood {

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "ce") return LossKind::CE;
  if (s == "mpc") return LossKind::MPC;
  throw ConfigError("unknown loss '" + s + "'");
}

std::string loss_kind_to_string(LossKind k) {
  return k == LossKind::CE ? "ce" : "mpc";
}

Tensor cross_entropy_loss(const Tensor& logits, std::span<const int> labels) {
  if (logits.ndim() != 2 || int64_t(labels.size()) != logits.dim(0)) {
    throw ShapeError("cross_entropy_loss: logits " + shape_str(logits.shape()) +
                     " vs " + std::to_string(labels.size()) + " labels");
  }
  const int64_t b = logits.dim(0), C = logits.dim(1);
  Tensor onehot = Tensor::zeros({b, C});
  {
    auto od = onehot.mutable_data();
    for (int64_t i = 0; i < b; ++i) {
      const int y = labels[size_t(i)];
      if (y < 0 || int64_t(y) >= C) {
        throw DataError("cross_entropy_loss: label " + std::to_string(y) +
                        " out of range for " + std::to_string(C) + " classes");
      }
      od[size_t(i * C + y)] = 1.0f;
    }
  }
  Tensor lse = logsumexp(logits);                         // (b)
  Tensor picked = reduce_sum(mul(logits, onehot), 1);     // (b)
  return mean(sub(lse, picked));
}

Tensor mpc_loss_from_sims(const Tensor& sims, const Tensor& match,
                          double tau) {
  if (tau <= 0.0) throw ConfigError("mpc_loss: temperature must be positive");
  if (sims.shape() != match.shape() || sims.ndim() != 2) {
    throw ShapeError("mpc_loss: sims " + shape_str(sims.shape()) +
                     " vs match " + shape_str(match.shape()));
  }
  const int64_t N = sims.dim(0), M = sims.dim(1);
  Tensor target = Tensor::zeros({N, M});
  {
    auto md = match.data();
    auto td = target.mutable_data();
    for (int64_t i = 0; i < N; ++i) {
      double row = 0.0;
      for (int64_t j = 0; j < M; ++j) row += double(md[size_t(i * M + j)]);
      if (row <= 0.0) {
        throw DataError("mpc_loss: anchor " + std::to_string(i) +
                        " has no positive candidate");
      }
      for (int64_t j = 0; j < M; ++j) {
        td[size_t(i * M + j)] = float(double(md[size_t(i * M + j)]) / row);
      }
    }
  }
  // -sum_i y_i log p_i == logsumexp(s) - sum_i y_i s_i since sum_i y_i == 1
  Tensor scaled = mul_scalar(sims, float(1.0 / tau));
  Tensor lse = logsumexp(scaled);                         // (N)
  Tensor dots = reduce_sum(mul(scaled, target), 1);       // (N)
  return mean(sub(lse, dots));
}

Tensor mpc_loss(const Tensor& anchors, const Tensor& candidates,
                const Tensor& match, double tau) {
  Tensor sims = matmul(anchors, transpose(candidates, 0, 1));
  return mpc_loss_from_sims(sims, match, tau);
}

AdamOptimizer::AdamOptimizer(double learning_rate, double beta1, double beta2,
                             double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::add_params(
    std::vector<std::pair<std::string, Tensor>>& params) {
  for (auto& [name, t] : params) add_param(t);
}

void AdamOptimizer::add_param(Tensor& t) {
  params_.push_back(&t);
  m_.emplace_back(size_t(t.size()), 0.0);
  v_.emplace_back(size_t(t.size()), 0.0);
}

void AdamOptimizer::step(const GradientMap& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, double(t_));
  const double bc2 = 1.0 - std::pow(beta2_, double(t_));
  for (size_t p = 0; p < params_.size(); ++p) {
    Tensor grad = grads.at(*params_[p]);
    auto gd = grad.data();
    auto wd = params_[p]->mutable_data();
    auto& m = m_[p];
    auto& v = v_[p];
    for (size_t i = 0; i < wd.size(); ++i) {
      const double g = double(gd[i]);
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      wd[i] = float(double(wd[i]) - lr_ * mhat / (std::sqrt(vhat) + eps_));
    }
  }
}

double evaluate_id_accuracy(Backbone& model, const TimeSeriesDataset& data,
                            int64_t batch_size) {
  if (data.n == 0) return 0.0;
  int64_t correct = 0;
  for (int64_t start = 0; start < data.n; start += batch_size) {
    const int64_t stop = std::min(data.n, start + batch_size);
    std::vector<int64_t> idx;
    for (int64_t i = start; i < stop; ++i) idx.push_back(i);
    Tensor x = data.batch(idx);
    ForwardOutputs out = model.forward(x, /*training=*/false);
    const int64_t C = out.logits.dim(1);
    auto ld = out.logits.data();
    for (int64_t i = 0; i < stop - start; ++i) {
      int best = 0;
      float best_v = ld[size_t(i * C)];
      for (int64_t c = 1; c < C; ++c) {
        const float v = ld[size_t(i * C + c)];
        if (v > best_v) {  // strict: ties keep the lowest class index
          best_v = v;
          best = int(c);
        }
      }
      if (best == data.labels[size_t(start + i)]) ++correct;
    }
  }
  return double(correct) / double(data.n);
}

namespace {

void check_loss_finite(double loss, int64_t epoch, int64_t step) {
  if (!std::isfinite(loss)) {
    throw NumericError("training diverged: non-finite loss at epoch " +
                       std::to_string(epoch) + " step " +
                       std::to_string(step));
  }
}

std::vector<std::vector<int64_t>> make_batches(int64_t n, int64_t batch_size,
                                               Rng& rng) {
  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[size_t(i)] = i;
  rng.shuffle(order);
  std::vector<std::vector<int64_t>> batches;
  for (int64_t start = 0; start < n; start += batch_size) {
    const int64_t stop = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + stop);
  }
  return batches;
}

TrainResult train_ce(Backbone& model, const TimeSeriesDataset& id_train,
                     const TimeSeriesDataset* id_val,
                     const TrainConfig& config) {
  TrainResult result;
  AdamOptimizer adam(config.learning_rate);
  adam.add_params(model.params());
  Rng rng(config.seed);
  for (int64_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng erng = rng.fork(uint64_t(epoch));
    double epoch_loss = 0.0;
    int64_t steps = 0;
    for (const auto& batch_idx : make_batches(id_train.n, config.batch_size,
                                              erng)) {
      Tensor x = id_train.batch(batch_idx);
      if (config.augment_ce) {
        auto xd = x.mutable_data();
        const int64_t plane = id_train.d * id_train.L;
        for (size_t b = 0; b < batch_idx.size(); ++b) {
          SeriesView sv{id_train.instance(batch_idx[b]), id_train.d,
                        id_train.L};
          const uint64_t aug_seed =
              fnv1a64("ce:" + std::to_string(epoch) + ":" +
                      std::to_string(batch_idx[b]) + ":" +
                      std::to_string(config.seed));
          auto vals = apply_augmentation(config.augmentation, sv, aug_seed);
          std::copy(vals.begin(), vals.end(), xd.begin() + int64_t(b) * plane);
        }
      }
      std::vector<int> labels;
      for (int64_t i : batch_idx) labels.push_back(id_train.labels[size_t(i)]);
      Tape tape;
      ForwardOutputs out = model.forward(x, /*training=*/true, &tape);
      Tensor loss = cross_entropy_loss(out.logits, labels);
      const double loss_v = loss.item_precise();
      check_loss_finite(loss_v, epoch, steps);
      GradientMap grads = tape.backward(loss);
      adam.step(grads);
      epoch_loss += loss_v;
      ++steps;
    }
    const double val_acc =
        id_val ? evaluate_id_accuracy(model, *id_val)
               : evaluate_id_accuracy(model, id_train);
    result.log.push_back(
        {epoch, steps ? epoch_loss / double(steps) : 0.0, val_acc});
  }
  result.meta.loss_kind = "ce";
  result.meta.epochs = config.epochs;
  result.meta.final_train_accuracy = evaluate_id_accuracy(model, id_train);
  result.meta.final_val_accuracy =
      id_val ? evaluate_id_accuracy(model, *id_val) : -1.0;
  return result;
}

struct ProjectionHead {
  std::vector<std::pair<std::string, Tensor>> params;

  explicit ProjectionHead(int64_t width, Rng& rng) {
    const float s1 = float(std::sqrt(2.0 / double(width)));
    params.emplace_back("proj.fc1.weight",
                        Tensor::randn({width, width}, rng, s1));
    params.emplace_back("proj.fc1.bias", Tensor::zeros({width}));
    params.emplace_back("proj.fc2.weight",
                        Tensor::randn({width, 64}, rng, s1));
    params.emplace_back("proj.fc2.bias", Tensor::zeros({64}));
    for (auto& [n, t] : params) t.set_requires_grad(true);
  }

  Tensor& p(size_t i) { return params[i].second; }

  /// prelogit (b,w) -> l2-normalized embedding (b,64)
  Tensor embed(const Tensor& prelogit, Tape* tape) {
    if (tape) {
      for (auto& [n, t] : params) tape->watch(t);
    }
    Tensor h = relu(add(matmul(prelogit, p(0)), p(1)));
    Tensor z = add(matmul(h, p(2)), p(3));
    return l2_normalize(z);
  }
};

TrainResult train_mpc(Backbone& model, const TimeSeriesDataset& id_train,
                      const TimeSeriesDataset* id_val,
                      const TrainConfig& config) {
  TrainResult result;
  Rng rng(config.seed);
  ProjectionHead proj(model.feature_dim(), rng);

  AdamOptimizer adam(config.learning_rate);
  adam.add_params(model.params());
  adam.add_params(proj.params);

  const int64_t d = id_train.d, L = id_train.L;

  auto augment_batch = [&](const std::vector<int64_t>& batch_idx,
                           int64_t epoch, int view) {
    Tensor x({int64_t(batch_idx.size()), d, L});
    auto xd = x.mutable_data();
    for (size_t b = 0; b < batch_idx.size(); ++b) {
      SeriesView sv{id_train.instance(batch_idx[b]), d, L};
      const uint64_t aug_seed =
          fnv1a64("view" + std::to_string(view) + ":" + std::to_string(epoch) +
                  ":" + std::to_string(batch_idx[b]) + ":" +
                  std::to_string(config.seed));
      auto vals = apply_augmentation(config.augmentation, sv, aug_seed);
      std::copy(vals.begin(), vals.end(), xd.begin() + int64_t(b) * d * L);
    }
    return x;
  };

  for (int64_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng erng = rng.fork(uint64_t(epoch));
    double epoch_loss = 0.0;
    int64_t steps = 0;
    for (const auto& batch_idx : make_batches(id_train.n, config.batch_size,
                                              erng)) {
      const int64_t B = int64_t(batch_idx.size());
      Tensor match({B, B});
      {
        auto md = match.mutable_data();
        for (int64_t i = 0; i < B; ++i) {
          for (int64_t j = 0; j < B; ++j) {
            md[size_t(i * B + j)] =
                id_train.labels[size_t(batch_idx[size_t(i)])] ==
                        id_train.labels[size_t(batch_idx[size_t(j)])]
                    ? 1.0f
                    : 0.0f;
          }
        }
      }
      Tensor x1 = augment_batch(batch_idx, epoch, 1);
      Tensor x2 = augment_batch(batch_idx, epoch, 2);
      Tape tape;
      ForwardOutputs o1 = model.forward(x1, /*training=*/true, &tape);
      ForwardOutputs o2 = model.forward(x2, /*training=*/true, &tape);
      Tensor z1 = proj.embed(o1.prelogit, &tape);
      Tensor z2 = proj.embed(o2.prelogit, &tape);
      // both directions: view-1 anchors vs view-2 candidates and back
      Tensor loss = mul_scalar(add(mpc_loss(z1, z2, match, config.temperature),
                                   mpc_loss(z2, z1, match, config.temperature)),
                               0.5f);
      const double loss_v = loss.item_precise();
      check_loss_finite(loss_v, epoch, steps);
      GradientMap grads = tape.backward(loss);
      adam.step(grads);
      epoch_loss += loss_v;
      ++steps;
    }
    result.log.push_back({epoch, steps ? epoch_loss / double(steps) : 0.0,
                          0.0});  // probe not fitted yet; logged below
  }

  // Linear probe: fit the classification head on frozen prelogit features
  // so every logit-based scorer applies to the MPC model.
  {
    AdamOptimizer probe_adam(config.learning_rate);
    probe_adam.add_param(model.param("head.weight"));
    probe_adam.add_param(model.param("head.bias"));

    // features once, eval mode
    Tensor feats({id_train.n, model.feature_dim()});
    {
      auto fd = feats.mutable_data();
      const int64_t bs = 64;
      for (int64_t start = 0; start < id_train.n; start += bs) {
        const int64_t stop = std::min(id_train.n, start + bs);
        std::vector<int64_t> idx;
        for (int64_t i = start; i < stop; ++i) idx.push_back(i);
        ForwardOutputs out = model.forward(id_train.batch(idx), false);
        auto pd = out.prelogit.data();
        std::copy(pd.begin(), pd.end(),
                  fd.begin() + start * model.feature_dim());
      }
    }
    Rng prng(config.seed ^ 0xabcdef);
    for (int64_t epoch = 0; epoch < config.linear_probe_epochs; ++epoch) {
      Rng erng = prng.fork(uint64_t(epoch));
      for (const auto& batch_idx : make_batches(id_train.n, config.batch_size,
                                                erng)) {
        Tensor fb({int64_t(batch_idx.size()), model.feature_dim()});
        auto fbd = fb.mutable_data();
        std::vector<int> labels;
        for (size_t b = 0; b < batch_idx.size(); ++b) {
          auto src = feats.data().subspan(
              size_t(batch_idx[b] * model.feature_dim()),
              size_t(model.feature_dim()));
          std::copy(src.begin(), src.end(),
                    fbd.begin() + int64_t(b) * model.feature_dim());
          labels.push_back(id_train.labels[size_t(batch_idx[b])]);
        }
        Tape tape;
        tape.watch(model.param("head.weight"));
        tape.watch(model.param("head.bias"));
        Tensor logits =
            add(matmul(fb, transpose(model.param("head.weight"), 0, 1)),
                model.param("head.bias"));
        Tensor loss = cross_entropy_loss(logits, labels);
        check_loss_finite(loss.item_precise(), epoch, 0);
        GradientMap grads = tape.backward(loss);
        probe_adam.step(grads);
      }
    }
  }

  const double final_val =
      id_val ? evaluate_id_accuracy(model, *id_val) : -1.0;
  if (!result.log.empty()) {
    result.log.back().id_val_accuracy =
        id_val ? final_val : evaluate_id_accuracy(model, id_train);
  }
  result.meta.loss_kind = "mpc";
  result.meta.epochs = config.epochs;
  result.meta.final_train_accuracy = evaluate_id_accuracy(model, id_train);
  result.meta.final_val_accuracy = final_val;
  return result;
}

}  // namespace

TrainResult train_model(Backbone& model, const TimeSeriesDataset& id_train,
                        const TimeSeriesDataset* id_val,
                        const TrainConfig& config) {
  if (id_train.n == 0) throw DataError("train: empty training set");
  for (int y : id_train.labels) {
    if (int64_t(y) >= model.config().n_classes) {
      throw DataError("train: label " + std::to_string(y) +
                      " out of range; model has " +
                      std::to_string(model.config().n_classes) + " classes");
    }
  }
  return config.loss == LossKind::CE ? train_ce(model, id_train, id_val, config)
                                     : train_mpc(model, id_train, id_val,
                                                 config);
}

void write_train_log(const std::vector<EpochLog>& log, const std::string& path,
                     const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  out << "epoch,loss,id_val_accuracy\n";
  char buf[96];
  for (const auto& row : log) {
    std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g\n",
                  (long long)row.epoch, row.loss, row.id_val_accuracy);
    out << buf;
  }
}

}  // namespace tsood
