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

#include "tsood/tensor.hpp"

#include <cmath>
#include <cstdio>

namespace tsood {

int64_t shape_size(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  out += ")";
  return out;
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)v);
  return std::string(buf);
}

Tensor::Tensor(Shape shape)
    : data_(std::make_shared<std::vector<float>>(size_t(shape_size(shape)),
                                                 0.0f)),
      shape_(std::move(shape)) {
  for (int64_t d : shape_) {
    if (d <= 0) throw ShapeError("tensor: non-positive extent in " + shape_str(shape_));
  }
}

Tensor::Tensor(Shape shape, std::vector<float> values)
    : data_(std::make_shared<std::vector<float>>(std::move(values))),
      shape_(std::move(shape)) {
  if (shape_size(shape_) != int64_t(data_->size())) {
    throw ShapeError("tensor: shape " + shape_str(shape_) + " does not match " +
                     std::to_string(data_->size()) + " values");
  }
}

Tensor Tensor::scalar(float v) { return Tensor({1}, {v}); }

Tensor Tensor::zeros(Shape shape) { return Tensor(std::move(shape)); }

Tensor Tensor::ones(Shape shape) { return full(std::move(shape), 1.0f); }

Tensor Tensor::full(Shape shape, float v) {
  Tensor t(std::move(shape));
  for (float& x : *t.data_) x = v;
  return t;
}

Tensor Tensor::from(std::initializer_list<float> values) {
  return Tensor({int64_t(values.size())}, std::vector<float>(values));
}

Tensor Tensor::randn(Shape shape, Rng& rng, float stddev) {
  Tensor t(std::move(shape));
  for (float& x : *t.data_) x = float(rng.normal() * stddev);
  return t;
}

Tensor Tensor::uniform(Shape shape, Rng& rng, float lo, float hi) {
  Tensor t(std::move(shape));
  for (float& x : *t.data_) x = float(rng.uniform(lo, hi));
  return t;
}

float Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("item: tensor " + shape_str(shape_) + " is not scalar");
  }
  return (*data_)[0];
}

double Tensor::item_precise() const {
  if (size() != 1) {
    throw ShapeError("item_precise: tensor " + shape_str(shape_) +
                     " is not scalar");
  }
  return has_precise_ ? precise_ : double((*data_)[0]);
}

float Tensor::at(std::initializer_list<int64_t> idx) const {
  if (int(idx.size()) != ndim()) {
    throw ShapeError("at: rank mismatch for " + shape_str(shape_));
  }
  int64_t flat = 0;
  int i = 0;
  for (int64_t v : idx) {
    flat = flat * shape_[size_t(i)] + v;
    ++i;
  }
  return (*data_)[size_t(flat)];
}

Tensor Tensor::view(Shape shape) const {
  if (shape_size(shape) != size()) {
    throw ShapeError("view: " + shape_str(shape_) + " -> " + shape_str(shape) +
                     " changes element count");
  }
  Tensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

Tensor Tensor::clone() const {
  Tensor t(shape_, std::vector<float>(*data_));
  return t;
}

Tensor Tensor::detach() const {
  Tensor t;
  t.data_ = data_;
  t.shape_ = shape_;
  return t;
}

// ---------------------------------------------------------------------------
// GradientMap
// ---------------------------------------------------------------------------

bool GradientMap::contains(const Tensor& t) const {
  return t.node() >= 0 && size_t(t.node()) < grads_.size() &&
         grads_[size_t(t.node())].has_value();
}

Tensor GradientMap::at(const Tensor& t) const {
  if (t.node() < 0) {
    throw TapeError("gradient lookup for a tensor that was never watched");
  }
  if (size_t(t.node()) >= grads_.size()) {
    throw TapeError("gradient lookup with node " + std::to_string(t.node()) +
                    " outside this tape's " + std::to_string(grads_.size()) +
                    " nodes");
  }
  const auto& g = grads_[size_t(t.node())];
  if (!g.has_value()) return Tensor::zeros(t.shape());
  return *g;
}

void GradientMap::accumulate(int node, const Tensor& g) {
  auto& slot = grads_[size_t(node)];
  if (!slot.has_value()) {
    slot = g.clone();
    return;
  }
  auto dst = slot->mutable_data();
  auto src = g.data();
  for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

bool Tensor::on_tape(const Tape* tp) const {
  return tape_ == tp && node_ >= 0 && !tape_token_.expired();
}

int Tape::watch(Tensor& t) {
  if (t.on_tape(this)) return t.node_;
  if (t.tape_ != nullptr && t.tape_ != this && !t.tape_token_.expired()) {
    throw TapeError("watch: tensor already belongs to another live tape");
  }
  if (consumed_) throw TapeError("watch: tape already consumed");
  t.tape_ = this;
  t.node_ = n_nodes_++;
  t.tape_token_ = token_;
  t.requires_grad_ = true;
  return t.node_;
}

int Tape::record(const std::string& op, Tensor& out, BackwardFn fn) {
  if (consumed_) {
    throw TapeError(op + ": tape already consumed; reset() before reuse");
  }
  out.tape_ = this;
  out.node_ = n_nodes_++;
  out.tape_token_ = token_;
  out.requires_grad_ = true;
  entries_.push_back(Entry{op, out.node_, std::move(fn)});
  return out.node_;
}

GradientMap Tape::backward(const Tensor& loss) {
  if (consumed_) throw TapeError("backward: tape already consumed");
  if (loss.size() != 1) {
    throw TapeError("backward: loss must be scalar, got " +
                    shape_str(loss.shape()));
  }
  if (!loss.on_tape(this)) {
    throw TapeError("backward: loss is not connected to this tape");
  }
  GradientMap grads(static_cast<size_t>(n_nodes_));
  grads.accumulate(loss.node_, Tensor::ones(loss.shape()));
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    const auto& g = grads.raw(it->out_node);
    if (!g.has_value()) continue;  // no downstream use of this node
    it->fn(*g, grads);
  }
  consumed_ = true;
  return grads;
}

void Tape::reset() {
  entries_.clear();
  n_nodes_ = 0;
  consumed_ = false;
  token_ = std::make_shared<char>(0);  // expires every outstanding node
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

double finite_difference_check(
    const std::function<Tensor(const Tensor&, Tape*)>& f, const Tensor& x,
    double h) {
  Tape tape;
  Tensor xt = x.clone();
  tape.watch(xt);
  Tensor loss = f(xt, &tape);
  GradientMap grads = tape.backward(loss);
  Tensor analytic = grads.at(xt);

  auto eval = [&](const Tensor& p) -> double {
    Tensor out = f(p, nullptr);
    return out.item_precise();
  };

  double max_rel = 0.0;
  Tensor probe = x.clone();
  auto pd = probe.mutable_data();
  auto ad = analytic.data();
  for (size_t i = 0; i < pd.size(); ++i) {
    const float orig = pd[i];
    // snap the step to the representable difference
    const float hi = float(double(orig) + h);
    const float lo = float(double(orig) - h);
    pd[i] = hi;
    const double fp = eval(probe);
    pd[i] = lo;
    const double fm = eval(probe);
    pd[i] = orig;
    const double numeric = (fp - fm) / (double(hi) - double(lo));
    const double a = double(ad[i]);
    const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
    const double rel = std::fabs(a - numeric) / denom;
    if (rel > max_rel) max_rel = rel;
  }
  return max_rel;
}

}  // namespace tsood
