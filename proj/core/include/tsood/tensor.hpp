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

#ifndef TSOOD_TENSOR_HPP_
#define TSOOD_TENSOR_HPP_

#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsood/common.hpp"

namespace tsood {

using Shape = std::vector<int64_t>;

int64_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

class Tape;

/// Dense row-major float32 tensor. Values are immutable after construction
/// except for in-place optimizer updates and running-statistic buffers,
/// which go through mutable_data(). Copies share storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<float> values);

  static Tensor scalar(float v);
  static Tensor zeros(Shape shape);
  static Tensor ones(Shape shape);
  static Tensor full(Shape shape, float v);
  static Tensor from(std::initializer_list<float> values);
  static Tensor randn(Shape shape, Rng& rng, float stddev = 1.0f);
  static Tensor uniform(Shape shape, Rng& rng, float lo, float hi);

  const Shape& shape() const { return shape_; }
  int ndim() const { return int(shape_.size()); }
  int64_t dim(int i) const { return shape_[size_t(i)]; }
  int64_t size() const { return int64_t(data_ ? data_->size() : 0); }
  bool defined() const { return data_ != nullptr; }

  std::span<const float> data() const { return {data_->data(), data_->size()}; }
  /// In-place access; only optimizer updates and buffers use this.
  std::span<float> mutable_data() { return {data_->data(), data_->size()}; }

  float item() const;
  /// For scalar reduction outputs: the float64 accumulator value when one
  /// was deposited (see set_precise_item), else the float32 value. Gradient
  /// checking and loss logging read this.
  double item_precise() const;
  float at(std::initializer_list<int64_t> idx) const;

  /// Same storage, new shape (sizes must agree). No tape interaction; use
  /// the reshape() kernel inside recorded graphs.
  Tensor view(Shape shape) const;
  Tensor clone() const;
  /// Same storage, no tape association.
  Tensor detach() const;

  bool requires_grad() const { return requires_grad_; }
  Tensor& set_requires_grad(bool v) {
    requires_grad_ = v;
    return *this;
  }

  Tape* tape() const { return tape_; }
  int node() const { return node_; }
  /// True when this tensor is a live node of `tp`. Tensors keep a liveness
  /// token so a destroyed or reset tape can be detected without touching it.
  bool on_tape(const Tape* tp) const;

  /// Kernel plumbing: scalar reductions store their float64 accumulator so
  /// item_precise() does not quantize to float32.
  void set_precise_item(double v) {
    precise_ = v;
    has_precise_ = true;
  }
  bool has_precise_item() const { return has_precise_; }

 private:
  std::shared_ptr<std::vector<float>> data_;
  Shape shape_;
  bool requires_grad_ = false;
  Tape* tape_ = nullptr;
  int node_ = -1;
  std::weak_ptr<char> tape_token_;
  double precise_ = 0.0;
  bool has_precise_ = false;
  friend class Tape;
};

/// Gradients keyed by tape node id, as returned by Tape::backward().
class GradientMap {
 public:
  explicit GradientMap(size_t n_nodes) : grads_(n_nodes) {}

  bool contains(const Tensor& t) const;
  /// Gradient of the loss w.r.t. t; zeros of t's shape if disconnected.
  Tensor at(const Tensor& t) const;

  void accumulate(int node, const Tensor& g);
  const std::optional<Tensor>& raw(int node) const {
    return grads_[size_t(node)];
  }

 private:
  std::vector<std::optional<Tensor>> grads_;
};

/// Reverse-mode tape. Kernels append one entry per produced tensor when any
/// input is watched; backward() replays entries in reverse, visiting each
/// node exactly once, then marks the tape consumed.
class Tape {
 public:
  using BackwardFn = std::function<void(const Tensor& grad_out, GradientMap&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers t as a leaf on this tape (idempotent). Needed before any
  /// kernel can build graph through t. A tensor previously watched on a
  /// tape that has since been reset or destroyed is re-watched silently.
  int watch(Tensor& t);

  /// Used by kernels: assigns out a node id and stores its backward fn.
  int record(const std::string& op, Tensor& out, BackwardFn fn);

  /// Gradients of a scalar loss w.r.t. every watched tensor. Consumes the
  /// tape; a second backward() without reset() throws TapeError.
  GradientMap backward(const Tensor& loss);

  void reset();
  bool consumed() const { return consumed_; }
  size_t n_nodes() const { return size_t(n_nodes_); }
  size_t n_ops() const { return entries_.size(); }

 private:
  struct Entry {
    std::string op;
    int out_node;
    BackwardFn fn;
  };
  std::vector<Entry> entries_;
  int n_nodes_ = 0;
  bool consumed_ = false;
  std::shared_ptr<char> token_ = std::make_shared<char>(0);
  friend class Tensor;
};

// ---------------------------------------------------------------------------
// Primitive kernels. Each computes the forward value and, when an input is
// watched on a live tape, records the exact vector-Jacobian product.
// Binary elementwise ops broadcast the second operand when its shape is a
// suffix of the first's (covers bias rows and positional tables).
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor add_scalar(const Tensor& a, float s);
Tensor mul_scalar(const Tensor& a, float s);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);

/// (m,k) @ (k,n) -> (m,n). Accumulates in float64.
Tensor matmul(const Tensor& a, const Tensor& b);
/// (B,m,k) @ (B,k,n) -> (B,m,n).
Tensor bmm(const Tensor& a, const Tensor& b);

enum class Padding { Same, Valid };

/// x (b,Cin,L), w (Cout,Cin,k), bias (Cout) or undefined; stride 1.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias,
              Padding padding);

/// (b,C,L) -> (b,C): mean over the time axis.
Tensor global_avg_pool(const Tensor& x);

/// Normalizes the last axis; gamma/beta shaped (F).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  float eps = 1e-5f);

/// x (b,C,L); per-channel statistics over batch and time. In training mode
/// batch statistics are used and running buffers are updated in place; in
/// eval mode the running buffers are used.
Tensor batch_norm1d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    Tensor& running_mean, Tensor& running_var, bool training,
                    float momentum = 0.1f, float eps = 1e-5f);

Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, int64_t start, int64_t stop);
Tensor transpose(const Tensor& x, int axis0, int axis1);
Tensor reshape(const Tensor& x, Shape shape);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor reduce_sum(const Tensor& x, int axis);
Tensor reduce_mean(const Tensor& x, int axis);
Tensor reduce_max(const Tensor& x, int axis);

/// Rowwise over the last axis; stable (subtracts the rowwise max).
Tensor softmax(const Tensor& x);
/// Over the last axis; (d0,...,dk,F) -> (d0,...,dk). Stable.
Tensor logsumexp(const Tensor& x);

/// Rows scaled to unit l2 norm over the last axis.
Tensor l2_normalize(const Tensor& x, float eps = 1e-12f);

/// Toggles the NaN/Inf input guard on kernels (on by default).
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

/// Compares the taped gradient of f (a scalar-valued function of x) against
/// central differences, elementwise. Returns the max relative error with
/// denominator max(|analytic|, |numeric|, 1e-8).
double finite_difference_check(
    const std::function<Tensor(const Tensor&, Tape*)>& f, const Tensor& x,
    double h);

}  // namespace tsood

#endif  // TSOOD_TENSOR_HPP_
