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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "tsood/tensor.hpp"

namespace tsood {

namespace {

bool g_finite_checks = true;

void check_finite(const char* op, const Tensor& t) {
  if (!g_finite_checks || !t.defined()) return;
  for (float v : t.data()) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + ": non-finite input value");
    }
  }
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " +
                   shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

/// Snapshot of an input taken at record time; immune to later re-watching.
struct Saved {
  Tensor t;
  bool watched = false;
  int node = -1;
};

Saved save(const Tensor& t, Tape* tp) {
  Saved s;
  s.t = t;
  s.watched = tp != nullptr && t.on_tape(tp);
  s.node = s.watched ? t.node() : -1;
  return s;
}

Tape* common_tape(const char* op, std::initializer_list<const Tensor*> ins) {
  Tape* tp = nullptr;
  for (const Tensor* p : ins) {
    if (!p->defined() || p->node() < 0 || p->tape() == nullptr) continue;
    if (!p->on_tape(p->tape())) continue;   // stale association
    if (p->tape()->consumed()) continue;    // post-backward: plain constant
    if (tp != nullptr && tp != p->tape()) {
      throw TapeError(std::string(op) + ": inputs live on different tapes");
    }
    tp = p->tape();
  }
  return tp;
}

// Broadcast: shapes equal, or b a suffix of a (b tiles over leading dims),
// or b scalar.
bool suffix_broadcast(const Shape& a, const Shape& b) {
  if (shape_size(const_cast<Shape&>(b)) == 1) return true;
  if (b.size() > a.size()) return false;
  size_t off = a.size() - b.size();
  for (size_t i = 0; i < b.size(); ++i) {
    if (a[off + i] != b[i]) return false;
  }
  return true;
}

/// Sums grad over the tiled leading dims so it matches b's shape.
Tensor tile_reduce(const Tensor& g, const Shape& b_shape) {
  Tensor out = Tensor::zeros(b_shape);
  auto od = out.mutable_data();
  auto gd = g.data();
  const size_t bs = size_t(out.size());
  std::vector<double> acc(bs, 0.0);
  for (size_t i = 0; i < gd.size(); ++i) acc[i % bs] += double(gd[i]);
  for (size_t i = 0; i < bs; ++i) od[i] = float(acc[i]);
  return out;
}

using BinFwd = float (*)(float, float);
using BinFwd64 = double (*)(double, double);

template <BinFwd F, BinFwd64 F2>
Tensor binary_forward(const char* op, const Tensor& a, const Tensor& b) {
  check_finite(op, a);
  check_finite(op, b);
  if (!suffix_broadcast(a.shape(), b.shape())) shape_fail(op, a, b);
  Tensor out(a.shape());
  auto ad = a.data();
  auto bd = b.data();
  auto od = out.mutable_data();
  const size_t bs = bd.size();
  for (size_t i = 0; i < od.size(); ++i) od[i] = F(ad[i], bd[i % bs]);
  if (a.size() == 1 && b.size() == 1 &&
      (a.has_precise_item() || b.has_precise_item())) {
    out.set_precise_item(F2(a.item_precise(), b.item_precise()));
  }
  return out;
}

float fwd_add(float x, float y) { return x + y; }
float fwd_sub(float x, float y) { return x - y; }
float fwd_mul(float x, float y) { return x * y; }
float fwd_div(float x, float y) { return x / y; }
double fwd_add64(double x, double y) { return x + y; }
double fwd_sub64(double x, double y) { return x - y; }
double fwd_mul64(double x, double y) { return x * y; }
double fwd_div64(double x, double y) { return x / y; }

struct RowsCols {
  int64_t rows;
  int64_t cols;
};

RowsCols last_axis(const Tensor& x) {
  const int64_t cols = x.shape().back();
  return {x.size() / cols, cols};
}

Shape drop_last(const Shape& s) {
  Shape out(s.begin(), s.end() - 1);
  if (out.empty()) out = {1};
  return out;
}

}  // namespace

void set_finite_checks(bool enabled) { g_finite_checks = enabled; }
bool finite_checks_enabled() { return g_finite_checks; }

// ---------------------------------------------------------------------------
// Elementwise binary
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out = binary_forward<fwd_add, fwd_add64>("add", a, b);
  if (Tape* tp = common_tape("add", {&a, &b})) {
    Saved sa = save(a, tp), sb = save(b, tp);
    tp->record("add", out, [sa, sb](const Tensor& g, GradientMap& gm) {
      if (sa.watched) gm.accumulate(sa.node, g);
      if (sb.watched) gm.accumulate(sb.node, tile_reduce(g, sb.t.shape()));
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Tensor out = binary_forward<fwd_sub, fwd_sub64>("sub", a, b);
  if (Tape* tp = common_tape("sub", {&a, &b})) {
    Saved sa = save(a, tp), sb = save(b, tp);
    tp->record("sub", out, [sa, sb](const Tensor& g, GradientMap& gm) {
      if (sa.watched) gm.accumulate(sa.node, g);
      if (sb.watched) {
        Tensor gb = tile_reduce(g, sb.t.shape());
        for (float& v : gb.mutable_data()) v = -v;
        gm.accumulate(sb.node, gb);
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Tensor out = binary_forward<fwd_mul, fwd_mul64>("mul", a, b);
  if (Tape* tp = common_tape("mul", {&a, &b})) {
    Saved sa = save(a, tp), sb = save(b, tp);
    tp->record("mul", out, [sa, sb](const Tensor& g, GradientMap& gm) {
      auto gd = g.data();
      auto ad = sa.t.data();
      auto bd = sb.t.data();
      if (sa.watched) {
        Tensor ga(sa.t.shape());
        auto gad = ga.mutable_data();
        const size_t bs = bd.size();
        for (size_t i = 0; i < gad.size(); ++i) gad[i] = gd[i] * bd[i % bs];
        gm.accumulate(sa.node, ga);
      }
      if (sb.watched) {
        Tensor prod(sa.t.shape());
        auto pd = prod.mutable_data();
        for (size_t i = 0; i < pd.size(); ++i) pd[i] = gd[i] * ad[i];
        gm.accumulate(sb.node, tile_reduce(prod, sb.t.shape()));
      }
    });
  }
  return out;
}

Tensor div(const Tensor& a, const Tensor& b) {
  Tensor out = binary_forward<fwd_div, fwd_div64>("div", a, b);
  if (Tape* tp = common_tape("div", {&a, &b})) {
    Saved sa = save(a, tp), sb = save(b, tp);
    Tensor osaved = out;
    tp->record("div", out, [sa, sb, osaved](const Tensor& g, GradientMap& gm) {
      auto gd = g.data();
      auto bd = sb.t.data();
      const size_t bs = bd.size();
      if (sa.watched) {
        Tensor ga(sa.t.shape());
        auto gad = ga.mutable_data();
        for (size_t i = 0; i < gad.size(); ++i) gad[i] = gd[i] / bd[i % bs];
        gm.accumulate(sa.node, ga);
      }
      if (sb.watched) {
        auto od = osaved.data();
        Tensor prod(sa.t.shape());
        auto pd = prod.mutable_data();
        for (size_t i = 0; i < pd.size(); ++i) {
          pd[i] = -gd[i] * od[i] / bd[i % bs];
        }
        gm.accumulate(sb.node, tile_reduce(prod, sb.t.shape()));
      }
    });
  }
  return out;
}

Tensor neg(const Tensor& a) {
  check_finite("neg", a);
  Tensor out(a.shape());
  auto ad = a.data();
  auto od = out.mutable_data();
  for (size_t i = 0; i < od.size(); ++i) od[i] = -ad[i];
  if (a.has_precise_item()) out.set_precise_item(-a.item_precise());
  if (Tape* tp = common_tape("neg", {&a})) {
    Saved sa = save(a, tp);
    tp->record("neg", out, [sa](const Tensor& g, GradientMap& gm) {
      if (!sa.watched) return;
      Tensor ga(sa.t.shape());
      auto gad = ga.mutable_data();
      auto gd = g.data();
      for (size_t i = 0; i < gad.size(); ++i) gad[i] = -gd[i];
      gm.accumulate(sa.node, ga);
    });
  }
  return out;
}

Tensor add_scalar(const Tensor& a, float s) {
  check_finite("add_scalar", a);
  Tensor out(a.shape());
  auto ad = a.data();
  auto od = out.mutable_data();
  for (size_t i = 0; i < od.size(); ++i) od[i] = ad[i] + s;
  if (a.has_precise_item()) out.set_precise_item(a.item_precise() + double(s));
  if (Tape* tp = common_tape("add_scalar", {&a})) {
    Saved sa = save(a, tp);
    tp->record("add_scalar", out, [sa](const Tensor& g, GradientMap& gm) {
      if (sa.watched) gm.accumulate(sa.node, g);
    });
  }
  return out;
}

Tensor mul_scalar(const Tensor& a, float s) {
  check_finite("mul_scalar", a);
  Tensor out(a.shape());
  auto ad = a.data();
  auto od = out.mutable_data();
  for (size_t i = 0; i < od.size(); ++i) od[i] = ad[i] * s;
  if (a.has_precise_item()) out.set_precise_item(a.item_precise() * double(s));
  if (Tape* tp = common_tape("mul_scalar", {&a})) {
    Saved sa = save(a, tp);
    tp->record("mul_scalar", out, [sa, s](const Tensor& g, GradientMap& gm) {
      if (!sa.watched) return;
      Tensor ga(sa.t.shape());
      auto gad = ga.mutable_data();
      auto gd = g.data();
      for (size_t i = 0; i < gad.size(); ++i) gad[i] = gd[i] * s;
      gm.accumulate(sa.node, ga);
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise unary
// ---------------------------------------------------------------------------

namespace {

// dfactor(input, output) gives the local derivative.
template <typename FwdF, typename DF>
Tensor unary_op(const char* name, const Tensor& a, FwdF fwd, DF dfactor) {
  check_finite(name, a);
  Tensor out(a.shape());
  auto ad = a.data();
  auto od = out.mutable_data();
  for (size_t i = 0; i < od.size(); ++i) od[i] = fwd(ad[i]);
  if (Tape* tp = common_tape(name, {&a})) {
    Saved sa = save(a, tp);
    Tensor osaved = out;
    tp->record(name, out,
               [sa, osaved, dfactor](const Tensor& g, GradientMap& gm) {
                 if (!sa.watched) return;
                 Tensor ga(sa.t.shape());
                 auto gad = ga.mutable_data();
                 auto gd = g.data();
                 auto xd = sa.t.data();
                 auto yd = osaved.data();
                 for (size_t i = 0; i < gad.size(); ++i) {
                   gad[i] = gd[i] * dfactor(xd[i], yd[i]);
                 }
                 gm.accumulate(sa.node, ga);
               });
  }
  return out;
}

}  // namespace

Tensor exp(const Tensor& a) {
  return unary_op(
      "exp", a, [](float x) { return std::exp(x); },
      [](float, float y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary_op(
      "log", a, [](float x) { return std::log(x); },
      [](float x, float) { return 1.0f / x; });
}

Tensor sqrt(const Tensor& a) {
  return unary_op(
      "sqrt", a, [](float x) { return std::sqrt(x); },
      [](float, float y) { return 0.5f / y; });
}

Tensor relu(const Tensor& a) {
  return unary_op(
      "relu", a, [](float x) { return x > 0.0f ? x : 0.0f; },
      [](float x, float) { return x > 0.0f ? 1.0f : 0.0f; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      "sigmoid", a,
      [](float x) {
        // stable in both tails
        if (x >= 0.0f) {
          const float z = std::exp(-x);
          return 1.0f / (1.0f + z);
        }
        const float z = std::exp(x);
        return z / (1.0f + z);
      },
      [](float, float y) { return y * (1.0f - y); });
}

Tensor tanh(const Tensor& a) {
  return unary_op(
      "tanh", a, [](float x) { return std::tanh(x); },
      [](float, float y) { return 1.0f - y * y; });
}

// ---------------------------------------------------------------------------
// Matrix multiply
// ---------------------------------------------------------------------------

namespace {

// C(m,n) = A(m,k) @ B(k,n), float64 accumulation, row-major.
void mm(const float* A, const float* B, float* C, int64_t m, int64_t k,
        int64_t n, std::vector<double>& scratch) {
  scratch.assign(size_t(n), 0.0);
  for (int64_t i = 0; i < m; ++i) {
    std::fill(scratch.begin(), scratch.end(), 0.0);
    const float* arow = A + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const double av = double(arow[p]);
      const float* brow = B + p * n;
      for (int64_t j = 0; j < n; ++j) scratch[size_t(j)] += av * double(brow[j]);
    }
    float* crow = C + i * n;
    for (int64_t j = 0; j < n; ++j) crow[j] = float(scratch[size_t(j)]);
  }
}

// C(m,n) = A(m,k) @ B^T where B is (n,k).
void mm_bt(const float* A, const float* B, float* C, int64_t m, int64_t k,
           int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const float* arow = A + i * k;
    for (int64_t j = 0; j < n; ++j) {
      const float* brow = B + j * k;
      double acc = 0.0;
      for (int64_t p = 0; p < k; ++p) acc += double(arow[p]) * double(brow[p]);
      C[i * n + j] = float(acc);
    }
  }
}

// C(k,n) += not supported; C = A^T(k,m) @ B(m,n) where A is (m,k).
void mm_at(const float* A, const float* B, float* C, int64_t m, int64_t k,
           int64_t n, std::vector<double>& scratch) {
  scratch.assign(size_t(k) * size_t(n), 0.0);
  for (int64_t i = 0; i < m; ++i) {
    const float* arow = A + i * k;
    const float* brow = B + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const double av = double(arow[p]);
      double* crow = scratch.data() + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * double(brow[j]);
    }
  }
  for (size_t i = 0; i < scratch.size(); ++i) C[i] = float(scratch[i]);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_finite("matmul", a);
  check_finite("matmul", b);
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    shape_fail("matmul", a, b);
  }
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  std::vector<double> scratch;
  mm(a.data().data(), b.data().data(), out.mutable_data().data(), m, k, n,
     scratch);
  if (Tape* tp = common_tape("matmul", {&a, &b})) {
    Saved sa = save(a, tp), sb = save(b, tp);
    tp->record("matmul", out, [sa, sb, m, k, n](const Tensor& g,
                                                GradientMap& gm) {
      std::vector<double> scr;
      if (sa.watched) {
        Tensor ga({m, k});
        mm_bt(g.data().data(), sb.t.data().data(), ga.mutable_data().data(), m,
              n, k);
        gm.accumulate(sa.node, ga);
      }
      if (sb.watched) {
        Tensor gb({k, n});
        mm_at(sa.t.data().data(), g.data().data(), gb.mutable_data().data(), m,
              k, n, scr);
        gm.accumulate(sb.node, gb);
      }
    });
  }
  return out;
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  check_finite("bmm", a);
  check_finite("bmm", b);
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0) ||
      a.dim(2) != b.dim(1)) {
    shape_fail("bmm", a, b);
  }
  const int64_t B = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  Tensor out({B, m, n});
  std::vector<double> scratch;
  for (int64_t q = 0; q < B; ++q) {
    mm(a.data().data() + q * m * k, b.data().data() + q * k * n,
       out.mutable_data().data() + q * m * n, m, k, n, scratch);
  }
  if (Tape* tp = common_tape("bmm", {&a, &b})) {
    Saved sa = save(a, tp), sb = save(b, tp);
    tp->record("bmm", out, [sa, sb, B, m, k, n](const Tensor& g,
                                                GradientMap& gm) {
      std::vector<double> scr;
      if (sa.watched) {
        Tensor ga({B, m, k});
        for (int64_t q = 0; q < B; ++q) {
          mm_bt(g.data().data() + q * m * n, sb.t.data().data() + q * k * n,
                ga.mutable_data().data() + q * m * k, m, n, k);
        }
        gm.accumulate(sa.node, ga);
      }
      if (sb.watched) {
        Tensor gb({B, k, n});
        for (int64_t q = 0; q < B; ++q) {
          mm_at(sa.t.data().data() + q * m * k, g.data().data() + q * m * n,
                gb.mutable_data().data() + q * k * n, m, k, n, scr);
        }
        gm.accumulate(sb.node, gb);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias,
              Padding padding) {
  check_finite("conv1d", x);
  check_finite("conv1d", w);
  if (bias.defined()) check_finite("conv1d", bias);
  if (x.ndim() != 3 || w.ndim() != 3 || x.dim(1) != w.dim(1)) {
    shape_fail("conv1d", x, w);
  }
  const int64_t N = x.dim(0), Cin = x.dim(1), L = x.dim(2);
  const int64_t Cout = w.dim(0), K = w.dim(2);
  if (bias.defined() && bias.size() != Cout) shape_fail("conv1d", w, bias);
  if (K > L && padding == Padding::Valid) {
    throw ShapeError("conv1d: kernel " + std::to_string(K) +
                     " longer than input " + std::to_string(L));
  }
  const int64_t pad = padding == Padding::Same ? (K - 1) / 2 : 0;
  const int64_t Lo = padding == Padding::Same ? L : L - K + 1;

  Tensor out({N, Cout, Lo});
  auto xd = x.data();
  auto wd = w.data();
  auto od = out.mutable_data();
  std::vector<double> acc(static_cast<size_t>(Lo));
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t co = 0; co < Cout; ++co) {
      const double b0 = bias.defined() ? double(bias.data()[size_t(co)]) : 0.0;
      std::fill(acc.begin(), acc.end(), b0);
      for (int64_t ci = 0; ci < Cin; ++ci) {
        const float* xrow = xd.data() + (n * Cin + ci) * L;
        const float* wrow = wd.data() + (co * Cin + ci) * K;
        for (int64_t u = 0; u < K; ++u) {
          const double wv = double(wrow[u]);
          const int64_t off = u - pad;
          const int64_t t0 = std::max<int64_t>(0, -off);
          const int64_t t1 = std::min<int64_t>(Lo, L - off);
          for (int64_t t = t0; t < t1; ++t) {
            acc[size_t(t)] += wv * double(xrow[t + off]);
          }
        }
      }
      float* orow = od.data() + (n * Cout + co) * Lo;
      for (int64_t t = 0; t < Lo; ++t) orow[t] = float(acc[size_t(t)]);
    }
  }

  if (Tape* tp = common_tape("conv1d", {&x, &w, &bias})) {
    Saved sx = save(x, tp), sw = save(w, tp), sb = save(bias, tp);
    tp->record("conv1d", out, [sx, sw, sb, N, Cin, Cout, L, Lo, K,
                               pad](const Tensor& g, GradientMap& gm) {
      auto gd = g.data();
      auto xd2 = sx.t.data();
      auto wd2 = sw.t.data();
      if (sx.watched) {
        Tensor gx({N, Cin, L});
        std::vector<double> row(static_cast<size_t>(L));
        auto gxd = gx.mutable_data();
        for (int64_t n = 0; n < N; ++n) {
          for (int64_t ci = 0; ci < Cin; ++ci) {
            std::fill(row.begin(), row.end(), 0.0);
            for (int64_t co = 0; co < Cout; ++co) {
              const float* grow = gd.data() + (n * Cout + co) * Lo;
              const float* wrow = wd2.data() + (co * Cin + ci) * K;
              for (int64_t u = 0; u < K; ++u) {
                const double wv = double(wrow[u]);
                const int64_t off = u - pad;
                const int64_t t0 = std::max<int64_t>(0, -off);
                const int64_t t1 = std::min<int64_t>(Lo, L - off);
                for (int64_t t = t0; t < t1; ++t) {
                  row[size_t(t + off)] += wv * double(grow[t]);
                }
              }
            }
            float* dst = gxd.data() + (n * Cin + ci) * L;
            for (int64_t s = 0; s < L; ++s) dst[s] = float(row[size_t(s)]);
          }
        }
        gm.accumulate(sx.node, gx);
      }
      if (sw.watched) {
        Tensor gw({Cout, Cin, K});
        std::vector<double> acc2(size_t(Cout) * size_t(Cin) * size_t(K), 0.0);
        for (int64_t n = 0; n < N; ++n) {
          for (int64_t co = 0; co < Cout; ++co) {
            const float* grow = gd.data() + (n * Cout + co) * Lo;
            for (int64_t ci = 0; ci < Cin; ++ci) {
              const float* xrow = xd2.data() + (n * Cin + ci) * L;
              double* arow = acc2.data() + (co * Cin + ci) * K;
              for (int64_t u = 0; u < K; ++u) {
                const int64_t off = u - pad;
                const int64_t t0 = std::max<int64_t>(0, -off);
                const int64_t t1 = std::min<int64_t>(Lo, L - off);
                double s = 0.0;
                for (int64_t t = t0; t < t1; ++t) {
                  s += double(grow[t]) * double(xrow[t + off]);
                }
                arow[u] += s;
              }
            }
          }
        }
        auto gwd = gw.mutable_data();
        for (size_t i = 0; i < acc2.size(); ++i) gwd[i] = float(acc2[i]);
        gm.accumulate(sw.node, gw);
      }
      if (sb.watched) {
        Tensor gb({Cout});
        auto gbd = gb.mutable_data();
        for (int64_t co = 0; co < Cout; ++co) {
          double s = 0.0;
          for (int64_t n = 0; n < N; ++n) {
            const float* grow = gd.data() + (n * Cout + co) * Lo;
            for (int64_t t = 0; t < Lo; ++t) s += double(grow[t]);
          }
          gbd[size_t(co)] = float(s);
        }
        gm.accumulate(sb.node, gb);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const int nd = parts[0].ndim();
  if (axis < 0 || axis >= nd) throw ShapeError("concat: bad axis");
  Shape out_shape = parts[0].shape();
  int64_t total = 0;
  for (const Tensor& p : parts) {
    check_finite("concat", p);
    if (p.ndim() != nd) shape_fail("concat", parts[0], p);
    for (int i = 0; i < nd; ++i) {
      if (i != axis && p.dim(i) != out_shape[size_t(i)]) {
        shape_fail("concat", parts[0], p);
      }
    }
    total += p.dim(axis);
  }
  out_shape[size_t(axis)] = total;
  Tensor out(out_shape);

  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= out_shape[size_t(i)];
  for (int i = axis + 1; i < nd; ++i) inner *= out_shape[size_t(i)];

  auto od = out.mutable_data();
  int64_t offset = 0;
  for (const Tensor& p : parts) {
    const int64_t mid = p.dim(axis);
    auto pd = p.data();
    for (int64_t o = 0; o < outer; ++o) {
      std::memcpy(od.data() + (o * total + offset) * inner,
                  pd.data() + o * mid * inner,
                  size_t(mid * inner) * sizeof(float));
    }
    offset += mid;
  }

  std::vector<const Tensor*> ptrs;
  for (const Tensor& p : parts) ptrs.push_back(&p);
  Tape* tp = nullptr;
  for (const Tensor* p : ptrs) {
    Tape* t2 = common_tape("concat", {p});
    if (t2) {
      if (tp && tp != t2) throw TapeError("concat: mixed tapes");
      tp = t2;
    }
  }
  if (tp) {
    std::vector<Saved> saved;
    for (const Tensor& p : parts) saved.push_back(save(p, tp));
    tp->record("concat", out,
               [saved, axis, outer, inner, total](const Tensor& g,
                                                  GradientMap& gm) {
                 auto gd = g.data();
                 int64_t off = 0;
                 for (const Saved& s : saved) {
                   const int64_t mid = s.t.dim(axis);
                   if (s.watched) {
                     Tensor gp(s.t.shape());
                     auto gpd = gp.mutable_data();
                     for (int64_t o = 0; o < outer; ++o) {
                       std::memcpy(gpd.data() + o * mid * inner,
                                   gd.data() + (o * total + off) * inner,
                                   size_t(mid * inner) * sizeof(float));
                     }
                     gm.accumulate(s.node, gp);
                   }
                   off += mid;
                 }
               });
  }
  return out;
}

Tensor slice(const Tensor& x, int axis, int64_t start, int64_t stop) {
  check_finite("slice", x);
  if (axis < 0 || axis >= x.ndim() || start < 0 || stop > x.dim(axis) ||
      start >= stop) {
    throw ShapeError("slice: range [" + std::to_string(start) + "," +
                     std::to_string(stop) + ") bad for axis " +
                     std::to_string(axis) + " of " + shape_str(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[size_t(axis)] = stop - start;
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);
  const int64_t mid_in = x.dim(axis), mid_out = stop - start;

  Tensor out(out_shape);
  auto od = out.mutable_data();
  auto xd = x.data();
  for (int64_t o = 0; o < outer; ++o) {
    std::memcpy(od.data() + o * mid_out * inner,
                xd.data() + (o * mid_in + start) * inner,
                size_t(mid_out * inner) * sizeof(float));
  }
  if (Tape* tp = common_tape("slice", {&x})) {
    Saved sx = save(x, tp);
    tp->record("slice", out,
               [sx, outer, inner, mid_in, mid_out, start](const Tensor& g,
                                                          GradientMap& gm) {
                 if (!sx.watched) return;
                 Tensor gx = Tensor::zeros(sx.t.shape());
                 auto gxd = gx.mutable_data();
                 auto gd = g.data();
                 for (int64_t o = 0; o < outer; ++o) {
                   std::memcpy(gxd.data() + (o * mid_in + start) * inner,
                               gd.data() + o * mid_out * inner,
                               size_t(mid_out * inner) * sizeof(float));
                 }
                 gm.accumulate(sx.node, gx);
               });
  }
  return out;
}

namespace {

Tensor transpose_copy(const Tensor& x, int a0, int a1) {
  Shape out_shape = x.shape();
  std::swap(out_shape[size_t(a0)], out_shape[size_t(a1)]);
  Tensor out(out_shape);
  const int nd = x.ndim();
  std::vector<int64_t> in_strides(size_t(nd), 1), out_strides(size_t(nd), 1);
  for (int i = nd - 2; i >= 0; --i) {
    in_strides[size_t(i)] = in_strides[size_t(i + 1)] * x.dim(i + 1);
    out_strides[size_t(i)] =
        out_strides[size_t(i + 1)] * out_shape[size_t(i + 1)];
  }
  // stride of input axis as seen from the output index space
  std::vector<int64_t> map_strides(static_cast<size_t>(nd));
  for (int i = 0; i < nd; ++i) map_strides[size_t(i)] = in_strides[size_t(i)];
  std::swap(map_strides[size_t(a0)], map_strides[size_t(a1)]);

  auto xd = x.data();
  auto od = out.mutable_data();
  std::vector<int64_t> idx(size_t(nd), 0);
  const int64_t total = x.size();
  int64_t in_flat = 0;
  for (int64_t o = 0; o < total; ++o) {
    od[size_t(o)] = xd[size_t(in_flat)];
    // odometer increment over the output index space
    for (int i = nd - 1; i >= 0; --i) {
      idx[size_t(i)]++;
      in_flat += map_strides[size_t(i)];
      if (idx[size_t(i)] < out_shape[size_t(i)]) break;
      in_flat -= map_strides[size_t(i)] * out_shape[size_t(i)];
      idx[size_t(i)] = 0;
    }
  }
  return out;
}

}  // namespace

Tensor transpose(const Tensor& x, int axis0, int axis1) {
  check_finite("transpose", x);
  if (axis0 < 0 || axis0 >= x.ndim() || axis1 < 0 || axis1 >= x.ndim()) {
    throw ShapeError("transpose: bad axes for " + shape_str(x.shape()));
  }
  Tensor out = transpose_copy(x, axis0, axis1);
  if (Tape* tp = common_tape("transpose", {&x})) {
    Saved sx = save(x, tp);
    tp->record("transpose", out,
               [sx, axis0, axis1](const Tensor& g, GradientMap& gm) {
                 if (!sx.watched) return;
                 gm.accumulate(sx.node, transpose_copy(g, axis0, axis1));
               });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  check_finite("reshape", x);
  Tensor out = x.detach().view(std::move(shape));  // shared storage, new node
  if (Tape* tp = common_tape("reshape", {&x})) {
    Saved sx = save(x, tp);
    tp->record("reshape", out, [sx](const Tensor& g, GradientMap& gm) {
      if (!sx.watched) return;
      gm.accumulate(sx.node, g.view(sx.t.shape()));
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

Tensor sum(const Tensor& x) {
  check_finite("sum", x);
  double acc = 0.0;
  for (float v : x.data()) acc += double(v);
  Tensor out = Tensor::scalar(float(acc));
  out.set_precise_item(acc);
  if (Tape* tp = common_tape("sum", {&x})) {
    Saved sx = save(x, tp);
    tp->record("sum", out, [sx](const Tensor& g, GradientMap& gm) {
      if (!sx.watched) return;
      gm.accumulate(sx.node, Tensor::full(sx.t.shape(), g.data()[0]));
    });
  }
  return out;
}

Tensor mean(const Tensor& x) {
  check_finite("mean", x);
  double acc = 0.0;
  for (float v : x.data()) acc += double(v);
  const double inv = 1.0 / double(x.size());
  Tensor out = Tensor::scalar(float(acc * inv));
  out.set_precise_item(acc * inv);
  if (Tape* tp = common_tape("mean", {&x})) {
    Saved sx = save(x, tp);
    tp->record("mean", out, [sx, inv](const Tensor& g, GradientMap& gm) {
      if (!sx.watched) return;
      gm.accumulate(sx.node,
                    Tensor::full(sx.t.shape(), float(double(g.data()[0]) * inv)));
    });
  }
  return out;
}

namespace {

struct AxisDims {
  int64_t outer, mid, inner;
  Shape out_shape;
};

AxisDims axis_dims(const char* op, const Tensor& x, int axis) {
  if (axis < 0 || axis >= x.ndim()) {
    throw ShapeError(std::string(op) + ": bad axis for " +
                     shape_str(x.shape()));
  }
  AxisDims d{1, x.dim(axis), 1, {}};
  for (int i = 0; i < axis; ++i) d.outer *= x.dim(i);
  for (int i = axis + 1; i < x.ndim(); ++i) d.inner *= x.dim(i);
  for (int i = 0; i < x.ndim(); ++i) {
    if (i != axis) d.out_shape.push_back(x.dim(i));
  }
  if (d.out_shape.empty()) d.out_shape = {1};
  return d;
}

}  // namespace

Tensor reduce_sum(const Tensor& x, int axis) {
  check_finite("reduce_sum", x);
  AxisDims d = axis_dims("reduce_sum", x, axis);
  Tensor out(d.out_shape);
  auto xd = x.data();
  auto od = out.mutable_data();
  for (int64_t o = 0; o < d.outer; ++o) {
    for (int64_t i = 0; i < d.inner; ++i) {
      double acc = 0.0;
      for (int64_t m = 0; m < d.mid; ++m) {
        acc += double(xd[size_t((o * d.mid + m) * d.inner + i)]);
      }
      od[size_t(o * d.inner + i)] = float(acc);
      if (out.size() == 1) out.set_precise_item(acc);
    }
  }
  if (Tape* tp = common_tape("reduce_sum", {&x})) {
    Saved sx = save(x, tp);
    tp->record("reduce_sum", out, [sx, d](const Tensor& g, GradientMap& gm) {
      if (!sx.watched) return;
      Tensor gx(sx.t.shape());
      auto gxd = gx.mutable_data();
      auto gd = g.data();
      for (int64_t o = 0; o < d.outer; ++o) {
        for (int64_t m = 0; m < d.mid; ++m) {
          for (int64_t i = 0; i < d.inner; ++i) {
            gxd[size_t((o * d.mid + m) * d.inner + i)] =
                gd[size_t(o * d.inner + i)];
          }
        }
      }
      gm.accumulate(sx.node, gx);
    });
  }
  return out;
}

Tensor reduce_mean(const Tensor& x, int axis) {
  Tensor s = reduce_sum(x, axis);
  return mul_scalar(s, 1.0f / float(x.dim(axis)));
}

Tensor reduce_max(const Tensor& x, int axis) {
  check_finite("reduce_max", x);
  AxisDims d = axis_dims("reduce_max", x, axis);
  Tensor out(d.out_shape);
  auto argmax = std::make_shared<std::vector<int64_t>>(
      size_t(d.outer * d.inner), 0);
  auto xd = x.data();
  auto od = out.mutable_data();
  for (int64_t o = 0; o < d.outer; ++o) {
    for (int64_t i = 0; i < d.inner; ++i) {
      float best = -std::numeric_limits<float>::infinity();
      int64_t best_m = 0;
      for (int64_t m = 0; m < d.mid; ++m) {
        const float v = xd[size_t((o * d.mid + m) * d.inner + i)];
        if (v > best) {
          best = v;
          best_m = m;
        }
      }
      od[size_t(o * d.inner + i)] = best;
      (*argmax)[size_t(o * d.inner + i)] = best_m;
    }
  }
  if (Tape* tp = common_tape("reduce_max", {&x})) {
    Saved sx = save(x, tp);
    tp->record("reduce_max", out,
               [sx, d, argmax](const Tensor& g, GradientMap& gm) {
                 if (!sx.watched) return;
                 Tensor gx = Tensor::zeros(sx.t.shape());
                 auto gxd = gx.mutable_data();
                 auto gd = g.data();
                 for (int64_t o = 0; o < d.outer; ++o) {
                   for (int64_t i = 0; i < d.inner; ++i) {
                     const int64_t m = (*argmax)[size_t(o * d.inner + i)];
                     gxd[size_t((o * d.mid + m) * d.inner + i)] =
                         gd[size_t(o * d.inner + i)];
                   }
                 }
                 gm.accumulate(sx.node, gx);
               });
  }
  return out;
}

Tensor global_avg_pool(const Tensor& x) {
  if (x.ndim() != 3) {
    throw ShapeError("global_avg_pool: expected (b,C,L), got " +
                     shape_str(x.shape()));
  }
  return reduce_mean(x, 2);
}

// ---------------------------------------------------------------------------
// Softmax family
// ---------------------------------------------------------------------------

Tensor softmax(const Tensor& x) {
  check_finite("softmax", x);
  auto [rows, cols] = last_axis(x);
  Tensor out(x.shape());
  auto xd = x.data();
  auto od = out.mutable_data();
  for (int64_t r = 0; r < rows; ++r) {
    const float* xr = xd.data() + r * cols;
    float* orow = od.data() + r * cols;
    float mx = xr[0];
    for (int64_t c = 1; c < cols; ++c) mx = std::max(mx, xr[c]);
    double denom = 0.0;
    for (int64_t c = 0; c < cols; ++c) {
      const float e = std::exp(xr[c] - mx);
      orow[c] = e;
      denom += double(e);
    }
    const float inv = float(1.0 / denom);
    for (int64_t c = 0; c < cols; ++c) orow[c] *= inv;
  }
  if (Tape* tp = common_tape("softmax", {&x})) {
    Saved sx = save(x, tp);
    Tensor osaved = out;
    tp->record("softmax", out,
               [sx, osaved, rows = rows, cols = cols](const Tensor& g,
                                                      GradientMap& gm) {
                 if (!sx.watched) return;
                 Tensor gx(sx.t.shape());
                 auto gxd = gx.mutable_data();
                 auto gd = g.data();
                 auto yd = osaved.data();
                 for (int64_t r = 0; r < rows; ++r) {
                   const float* yr = yd.data() + r * cols;
                   const float* gr = gd.data() + r * cols;
                   double dot = 0.0;
                   for (int64_t c = 0; c < cols; ++c) {
                     dot += double(gr[c]) * double(yr[c]);
                   }
                   float* dst = gxd.data() + r * cols;
                   for (int64_t c = 0; c < cols; ++c) {
                     dst[c] = float(yr[c] * (double(gr[c]) - dot));
                   }
                 }
                 gm.accumulate(sx.node, gx);
               });
  }
  return out;
}

Tensor logsumexp(const Tensor& x) {
  check_finite("logsumexp", x);
  auto [rows, cols] = last_axis(x);
  Tensor out(drop_last(x.shape()));
  auto xd = x.data();
  auto od = out.mutable_data();
  for (int64_t r = 0; r < rows; ++r) {
    const float* xr = xd.data() + r * cols;
    float mx = xr[0];
    for (int64_t c = 1; c < cols; ++c) mx = std::max(mx, xr[c]);
    double acc = 0.0;
    for (int64_t c = 0; c < cols; ++c) acc += std::exp(double(xr[c]) - mx);
    od[size_t(r)] = float(double(mx) + std::log(acc));
    if (rows == 1) out.set_precise_item(double(mx) + std::log(acc));
  }
  if (Tape* tp = common_tape("logsumexp", {&x})) {
    Saved sx = save(x, tp);
    Tensor osaved = out;
    tp->record("logsumexp", out,
               [sx, osaved, rows = rows, cols = cols](const Tensor& g,
                                                      GradientMap& gm) {
                 if (!sx.watched) return;
                 Tensor gx(sx.t.shape());
                 auto gxd = gx.mutable_data();
                 auto gd = g.data();
                 auto xd2 = sx.t.data();
                 auto ld = osaved.data();
                 for (int64_t r = 0; r < rows; ++r) {
                   const float* xr = xd2.data() + r * cols;
                   const float lse = ld[size_t(r)];
                   const float gr = gd[size_t(r)];
                   float* dst = gxd.data() + r * cols;
                   for (int64_t c = 0; c < cols; ++c) {
                     dst[c] = gr * std::exp(xr[c] - lse);
                   }
                 }
                 gm.accumulate(sx.node, gx);
               });
  }
  return out;
}

Tensor l2_normalize(const Tensor& x, float eps) {
  check_finite("l2_normalize", x);
  auto [rows, cols] = last_axis(x);
  Tensor out(x.shape());
  std::vector<float> norms(static_cast<size_t>(rows));
  auto xd = x.data();
  auto od = out.mutable_data();
  for (int64_t r = 0; r < rows; ++r) {
    const float* xr = xd.data() + r * cols;
    double acc = 0.0;
    for (int64_t c = 0; c < cols; ++c) acc += double(xr[c]) * double(xr[c]);
    const float nrm = float(std::sqrt(acc + double(eps)));
    norms[size_t(r)] = nrm;
    float* orow = od.data() + r * cols;
    for (int64_t c = 0; c < cols; ++c) orow[c] = xr[c] / nrm;
  }
  if (Tape* tp = common_tape("l2_normalize", {&x})) {
    Saved sx = save(x, tp);
    Tensor osaved = out;
    tp->record("l2_normalize", out,
               [sx, osaved, norms, rows = rows, cols = cols](
                   const Tensor& g, GradientMap& gm) {
                 if (!sx.watched) return;
                 Tensor gx(sx.t.shape());
                 auto gxd = gx.mutable_data();
                 auto gd = g.data();
                 auto yd = osaved.data();
                 for (int64_t r = 0; r < rows; ++r) {
                   const float* yr = yd.data() + r * cols;
                   const float* gr = gd.data() + r * cols;
                   double dot = 0.0;
                   for (int64_t c = 0; c < cols; ++c) {
                     dot += double(gr[c]) * double(yr[c]);
                   }
                   const float inv = 1.0f / norms[size_t(r)];
                   float* dst = gxd.data() + r * cols;
                   for (int64_t c = 0; c < cols; ++c) {
                     dst[c] = float((double(gr[c]) - dot * double(yr[c])) * inv);
                   }
                 }
                 gm.accumulate(sx.node, gx);
               });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization layers
// ---------------------------------------------------------------------------

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  float eps) {
  check_finite("layer_norm", x);
  check_finite("layer_norm", gamma);
  check_finite("layer_norm", beta);
  auto [rows, cols] = last_axis(x);
  if (gamma.size() != cols || beta.size() != cols) {
    shape_fail("layer_norm", x, gamma);
  }
  Tensor out(x.shape());
  auto xhat = std::make_shared<std::vector<float>>(size_t(x.size()));
  auto invstd = std::make_shared<std::vector<float>>(size_t(rows));
  auto xd = x.data();
  auto gd = gamma.data();
  auto bd = beta.data();
  auto od = out.mutable_data();
  for (int64_t r = 0; r < rows; ++r) {
    const float* xr = xd.data() + r * cols;
    double m = 0.0;
    for (int64_t c = 0; c < cols; ++c) m += double(xr[c]);
    m /= double(cols);
    double var = 0.0;
    for (int64_t c = 0; c < cols; ++c) {
      const double dv = double(xr[c]) - m;
      var += dv * dv;
    }
    var /= double(cols);
    const float inv = float(1.0 / std::sqrt(var + double(eps)));
    (*invstd)[size_t(r)] = inv;
    float* orow = od.data() + r * cols;
    float* hrow = xhat->data() + r * cols;
    for (int64_t c = 0; c < cols; ++c) {
      const float h = (xr[c] - float(m)) * inv;
      hrow[c] = h;
      orow[c] = gd[c] * h + bd[c];
    }
  }
  if (Tape* tp = common_tape("layer_norm", {&x, &gamma, &beta})) {
    Saved sx = save(x, tp), sg = save(gamma, tp), sb = save(beta, tp);
    tp->record("layer_norm", out,
               [sx, sg, sb, xhat, invstd, rows = rows, cols = cols](
                   const Tensor& g, GradientMap& gm) {
                 auto gd2 = g.data();
                 auto gam = sg.t.data();
                 if (sx.watched) {
                   Tensor gx(sx.t.shape());
                   auto gxd = gx.mutable_data();
                   for (int64_t r = 0; r < rows; ++r) {
                     const float* gr = gd2.data() + r * cols;
                     const float* hr = xhat->data() + r * cols;
                     const float inv = (*invstd)[size_t(r)];
                     double s1 = 0.0, s2 = 0.0;
                     for (int64_t c = 0; c < cols; ++c) {
                       const double dh = double(gr[c]) * double(gam[c]);
                       s1 += dh;
                       s2 += dh * double(hr[c]);
                     }
                     s1 /= double(cols);
                     s2 /= double(cols);
                     float* dst = gxd.data() + r * cols;
                     for (int64_t c = 0; c < cols; ++c) {
                       const double dh = double(gr[c]) * double(gam[c]);
                       dst[c] = float((dh - s1 - double(hr[c]) * s2) * inv);
                     }
                   }
                   gm.accumulate(sx.node, gx);
                 }
                 if (sg.watched) {
                   Tensor gg({cols});
                   auto ggd = gg.mutable_data();
                   for (int64_t c = 0; c < cols; ++c) {
                     double acc = 0.0;
                     for (int64_t r = 0; r < rows; ++r) {
                       acc += double(gd2[size_t(r * cols + c)]) *
                              double((*xhat)[size_t(r * cols + c)]);
                     }
                     ggd[size_t(c)] = float(acc);
                   }
                   gm.accumulate(sg.node, gg);
                 }
                 if (sb.watched) {
                   Tensor gb({cols});
                   auto gbd = gb.mutable_data();
                   for (int64_t c = 0; c < cols; ++c) {
                     double acc = 0.0;
                     for (int64_t r = 0; r < rows; ++r) {
                       acc += double(gd2[size_t(r * cols + c)]);
                     }
                     gbd[size_t(c)] = float(acc);
                   }
                   gm.accumulate(sb.node, gb);
                 }
               });
  }
  return out;
}

Tensor batch_norm1d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    Tensor& running_mean, Tensor& running_var, bool training,
                    float momentum, float eps) {
  check_finite("batch_norm1d", x);
  check_finite("batch_norm1d", gamma);
  check_finite("batch_norm1d", beta);
  if (x.ndim() != 3) {
    throw ShapeError("batch_norm1d: expected (b,C,L), got " +
                     shape_str(x.shape()));
  }
  const int64_t N = x.dim(0), C = x.dim(1), L = x.dim(2);
  if (gamma.size() != C || beta.size() != C || running_mean.size() != C ||
      running_var.size() != C) {
    shape_fail("batch_norm1d", x, gamma);
  }
  const int64_t M = N * L;  // samples per channel

  std::vector<float> use_mean(static_cast<size_t>(C)), use_inv(static_cast<size_t>(C));
  if (training) {
    auto rm = running_mean.mutable_data();
    auto rv = running_var.mutable_data();
    auto xd = x.data();
    for (int64_t c = 0; c < C; ++c) {
      double m = 0.0;
      for (int64_t n = 0; n < N; ++n) {
        const float* row = xd.data() + (n * C + c) * L;
        for (int64_t t = 0; t < L; ++t) m += double(row[t]);
      }
      m /= double(M);
      double var = 0.0;
      for (int64_t n = 0; n < N; ++n) {
        const float* row = xd.data() + (n * C + c) * L;
        for (int64_t t = 0; t < L; ++t) {
          const double dv = double(row[t]) - m;
          var += dv * dv;
        }
      }
      var /= double(M);
      use_mean[size_t(c)] = float(m);
      use_inv[size_t(c)] = float(1.0 / std::sqrt(var + double(eps)));
      const double unbiased = M > 1 ? var * double(M) / double(M - 1) : var;
      rm[size_t(c)] = float((1.0 - momentum) * rm[size_t(c)] + momentum * m);
      rv[size_t(c)] =
          float((1.0 - momentum) * rv[size_t(c)] + momentum * unbiased);
    }
  } else {
    auto rm = running_mean.data();
    auto rv = running_var.data();
    for (int64_t c = 0; c < C; ++c) {
      use_mean[size_t(c)] = rm[size_t(c)];
      use_inv[size_t(c)] = float(1.0 / std::sqrt(double(rv[size_t(c)]) + eps));
    }
  }

  Tensor out(x.shape());
  auto xhat = std::make_shared<std::vector<float>>(size_t(x.size()));
  {
    auto xd = x.data();
    auto od = out.mutable_data();
    auto gd = gamma.data();
    auto bd = beta.data();
    for (int64_t n = 0; n < N; ++n) {
      for (int64_t c = 0; c < C; ++c) {
        const float m = use_mean[size_t(c)];
        const float inv = use_inv[size_t(c)];
        const float ga = gd[size_t(c)], be = bd[size_t(c)];
        const float* xrow = xd.data() + (n * C + c) * L;
        float* orow = od.data() + (n * C + c) * L;
        float* hrow = xhat->data() + (n * C + c) * L;
        for (int64_t t = 0; t < L; ++t) {
          const float h = (xrow[t] - m) * inv;
          hrow[t] = h;
          orow[t] = ga * h + be;
        }
      }
    }
  }

  if (Tape* tp = common_tape("batch_norm1d", {&x, &gamma, &beta})) {
    Saved sx = save(x, tp), sg = save(gamma, tp), sb = save(beta, tp);
    auto inv_saved = std::make_shared<std::vector<float>>(use_inv);
    tp->record(
        "batch_norm1d", out,
        [sx, sg, sb, xhat, inv_saved, training, N, C, L, M](const Tensor& g,
                                                            GradientMap& gm) {
          auto gd2 = g.data();
          auto gam = sg.t.data();
          // per-channel sums of g and g*xhat
          std::vector<double> sg1(size_t(C), 0.0), sg2(size_t(C), 0.0);
          for (int64_t n = 0; n < N; ++n) {
            for (int64_t c = 0; c < C; ++c) {
              const float* gr = gd2.data() + (n * C + c) * L;
              const float* hr = xhat->data() + (n * C + c) * L;
              double a = 0.0, b2 = 0.0;
              for (int64_t t = 0; t < L; ++t) {
                a += double(gr[t]);
                b2 += double(gr[t]) * double(hr[t]);
              }
              sg1[size_t(c)] += a;
              sg2[size_t(c)] += b2;
            }
          }
          if (sx.watched) {
            Tensor gx(sx.t.shape());
            auto gxd = gx.mutable_data();
            for (int64_t n = 0; n < N; ++n) {
              for (int64_t c = 0; c < C; ++c) {
                const double inv = double((*inv_saved)[size_t(c)]);
                const double ga = double(gam[size_t(c)]);
                const float* gr = gd2.data() + (n * C + c) * L;
                const float* hr = xhat->data() + (n * C + c) * L;
                float* dst = gxd.data() + (n * C + c) * L;
                if (training) {
                  const double m1 = sg1[size_t(c)] / double(M);
                  const double m2 = sg2[size_t(c)] / double(M);
                  for (int64_t t = 0; t < L; ++t) {
                    dst[t] = float(ga * inv *
                                   (double(gr[t]) - m1 - double(hr[t]) * m2));
                  }
                } else {
                  for (int64_t t = 0; t < L; ++t) {
                    dst[t] = float(ga * inv * double(gr[t]));
                  }
                }
              }
            }
            gm.accumulate(sx.node, gx);
          }
          if (sg.watched) {
            Tensor gg({C});
            auto ggd = gg.mutable_data();
            for (int64_t c = 0; c < C; ++c) ggd[size_t(c)] = float(sg2[size_t(c)]);
            gm.accumulate(sg.node, gg);
          }
          if (sb.watched) {
            Tensor gb({C});
            auto gbd = gb.mutable_data();
            for (int64_t c = 0; c < C; ++c) gbd[size_t(c)] = float(sg1[size_t(c)]);
            gm.accumulate(sb.node, gb);
          }
        });
  }
  return out;
}

}  // namespace tsood
