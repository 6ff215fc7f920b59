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
#include <limits>

#include "tsood/feature_models.hpp"

namespace tsood {

namespace {

double rbf(std::span<const double> u, std::span<const double> v,
           double gamma) {
  double d2 = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    const double dv = u[i] - v[i];
    d2 += dv * dv;
  }
  return std::exp(-gamma * d2);
}

OcsvmClassModel::ClassSvm fit_class(const FeatureMatrix& fm, double nu,
                                    double gamma, double tol,
                                    int64_t max_iter) {
  const int64_t n = fm.n;
  const double box = 1.0 / (nu * double(n));

  // full kernel matrix; per-class n stays desk scale
  std::vector<double> K(static_cast<size_t>(n * n));
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j <= i; ++j) {
      const double k = rbf(fm.row(i), fm.row(j), gamma);
      K[size_t(i * n + j)] = k;
      K[size_t(j * n + i)] = k;
    }
  }

  // feasible start: first floor(nu*n) coordinates at the box, remainder on
  // the next coordinate
  std::vector<double> alpha(static_cast<size_t>(n), 0.0);
  {
    const int64_t full = int64_t(nu * double(n));
    double assigned = 0.0;
    for (int64_t i = 0; i < full && i < n; ++i) {
      alpha[size_t(i)] = box;
      assigned += box;
    }
    if (assigned < 1.0 && full < n) alpha[size_t(full)] = 1.0 - assigned;
  }

  // gradient of 1/2 a^T K a is K a
  std::vector<double> g(static_cast<size_t>(n), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (int64_t j = 0; j < n; ++j) s += K[size_t(i * n + j)] * alpha[size_t(j)];
    g[size_t(i)] = s;
  }

  const double eps_box = 1e-12;
  double gap = std::numeric_limits<double>::infinity();
  int64_t iter = 0;
  for (; iter < max_iter; ++iter) {
    // i: smallest gradient among coordinates that can grow
    // j: largest gradient among coordinates that can shrink
    int64_t up = -1, down = -1;
    double up_g = std::numeric_limits<double>::infinity();
    double down_g = -std::numeric_limits<double>::infinity();
    for (int64_t k = 0; k < n; ++k) {
      if (alpha[size_t(k)] < box - eps_box && g[size_t(k)] < up_g) {
        up_g = g[size_t(k)];
        up = k;
      }
      if (alpha[size_t(k)] > eps_box && g[size_t(k)] > down_g) {
        down_g = g[size_t(k)];
        down = k;
      }
    }
    gap = down_g - up_g;
    if (up < 0 || down < 0 || gap <= tol) break;

    const double eta = K[size_t(up * n + up)] + K[size_t(down * n + down)] -
                       2.0 * K[size_t(up * n + down)];
    double delta = eta > 1e-12 ? gap / eta
                               : std::min(box - alpha[size_t(up)],
                                          alpha[size_t(down)]);
    delta = std::min({delta, box - alpha[size_t(up)], alpha[size_t(down)]});
    if (delta <= 0.0) break;

    alpha[size_t(up)] += delta;
    alpha[size_t(down)] -= delta;
    for (int64_t k = 0; k < n; ++k) {
      g[size_t(k)] +=
          delta * (K[size_t(k * n + up)] - K[size_t(k * n + down)]);
    }
  }
  if (gap > tol && iter >= max_iter) {
    throw ConvergenceError("ocsvm: KKT gap " + std::to_string(gap) +
                               " above tolerance after " +
                               std::to_string(max_iter) + " iterations",
                           gap);
  }

  // rho: average gradient over free support vectors, else the gap midpoint
  double rho = 0.0;
  int64_t free_count = 0;
  for (int64_t k = 0; k < n; ++k) {
    if (alpha[size_t(k)] > eps_box && alpha[size_t(k)] < box - eps_box) {
      rho += g[size_t(k)];
      ++free_count;
    }
  }
  if (free_count > 0) {
    rho /= double(free_count);
  } else {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (int64_t k = 0; k < n; ++k) {
      if (alpha[size_t(k)] > eps_box) lo = std::max(lo, g[size_t(k)]);
      if (alpha[size_t(k)] < box - eps_box) hi = std::min(hi, g[size_t(k)]);
    }
    if (!std::isfinite(lo)) lo = hi;
    if (!std::isfinite(hi)) hi = lo;
    rho = 0.5 * (lo + hi);
  }

  OcsvmClassModel::ClassSvm out;
  out.rho = rho;
  for (int64_t k = 0; k < n; ++k) {
    if (alpha[size_t(k)] > eps_box) {
      auto r = fm.row(k);
      out.support_vectors.insert(out.support_vectors.end(), r.begin(), r.end());
      out.alphas.push_back(alpha[size_t(k)]);
      ++out.m;
    }
  }
  return out;
}

}  // namespace

OcsvmClassModel fit_ocsvm(const std::vector<FeatureMatrix>& by_class,
                          double nu, double gamma, double tol,
                          int64_t max_iter) {
  if (nu <= 0.0 || nu > 1.0) throw ConfigError("ocsvm: nu must be in (0,1]");
  if (by_class.empty()) throw DataError("ocsvm: no classes");
  OcsvmClassModel model;
  model.nu = nu;
  model.F = by_class[0].F;

  if (gamma <= 0.0) {
    // 1 / (F * mean feature variance) over all classes pooled
    int64_t N = 0;
    std::vector<double> mean(static_cast<size_t>(model.F), 0.0);
    for (const auto& fm : by_class) {
      for (int64_t i = 0; i < fm.n; ++i) {
        auto r = fm.row(i);
        for (int64_t f = 0; f < model.F; ++f) mean[size_t(f)] += r[size_t(f)];
      }
      N += fm.n;
    }
    for (double& v : mean) v /= double(N);
    double var = 0.0;
    for (const auto& fm : by_class) {
      for (int64_t i = 0; i < fm.n; ++i) {
        auto r = fm.row(i);
        for (int64_t f = 0; f < model.F; ++f) {
          const double dv = r[size_t(f)] - mean[size_t(f)];
          var += dv * dv;
        }
      }
    }
    var /= double(N * model.F);
    gamma = var > 1e-12 ? 1.0 / (double(model.F) * var) : 1.0;
  }
  model.gamma = gamma;

  for (const auto& fm : by_class) {
    if (fm.n < 1) throw DataError("ocsvm: empty class");
    if (fm.F != model.F) throw DataError("ocsvm: feature width mismatch");
    model.classes.push_back(fit_class(fm, nu, gamma, tol, max_iter));
  }
  return model;
}

std::vector<double> ocsvm_decision(const OcsvmClassModel& model,
                                   std::span<const double> x) {
  std::vector<double> out;
  for (const auto& cls : model.classes) {
    double s = -cls.rho;
    for (int64_t i = 0; i < cls.m; ++i) {
      std::span<const double> sv{cls.support_vectors.data() + i * model.F,
                                 size_t(model.F)};
      s += cls.alphas[size_t(i)] * rbf(x, sv, model.gamma);
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace tsood
