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
#include <numeric>

#include "tsood/feature_models.hpp"

namespace tsood {

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

void jacobi_eigh(std::span<const double> sym, int64_t n,
                 std::vector<double>& eigvals, std::vector<double>& eigvecs) {
  std::vector<double> a(sym.begin(), sym.end());
  std::vector<double> v(static_cast<size_t>(n * n), 0.0);
  for (int64_t i = 0; i < n; ++i) v[size_t(i * n + i)] = 1.0;

  auto off_diag = [&] {
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      for (int64_t j = i + 1; j < n; ++j) s += a[size_t(i * n + j)] * a[size_t(i * n + j)];
    }
    return s;
  };

  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps && off_diag() > 1e-24; ++sweep) {
    for (int64_t p = 0; p < n - 1; ++p) {
      for (int64_t q = p + 1; q < n; ++q) {
        const double apq = a[size_t(p * n + q)];
        if (std::fabs(apq) < 1e-300) continue;
        const double app = a[size_t(p * n + p)];
        const double aqq = a[size_t(q * n + q)];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int64_t k = 0; k < n; ++k) {
          const double akp = a[size_t(k * n + p)];
          const double akq = a[size_t(k * n + q)];
          a[size_t(k * n + p)] = c * akp - s * akq;
          a[size_t(k * n + q)] = s * akp + c * akq;
        }
        for (int64_t k = 0; k < n; ++k) {
          const double apk = a[size_t(p * n + k)];
          const double aqk = a[size_t(q * n + k)];
          a[size_t(p * n + k)] = c * apk - s * aqk;
          a[size_t(q * n + k)] = s * apk + c * aqk;
        }
        for (int64_t k = 0; k < n; ++k) {
          const double vkp = v[size_t(k * n + p)];
          const double vkq = v[size_t(k * n + q)];
          v[size_t(k * n + p)] = c * vkp - s * vkq;
          v[size_t(k * n + q)] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int64_t i, int64_t j) {
    return a[size_t(i * n + i)] > a[size_t(j * n + j)];
  });

  eigvals.resize(size_t(n));
  eigvecs.assign(static_cast<size_t>(n * n), 0.0);
  for (int64_t r = 0; r < n; ++r) {
    const int64_t src = order[size_t(r)];
    eigvals[size_t(r)] = a[size_t(src * n + src)];
    for (int64_t k = 0; k < n; ++k) {
      eigvecs[size_t(r * n + k)] = v[size_t(k * n + src)];  // row = eigenvector
    }
  }
}

std::vector<double> spd_inverse(std::span<const double> a, int64_t n) {
  // Cholesky factorization a = L L^T
  std::vector<double> L(static_cast<size_t>(n * n), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j <= i; ++j) {
      double s = a[size_t(i * n + j)];
      for (int64_t k = 0; k < j; ++k) {
        s -= L[size_t(i * n + k)] * L[size_t(j * n + k)];
      }
      if (i == j) {
        if (s <= 0.0) throw NumericError("spd_inverse: matrix not positive definite");
        L[size_t(i * n + i)] = std::sqrt(s);
      } else {
        L[size_t(i * n + j)] = s / L[size_t(j * n + j)];
      }
    }
  }
  // solve A X = I column by column
  std::vector<double> inv(static_cast<size_t>(n * n), 0.0);
  std::vector<double> y(static_cast<size_t>(n));
  for (int64_t col = 0; col < n; ++col) {
    for (int64_t i = 0; i < n; ++i) {
      double s = i == col ? 1.0 : 0.0;
      for (int64_t k = 0; k < i; ++k) s -= L[size_t(i * n + k)] * y[size_t(k)];
      y[size_t(i)] = s / L[size_t(i * n + i)];
    }
    for (int64_t i = n - 1; i >= 0; --i) {
      double s = y[size_t(i)];
      for (int64_t k = i + 1; k < n; ++k) {
        s -= L[size_t(k * n + i)] * inv[size_t(k * n + col)];
      }
      inv[size_t(i * n + col)] = s / L[size_t(i * n + i)];
    }
  }
  return inv;
}

// ---------------------------------------------------------------------------
// Tied-covariance Gaussians
// ---------------------------------------------------------------------------

GaussianClassModel fit_gaussian_tied(
    const std::vector<FeatureMatrix>& by_class) {
  if (by_class.empty()) throw DataError("fit_gaussian_tied: no classes");
  const int64_t F = by_class[0].F;
  int64_t N = 0;
  for (const auto& fm : by_class) {
    if (fm.n < 2) {
      throw DataError("fit_gaussian_tied: class needs >= 2 samples, got " +
                      std::to_string(fm.n));
    }
    if (fm.F != F) throw DataError("fit_gaussian_tied: feature width mismatch");
    N += fm.n;
  }
  const int64_t C = int64_t(by_class.size());

  GaussianClassModel model;
  model.F = F;
  model.covariance.assign(static_cast<size_t>(F * F), 0.0);
  for (const auto& fm : by_class) {
    std::vector<double> mu(static_cast<size_t>(F), 0.0);
    for (int64_t i = 0; i < fm.n; ++i) {
      auto r = fm.row(i);
      for (int64_t f = 0; f < F; ++f) mu[size_t(f)] += r[size_t(f)];
    }
    for (double& v : mu) v /= double(fm.n);
    for (int64_t i = 0; i < fm.n; ++i) {
      auto r = fm.row(i);
      for (int64_t f = 0; f < F; ++f) {
        const double df = r[size_t(f)] - mu[size_t(f)];
        for (int64_t g = 0; g <= f; ++g) {
          model.covariance[size_t(f * F + g)] +=
              df * (r[size_t(g)] - mu[size_t(g)]);
        }
      }
    }
    model.means.push_back(std::move(mu));
  }
  const double denom = double(N - C);
  if (denom <= 0.0) throw DataError("fit_gaussian_tied: N must exceed C");
  for (int64_t f = 0; f < F; ++f) {
    for (int64_t g = 0; g <= f; ++g) {
      const double v = model.covariance[size_t(f * F + g)] / denom;
      model.covariance[size_t(f * F + g)] = v;
      model.covariance[size_t(g * F + f)] = v;
    }
  }

  double trace = 0.0;
  for (int64_t f = 0; f < F; ++f) trace += model.covariance[size_t(f * F + f)];
  model.lambda = 1e-3 * trace / double(F);
  if (model.lambda <= 0.0) model.lambda = 1e-8;  // all-identical features

  std::vector<double> reg = model.covariance;
  for (int64_t f = 0; f < F; ++f) reg[size_t(f * F + f)] += model.lambda;
  model.precision = spd_inverse(reg, F);
  return model;
}

std::vector<double> mahalanobis_distance(const GaussianClassModel& model,
                                         std::span<const double> x) {
  const int64_t F = model.F;
  std::vector<double> out;
  std::vector<double> diff(static_cast<size_t>(F));
  for (const auto& mu : model.means) {
    for (int64_t f = 0; f < F; ++f) diff[size_t(f)] = x[size_t(f)] - mu[size_t(f)];
    double acc = 0.0;
    for (int64_t f = 0; f < F; ++f) {
      double row = 0.0;
      for (int64_t g = 0; g < F; ++g) {
        row += model.precision[size_t(f * F + g)] * diff[size_t(g)];
      }
      acc += diff[size_t(f)] * row;
    }
    out.push_back(std::max(acc, 0.0));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-class PCA
// ---------------------------------------------------------------------------

namespace {

PcaClassModel::ClassPca fit_class_pca(const FeatureMatrix& fm,
                                      double retained) {
  const int64_t n = fm.n, F = fm.F;
  PcaClassModel::ClassPca out;
  out.mean.assign(static_cast<size_t>(F), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    auto r = fm.row(i);
    for (int64_t f = 0; f < F; ++f) out.mean[size_t(f)] += r[size_t(f)];
  }
  for (double& v : out.mean) v /= double(n);

  std::vector<double> centered(static_cast<size_t>(n * F));
  for (int64_t i = 0; i < n; ++i) {
    auto r = fm.row(i);
    for (int64_t f = 0; f < F; ++f) {
      centered[size_t(i * F + f)] = r[size_t(f)] - out.mean[size_t(f)];
    }
  }

  std::vector<double> eigvals;
  std::vector<double> components;  // candidate rows, F wide
  const double scale = 1.0 / double(n - 1);

  if (n - 1 >= F) {
    // covariance route: F x F
    std::vector<double> cov(static_cast<size_t>(F * F), 0.0);
    for (int64_t i = 0; i < n; ++i) {
      const double* r = centered.data() + i * F;
      for (int64_t f = 0; f < F; ++f) {
        for (int64_t g = 0; g <= f; ++g) {
          cov[size_t(f * F + g)] += r[f] * r[g];
        }
      }
    }
    for (int64_t f = 0; f < F; ++f) {
      for (int64_t g = 0; g <= f; ++g) {
        const double v = cov[size_t(f * F + g)] * scale;
        cov[size_t(f * F + g)] = v;
        cov[size_t(g * F + f)] = v;
      }
    }
    jacobi_eigh(cov, F, eigvals, components);
  } else {
    // Gram route: eigenvectors of X X^T map back through X^T
    std::vector<double> gram(static_cast<size_t>(n * n), 0.0);
    for (int64_t i = 0; i < n; ++i) {
      for (int64_t j = 0; j <= i; ++j) {
        double s = 0.0;
        for (int64_t f = 0; f < F; ++f) {
          s += centered[size_t(i * F + f)] * centered[size_t(j * F + f)];
        }
        gram[size_t(i * n + j)] = s * scale;
        gram[size_t(j * n + i)] = s * scale;
      }
    }
    std::vector<double> gvals, gvecs;
    jacobi_eigh(gram, n, gvals, gvecs);
    eigvals = gvals;  // same nonzero spectrum; F - n zeros implied
    components.assign(static_cast<size_t>(n * F), 0.0);
    for (int64_t r = 0; r < n; ++r) {
      const double lam = gvals[size_t(r)];
      if (lam <= 0.0) continue;
      const double inv = 1.0 / std::sqrt(lam * double(n - 1));
      for (int64_t f = 0; f < F; ++f) {
        double s = 0.0;
        for (int64_t i = 0; i < n; ++i) {
          s += gvecs[size_t(r * n + i)] * centered[size_t(i * F + f)];
        }
        components[size_t(r * F + f)] = s * inv;
      }
    }
  }

  double total = 0.0;
  for (double& v : eigvals) {
    if (v < 0.0) v = 0.0;  // numerical dust
    total += v;
  }
  out.explained_ratio.resize(eigvals.size());
  for (size_t i = 0; i < eigvals.size(); ++i) {
    out.explained_ratio[i] = total > 0.0 ? eigvals[i] / total : 0.0;
  }

  const int64_t max_k = int64_t(eigvals.size());
  double cum = 0.0;
  int64_t k = 0;
  const double target = retained * total * (1.0 - 1e-12);
  while (k < max_k && (cum < target || k == 0)) {
    if (eigvals[size_t(k)] <= 0.0) break;  // rank exhausted
    cum += eigvals[size_t(k)];
    ++k;
  }
  out.k = std::max<int64_t>(k, 1);
  out.components.assign(components.begin(),
                        components.begin() + out.k * F);
  return out;
}

}  // namespace

PcaClassModel fit_pca(const std::vector<FeatureMatrix>& by_class,
                      double retained) {
  if (retained <= 0.0 || retained > 1.0) {
    throw ConfigError("fit_pca: retained variance must be in (0,1]");
  }
  if (by_class.empty()) throw DataError("fit_pca: no classes");
  PcaClassModel model;
  model.F = by_class[0].F;
  model.retained = retained;
  for (const auto& fm : by_class) {
    if (fm.n < 2) {
      throw DataError("fit_pca: class needs >= 2 samples, got " +
                      std::to_string(fm.n));
    }
    if (fm.F != model.F) throw DataError("fit_pca: feature width mismatch");
    model.classes.push_back(fit_class_pca(fm, retained));
  }
  return model;
}

std::vector<double> reconstruction_error(const PcaClassModel& model,
                                         std::span<const double> x) {
  const int64_t F = model.F;
  std::vector<double> out;
  std::vector<double> resid(static_cast<size_t>(F));
  for (const auto& cls : model.classes) {
    for (int64_t f = 0; f < F; ++f) {
      resid[size_t(f)] = x[size_t(f)] - cls.mean[size_t(f)];
    }
    // residual minus its projection onto the component rows
    std::vector<double> proj(static_cast<size_t>(F), 0.0);
    for (int64_t r = 0; r < cls.k; ++r) {
      const double* v = cls.components.data() + r * F;
      double dot = 0.0;
      for (int64_t f = 0; f < F; ++f) dot += v[f] * resid[size_t(f)];
      for (int64_t f = 0; f < F; ++f) proj[size_t(f)] += dot * v[f];
    }
    double err = 0.0;
    for (int64_t f = 0; f < F; ++f) {
      const double dv = resid[size_t(f)] - proj[size_t(f)];
      err += dv * dv;
    }
    out.push_back(err);
  }
  return out;
}

}  // namespace tsood
