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

#ifndef TSOOD_FEATURE_MODELS_HPP_
#define TSOOD_FEATURE_MODELS_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "tsood/common.hpp"

namespace tsood {

/// Row-major n x F feature block (float64; fitted statistics stay in
/// double precision).
struct FeatureMatrix {
  std::vector<double> values;
  int64_t n = 0;
  int64_t F = 0;

  std::span<const double> row(int64_t i) const {
    return {values.data() + size_t(i * F), size_t(F)};
  }
  void push_row(std::span<const float> r) {
    for (float v : r) values.push_back(double(v));
    ++n;
  }
};

// ---------------------------------------------------------------------------
// Dense symmetric linear algebra (double precision)
// ---------------------------------------------------------------------------

/// Cyclic Jacobi eigendecomposition of a symmetric n x n matrix.
/// Eigenvalues descend; eigvecs row i is the eigenvector of eigvals[i].
void jacobi_eigh(std::span<const double> sym, int64_t n,
                 std::vector<double>& eigvals, std::vector<double>& eigvecs);

/// Inverse of a symmetric positive definite matrix via Cholesky.
std::vector<double> spd_inverse(std::span<const double> a, int64_t n);

// ---------------------------------------------------------------------------
// Class-conditional Gaussians with tied covariance
// ---------------------------------------------------------------------------

struct GaussianClassModel {
  std::vector<std::vector<double>> means;  // C x F
  std::vector<double> covariance;          // F x F pooled within-class
  std::vector<double> precision;           // (covariance + lambda I)^-1
  double lambda = 0.0;
  int64_t F = 0;
};

/// Pooled covariance divides by N - C; regularization lambda =
/// 1e-3 * trace / F. Needs >= 2 samples per class.
GaussianClassModel fit_gaussian_tied(
    const std::vector<FeatureMatrix>& by_class);

/// Squared Mahalanobis distance to each class mean.
std::vector<double> mahalanobis_distance(const GaussianClassModel& model,
                                         std::span<const double> x);

// ---------------------------------------------------------------------------
// Per-class PCA subspaces
// ---------------------------------------------------------------------------

struct PcaClassModel {
  struct ClassPca {
    std::vector<double> mean;        // F
    std::vector<double> components;  // k x F orthonormal rows
    int64_t k = 0;
    std::vector<double> explained_ratio;  // all eigenvalues / total
  };
  std::vector<ClassPca> classes;
  int64_t F = 0;
  double retained = 0.97;
};

/// k_c = smallest k whose cumulative explained variance reaches `retained`.
PcaClassModel fit_pca(const std::vector<FeatureMatrix>& by_class,
                      double retained);

/// Squared distance from x to each class's principal subspace.
std::vector<double> reconstruction_error(const PcaClassModel& model,
                                         std::span<const double> x);

// ---------------------------------------------------------------------------
// Per-class isolation forests
// ---------------------------------------------------------------------------

struct IsolationTree {
  struct Node {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int64_t size = 0;  // samples that reached this node (leaves)
  };
  std::vector<Node> nodes;  // nodes[0] is the root
};

struct IsolationForestModel {
  struct ClassForest {
    std::vector<IsolationTree> trees;
    int64_t psi = 0;
  };
  std::vector<ClassForest> classes;
  int64_t n_trees = 100;
  int64_t F = 0;
};

/// Average unsuccessful-search path length c(m) = 2 H(m-1) - 2(m-1)/m.
double average_path_length(int64_t m);

/// 2^(-mean_path / c(psi)); 0.5 exactly when mean_path == c(psi).
double if_score_from_mean_path(double mean_path, int64_t psi);

IsolationForestModel fit_isolation_forest(
    const std::vector<FeatureMatrix>& by_class, int64_t n_trees, int64_t psi,
    uint64_t seed);

/// Anomaly score in (0,1) against each class forest.
std::vector<double> if_anomaly_score(const IsolationForestModel& model,
                                     std::span<const double> x);

// ---------------------------------------------------------------------------
// Per-class one-class SVMs (RBF)
// ---------------------------------------------------------------------------

struct OcsvmClassModel {
  struct ClassSvm {
    std::vector<double> support_vectors;  // flat m x F
    std::vector<double> alphas;           // m
    double rho = 0.0;
    int64_t m = 0;
  };
  std::vector<ClassSvm> classes;
  double nu = 0.1;
  double gamma = 0.0;
  int64_t F = 0;
};

/// Solves min 1/2 a^T K a with 0 <= a_i <= 1/(nu n), sum a = 1 by pairwise
/// working-set updates until the KKT gap max_{a_j>0} g_j - min_{a_i<C} g_i
/// drops below tol. gamma <= 0 selects 1 / (F * mean feature variance).
OcsvmClassModel fit_ocsvm(const std::vector<FeatureMatrix>& by_class,
                          double nu, double gamma, double tol = 1e-3,
                          int64_t max_iter = 100000);

/// decision(x) = sum_i alpha_i K(x, x_i) - rho for each class; negative
/// outside the estimated support.
std::vector<double> ocsvm_decision(const OcsvmClassModel& model,
                                   std::span<const double> x);

}  // namespace tsood

#endif  // TSOOD_FEATURE_MODELS_HPP_
