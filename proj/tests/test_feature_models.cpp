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

#include "doctest.h"
#include "tsood/feature_models.hpp"

using namespace tsood;

namespace {

FeatureMatrix from_rows(const std::vector<std::vector<double>>& rows) {
  FeatureMatrix fm;
  fm.n = int64_t(rows.size());
  fm.F = int64_t(rows[0].size());
  for (const auto& r : rows) {
    fm.values.insert(fm.values.end(), r.begin(), r.end());
  }
  return fm;
}

FeatureMatrix random_blob(int64_t n, int64_t F, Rng& rng, double center = 0.0,
                          double spread = 1.0) {
  FeatureMatrix fm;
  fm.n = n;
  fm.F = F;
  for (int64_t i = 0; i < n * F; ++i) {
    fm.values.push_back(center + spread * rng.normal());
  }
  return fm;
}

}  // namespace

TEST_CASE("jacobi eigensolver matches a closed-form 2x2 case") {
  // [[2,1],[1,2]] has eigenvalues 3 and 1
  std::vector<double> a = {2, 1, 1, 2};
  std::vector<double> vals, vecs;
  jacobi_eigh(a, 2, vals, vecs);
  CHECK(vals[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(vals[1] == doctest::Approx(1.0).epsilon(1e-12));
  // eigenvector rows orthonormal
  const double dot = vecs[0] * vecs[2] + vecs[1] * vecs[3];
  CHECK(std::fabs(dot) < 1e-12);
}

TEST_CASE("spd inverse really inverts") {
  Rng rng(3);
  const int64_t n = 6;
  // A = B B^T + I is SPD
  std::vector<double> b(static_cast<size_t>(n * n));
  for (double& v : b) v = rng.normal();
  std::vector<double> a(static_cast<size_t>(n * n), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      double s = i == j ? 1.0 : 0.0;
      for (int64_t k = 0; k < n; ++k) s += b[size_t(i * n + k)] * b[size_t(j * n + k)];
      a[size_t(i * n + j)] = s;
    }
  }
  auto inv = spd_inverse(a, n);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (int64_t k = 0; k < n; ++k) s += a[size_t(i * n + k)] * inv[size_t(k * n + j)];
      CHECK(std::fabs(s - (i == j ? 1.0 : 0.0)) < 1e-10);
    }
  }
}

TEST_CASE("gaussian: identical samples per class leave only the ridge") {
  FeatureMatrix c0 = from_rows({{1, 2}, {1, 2}, {1, 2}});
  FeatureMatrix c1 = from_rows({{-1, 0}, {-1, 0}});
  auto model = fit_gaussian_tied({c0, c1});
  for (int64_t f = 0; f < 2; ++f) {
    for (int64_t g = 0; g < 2; ++g) {
      CHECK(model.covariance[size_t(f * 2 + g)] == doctest::Approx(0.0));
    }
  }
  // precision is then (lambda I)^-1
  CHECK(model.precision[0] == doctest::Approx(1.0 / model.lambda).epsilon(1e-9));
  CHECK(std::fabs(model.precision[1]) < 1e-9);
}

TEST_CASE("gaussian: symmetric classes have opposite means") {
  Rng rng(5);
  FeatureMatrix c0 = random_blob(40, 3, rng, 0.0, 0.5);
  FeatureMatrix c1 = c0;
  for (double& v : c1.values) v = -v;
  auto model = fit_gaussian_tied({c0, c1});
  for (int64_t f = 0; f < 3; ++f) {
    CHECK(model.means[0][size_t(f)] ==
          doctest::Approx(-model.means[1][size_t(f)]).epsilon(1e-12));
  }
}

TEST_CASE("gaussian: pooled covariance matches the two-pass oracle") {
  Rng rng(7);
  std::vector<FeatureMatrix> classes = {random_blob(12, 4, rng, 1.0),
                                        random_blob(9, 4, rng, -2.0),
                                        random_blob(17, 4, rng, 0.3)};
  auto model = fit_gaussian_tied(classes);
  // oracle: explicit per-class means, then explicit scatter sum / (N - C)
  const int64_t F = 4;
  int64_t N = 0;
  std::vector<double> oracle(static_cast<size_t>(F * F), 0.0);
  for (const auto& fm : classes) {
    std::vector<double> mu(static_cast<size_t>(F), 0.0);
    for (int64_t i = 0; i < fm.n; ++i) {
      for (int64_t f = 0; f < F; ++f) mu[size_t(f)] += fm.row(i)[size_t(f)];
    }
    for (double& v : mu) v /= double(fm.n);
    for (int64_t i = 0; i < fm.n; ++i) {
      for (int64_t f = 0; f < F; ++f) {
        for (int64_t g = 0; g < F; ++g) {
          oracle[size_t(f * F + g)] += (fm.row(i)[size_t(f)] - mu[size_t(f)]) *
                                       (fm.row(i)[size_t(g)] - mu[size_t(g)]);
        }
      }
    }
    N += fm.n;
  }
  for (double& v : oracle) v /= double(N - 3);
  for (size_t i = 0; i < oracle.size(); ++i) {
    CHECK(std::fabs(model.covariance[i] - oracle[i]) < 1e-6);
  }
}

TEST_CASE("gaussian rejects singleton classes") {
  FeatureMatrix c0 = from_rows({{1, 2}});
  FeatureMatrix c1 = from_rows({{0, 0}, {1, 1}});
  CHECK_THROWS_AS((void)fit_gaussian_tied({c0, c1}), DataError);
}

TEST_CASE("mahalanobis: zero at the class mean") {
  Rng rng(9);
  auto model = fit_gaussian_tied({random_blob(20, 3, rng, 1.0),
                                  random_blob(20, 3, rng, -1.0)});
  for (size_t c = 0; c < 2; ++c) {
    auto d = mahalanobis_distance(model, model.means[c]);
    CHECK(d[c] == doctest::Approx(0.0));
  }
}

TEST_CASE("mahalanobis: identity covariance gives squared Euclidean") {
  GaussianClassModel model;
  model.F = 2;
  model.means = {{0.0, 0.0}};
  model.covariance = {1, 0, 0, 1};
  model.precision = {1, 0, 0, 1};
  std::vector<double> x = {3.0, 4.0};
  CHECK(mahalanobis_distance(model, x)[0] == doctest::Approx(25.0));
}

TEST_CASE("mahalanobis: scaling the covariance divides distances") {
  GaussianClassModel model;
  model.F = 2;
  model.means = {{1.0, -1.0}};
  model.covariance = {4, 0, 0, 4};
  model.precision = {0.25, 0, 0, 0.25};
  std::vector<double> x = {3.0, 1.0};
  // distance = ((2)^2 + (2)^2) / 4 = 2
  CHECK(mahalanobis_distance(model, x)[0] == doctest::Approx(2.0));
}

TEST_CASE("pca: retained=1 on full-rank data keeps every component") {
  Rng rng(11);
  auto model = fit_pca({random_blob(30, 4, rng)}, 1.0);
  CHECK(model.classes[0].k == 4);
}

TEST_CASE("pca: data exactly on a line needs one component") {
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 10; ++i) {
    const double t = double(i) - 4.5;
    rows.push_back({2.0 * t, -1.0 * t});
  }
  for (double retained : {0.3, 0.9, 1.0}) {
    auto model = fit_pca({from_rows(rows)}, retained);
    CHECK(model.classes[0].k == 1);
  }
}

TEST_CASE("pca: explained ratios match a closed-form 3x3 eigensolve") {
  // fixed 5x3 matrix; oracle eigenvalues via the analytic cubic for the
  // symmetric covariance
  FeatureMatrix fm = from_rows({{1.0, 0.5, -0.2},
                                {0.2, -0.3, 0.8},
                                {-1.1, 0.4, 0.3},
                                {0.6, -0.9, -0.5},
                                {0.1, 0.7, 0.2}});
  auto model = fit_pca({fm}, 1.0);
  // covariance of centered data
  std::vector<double> mu(3, 0.0);
  for (int64_t i = 0; i < 5; ++i) {
    for (int64_t f = 0; f < 3; ++f) mu[size_t(f)] += fm.row(i)[size_t(f)];
  }
  for (double& v : mu) v /= 5.0;
  double c[3][3] = {};
  for (int64_t i = 0; i < 5; ++i) {
    for (int64_t f = 0; f < 3; ++f) {
      for (int64_t g = 0; g < 3; ++g) {
        c[f][g] += (fm.row(i)[size_t(f)] - mu[size_t(f)]) *
                   (fm.row(i)[size_t(g)] - mu[size_t(g)]) / 4.0;
      }
    }
  }
  // analytic eigenvalues of a symmetric 3x3 (trigonometric form)
  const double p1 = c[0][1] * c[0][1] + c[0][2] * c[0][2] + c[1][2] * c[1][2];
  const double q = (c[0][0] + c[1][1] + c[2][2]) / 3.0;
  const double p2 = (c[0][0] - q) * (c[0][0] - q) +
                    (c[1][1] - q) * (c[1][1] - q) +
                    (c[2][2] - q) * (c[2][2] - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  double bmat[3][3];
  for (int f = 0; f < 3; ++f) {
    for (int g = 0; g < 3; ++g) {
      bmat[f][g] = (c[f][g] - (f == g ? q : 0.0)) / p;
    }
  }
  const double detb =
      bmat[0][0] * (bmat[1][1] * bmat[2][2] - bmat[1][2] * bmat[2][1]) -
      bmat[0][1] * (bmat[1][0] * bmat[2][2] - bmat[1][2] * bmat[2][0]) +
      bmat[0][2] * (bmat[1][0] * bmat[2][1] - bmat[1][1] * bmat[2][0]);
  const double r = std::clamp(detb / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double e1 = q + 2.0 * p * std::cos(phi);
  const double e3 = q + 2.0 * p * std::cos(phi + 2.0943951023931953);
  const double e2 = 3.0 * q - e1 - e3;
  const double total = e1 + e2 + e3;
  REQUIRE(model.classes[0].explained_ratio.size() == 3);
  CHECK(model.classes[0].explained_ratio[0] ==
        doctest::Approx(e1 / total).epsilon(1e-8));
  CHECK(model.classes[0].explained_ratio[1] ==
        doctest::Approx(e2 / total).epsilon(1e-8));
  CHECK(model.classes[0].explained_ratio[2] ==
        doctest::Approx(e3 / total).epsilon(1e-8));
}

TEST_CASE("pca: component rows are orthonormal") {
  Rng rng(13);
  for (int64_t n : {6, 40}) {  // exercises both gram and covariance routes
    auto model = fit_pca({random_blob(n, 8, rng)}, 0.99);
    const auto& cls = model.classes[0];
    for (int64_t a = 0; a < cls.k; ++a) {
      for (int64_t b = 0; b < cls.k; ++b) {
        double dot = 0.0;
        for (int64_t f = 0; f < 8; ++f) {
          dot += cls.components[size_t(a * 8 + f)] *
                 cls.components[size_t(b * 8 + f)];
        }
        CHECK(std::fabs(dot - (a == b ? 1.0 : 0.0)) < 1e-5);
      }
    }
  }
}

TEST_CASE("reconstruction error: zero in-span, squared distance off-span") {
  // points on the x-axis line through origin
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 8; ++i) rows.push_back({double(i - 3), 0.0});
  auto model = fit_pca({from_rows(rows)}, 1.0);
  REQUIRE(model.classes[0].k == 1);
  std::vector<double> on = {2.5, 0.0};
  CHECK(reconstruction_error(model, on)[0] == doctest::Approx(0.0));
  std::vector<double> off = {1.0, 3.0};  // orthogonal distance 3
  CHECK(reconstruction_error(model, off)[0] == doctest::Approx(9.0).epsilon(1e-9));
}

TEST_CASE("reconstruction error: full-rank subspace reconstructs exactly") {
  Rng rng(15);
  auto fm = random_blob(30, 4, rng);
  auto model = fit_pca({fm}, 1.0);
  REQUIRE(model.classes[0].k == 4);
  for (int64_t i = 0; i < 5; ++i) {
    CHECK(reconstruction_error(model, fm.row(i))[0] < 1e-12);
  }
}

TEST_CASE("reconstruction error: invariant under joint rotation") {
  Rng rng(17);
  auto fm = random_blob(20, 2, rng);
  auto model = fit_pca({fm}, 0.6);
  std::vector<double> x = {1.7, -0.4};
  const double before = reconstruction_error(model, x)[0];
  // rotate data and probe by the same angle, refit
  const double a = 0.73;
  auto rot = [&](std::span<const double> v) {
    return std::vector<double>{std::cos(a) * v[0] - std::sin(a) * v[1],
                               std::sin(a) * v[0] + std::cos(a) * v[1]};
  };
  FeatureMatrix fm2;
  fm2.n = fm.n;
  fm2.F = 2;
  for (int64_t i = 0; i < fm.n; ++i) {
    auto r = rot(fm.row(i));
    fm2.values.insert(fm2.values.end(), r.begin(), r.end());
  }
  auto model2 = fit_pca({fm2}, 0.6);
  const double after = reconstruction_error(model2, rot(x))[0];
  CHECK(before == doctest::Approx(after).epsilon(1e-8));
}

TEST_CASE("isolation forest: score formula fixed point at c(psi)") {
  for (int64_t psi : {8, 64, 256}) {
    CHECK(if_score_from_mean_path(average_path_length(psi), psi) ==
          doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("average path length values") {
  CHECK(average_path_length(1) == 0.0);
  CHECK(average_path_length(2) == 1.0);
  // c(256) commonly quoted near 10.24
  CHECK(average_path_length(256) == doctest::Approx(10.244770920116851).epsilon(1e-9));
}

TEST_CASE("isolation forest: far outlier outranks every inlier") {
  Rng rng(19);
  FeatureMatrix blob = random_blob(128, 2, rng, 0.0, 0.5);
  auto model = fit_isolation_forest({blob}, 100, 64, 41);
  std::vector<double> outlier = {8.0, -7.5};
  const double outlier_score = if_anomaly_score(model, outlier)[0];
  double max_inlier = 0.0;
  for (int64_t i = 0; i < blob.n; ++i) {
    max_inlier = std::max(max_inlier, if_anomaly_score(model, blob.row(i))[0]);
  }
  CHECK(outlier_score > max_inlier);
  CHECK(outlier_score > 0.0);
  CHECK(outlier_score < 1.0);
}

TEST_CASE("isolation forest: deterministic per seed") {
  Rng rng(21);
  FeatureMatrix blob = random_blob(50, 3, rng);
  auto m1 = fit_isolation_forest({blob}, 20, 32, 7);
  auto m2 = fit_isolation_forest({blob}, 20, 32, 7);
  std::vector<double> probe = {0.3, -0.7, 1.1};
  CHECK(if_anomaly_score(m1, probe)[0] == if_anomaly_score(m2, probe)[0]);
  auto m3 = fit_isolation_forest({blob}, 20, 32, 8);
  CHECK(if_anomaly_score(m1, probe)[0] !=
        if_anomaly_score(m3, probe)[0]);
}

TEST_CASE("ocsvm: single training point scores itself highest") {
  FeatureMatrix fm = from_rows({{0.5, -0.25}});
  auto model = fit_ocsvm({fm}, 0.5, 1.0);
  std::vector<double> p = {0.5, -0.25};
  const double at_p = ocsvm_decision(model, p)[0];
  for (auto q : {std::vector<double>{1.0, 0.0}, {0.0, 0.0}, {-3.0, 2.0}}) {
    CHECK(at_p > ocsvm_decision(model, q)[0]);
  }
}

TEST_CASE("ocsvm: nu bounds the training outlier fraction") {
  Rng rng(23);
  FeatureMatrix blob = random_blob(100, 2, rng, 0.0, 1.0);
  const double nu = 0.3;
  auto model = fit_ocsvm({blob}, nu, 0.5);
  int64_t outliers = 0;
  for (int64_t i = 0; i < blob.n; ++i) {
    if (ocsvm_decision(model, blob.row(i))[0] < 0.0) ++outliers;
  }
  CHECK(double(outliers) / double(blob.n) <= nu + 2.0 / double(blob.n));
}

TEST_CASE("ocsvm: duplicating the training set leaves the decision alone") {
  Rng rng(25);
  FeatureMatrix blob = random_blob(20, 2, rng, 0.0, 0.8);
  FeatureMatrix doubled;
  doubled.n = 40;
  doubled.F = 2;
  doubled.values = blob.values;
  doubled.values.insert(doubled.values.end(), blob.values.begin(),
                        blob.values.end());
  // tight tolerance so both solves park at the same optimum
  auto m1 = fit_ocsvm({blob}, 0.4, 0.7, 1e-6);
  auto m2 = fit_ocsvm({doubled}, 0.4, 0.7, 1e-6);
  Rng prng(27);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> probe = {prng.normal() * 1.5, prng.normal() * 1.5};
    CHECK(std::fabs(ocsvm_decision(m1, probe)[0] -
                    ocsvm_decision(m2, probe)[0]) < 1e-4);
  }
}

TEST_CASE("ocsvm: flags a far outlier as negative") {
  Rng rng(29);
  FeatureMatrix blob = random_blob(60, 2, rng, 0.0, 0.5);
  auto model = fit_ocsvm({blob}, 0.1, 0.0);  // auto gamma
  std::vector<double> far = {10.0, 10.0};
  CHECK(ocsvm_decision(model, far)[0] < 0.0);
}

TEST_CASE("scores are permutation invariant in training order") {
  Rng rng(31);
  FeatureMatrix blob = random_blob(24, 3, rng);
  FeatureMatrix shuffled;
  shuffled.n = blob.n;
  shuffled.F = blob.F;
  std::vector<int64_t> order(static_cast<size_t>(blob.n));
  for (int64_t i = 0; i < blob.n; ++i) order[size_t(i)] = i;
  Rng srng(33);
  srng.shuffle(order);
  for (int64_t i : order) {
    auto r = blob.row(i);
    shuffled.values.insert(shuffled.values.end(), r.begin(), r.end());
  }
  std::vector<double> probe = {0.2, -0.4, 0.9};

  auto g1 = fit_gaussian_tied({blob});
  auto g2 = fit_gaussian_tied({shuffled});
  CHECK(mahalanobis_distance(g1, probe)[0] ==
        doctest::Approx(mahalanobis_distance(g2, probe)[0]).epsilon(1e-9));

  auto p1 = fit_pca({blob}, 0.9);
  auto p2 = fit_pca({shuffled}, 0.9);
  CHECK(reconstruction_error(p1, probe)[0] ==
        doctest::Approx(reconstruction_error(p2, probe)[0]).epsilon(1e-7));

  auto s1 = fit_ocsvm({blob}, 0.3, 0.5, 1e-6);
  auto s2 = fit_ocsvm({shuffled}, 0.3, 0.5, 1e-6);
  CHECK(ocsvm_decision(s1, probe)[0] ==
        doctest::Approx(ocsvm_decision(s2, probe)[0]).epsilon(1e-4));
}
