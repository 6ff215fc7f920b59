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
#include <map>

#include "doctest.h"
#include "tsood/augment.hpp"
#include "tsood/common.hpp"

using namespace tsood;

namespace {

std::vector<float> ramp(int64_t d, int64_t L) {
  std::vector<float> v(size_t(d * L));
  for (int64_t j = 0; j < d; ++j) {
    for (int64_t t = 0; t < L; ++t) v[size_t(j * L + t)] = float(t + j);
  }
  return v;
}

std::vector<float> random_series(int64_t d, int64_t L, Rng& rng) {
  std::vector<float> v(size_t(d * L));
  for (float& x : v) x = float(rng.normal());
  return v;
}

double max_diff(const std::vector<float>& a, const std::vector<float>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::fabs(double(a[i]) - double(b[i])));
  }
  return m;
}

}  // namespace

TEST_CASE("jitter: sigma zero is the identity") {
  Rng rng(1);
  auto x = ramp(2, 10);
  Rng r2(5);
  CHECK(jitter({x, 2, 10}, 0.0, r2) == x);
}

TEST_CASE("jitter: empirical noise std tracks sigma") {
  Rng data_rng(2);
  auto x = random_series(8, 128, data_rng);  // 1024 points
  const double sigma = 0.3;
  Rng rng(33);
  auto y = jitter({x, 8, 128}, sigma, rng);
  double acc = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double dv = double(y[i]) - double(x[i]);
    acc += dv * dv;
  }
  const double sd = std::sqrt(acc / double(x.size()));
  CHECK(sd > sigma * 0.8);
  CHECK(sd < sigma * 1.2);
}

TEST_CASE("jitter: same seed gives identical noise") {
  Rng data_rng(3);
  auto x = random_series(2, 30, data_rng);
  Rng a(7), b(7);
  CHECK(jitter({x, 2, 30}, 0.1, a) == jitter({x, 2, 30}, 0.1, b));
}

TEST_CASE("permutation: one segment is the identity") {
  Rng data_rng(4);
  auto x = random_series(3, 11, data_rng);
  Rng rng(9);
  CHECK(permute_segments({x, 3, 11}, 1, rng) == x);
}

TEST_CASE("permutation: multiset of values preserved per channel") {
  Rng data_rng(5);
  auto x = random_series(2, 17, data_rng);
  Rng rng(10);
  auto y = permute_segments({x, 2, 17}, 4, rng);
  for (int64_t j = 0; j < 2; ++j) {
    std::vector<float> a(x.begin() + j * 17, x.begin() + (j + 1) * 17);
    std::vector<float> b(y.begin() + j * 17, y.begin() + (j + 1) * 17);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }
}

TEST_CASE("permutation: L=4 n=2 produces one of the two chunk orders") {
  std::vector<float> x = {1, 2, 3, 4};
  bool saw_swap = false, saw_id = false;
  for (uint64_t seed = 0; seed < 32; ++seed) {
    Rng rng(seed);
    auto y = permute_segments({x, 1, 4}, 2, rng);
    if (y == std::vector<float>{3, 4, 1, 2}) {
      saw_swap = true;
    } else if (y == x) {
      saw_id = true;
    } else {
      FAIL("unexpected permutation output");
    }
  }
  CHECK(saw_swap);
  CHECK(saw_id);
}

TEST_CASE("spline: interpolates its knots") {
  NaturalCubicSpline s({0.0, 1.5, 3.0, 4.0}, {2.0, -1.0, 0.5, 2.5});
  CHECK(std::fabs(s.evaluate(0.0) - 2.0) < 1e-9);
  CHECK(std::fabs(s.evaluate(1.5) + 1.0) < 1e-9);
  CHECK(std::fabs(s.evaluate(3.0) - 0.5) < 1e-9);
  CHECK(std::fabs(s.evaluate(4.0) - 2.5) < 1e-9);
}

TEST_CASE("spline: hand-solved 3-knot natural spline value") {
  // knots (0,0),(1,1),(2,0): interior second derivative solves to -3,
  // giving s(0.5) = 1.5*0.5 - 0.5*0.5^3 = 0.6875
  NaturalCubicSpline s({0.0, 1.0, 2.0}, {0.0, 1.0, 0.0});
  CHECK(s.evaluate(0.5) == doctest::Approx(0.6875).epsilon(1e-12));
}

TEST_CASE("magnitude warp: sigma zero is the identity") {
  Rng data_rng(6);
  auto x = random_series(2, 25, data_rng);
  Rng rng(11);
  auto y = magnitude_warp({x, 2, 25}, 0.0, 4, rng);
  CHECK(y == x);
}

TEST_CASE("magnitude warp: channels get independent splines") {
  std::vector<float> x(size_t(2 * 16), 1.0f);
  Rng rng(12);
  auto y = magnitude_warp({x, 2, 16}, 0.5, 4, rng);
  std::vector<float> c0(y.begin(), y.begin() + 16);
  std::vector<float> c1(y.begin() + 16, y.end());
  CHECK(c0 != c1);
}

TEST_CASE("window warp: scale one is a no-op") {
  Rng data_rng(7);
  auto x = random_series(2, 40, data_rng);
  std::vector<double> scales = {1.0};
  Rng rng(13);
  auto y = window_warp({x, 2, 40}, 0.25, scales, rng);
  CHECK(max_diff(x, y) < 1e-6);
}

TEST_CASE("window warp: output length always L") {
  Rng data_rng(8);
  std::vector<double> scales = {0.5, 2.0};
  for (int trial = 0; trial < 50; ++trial) {
    auto x = random_series(1, 23, data_rng);
    Rng rng(static_cast<uint64_t>(trial));
    auto y = window_warp({x, 1, 23}, 0.3, scales, rng);
    CHECK(y.size() == 23);
  }
}

TEST_CASE("window warp: constant series stays constant") {
  std::vector<float> x(size_t(30), 4.25f);
  std::vector<double> scales = {0.5, 2.0};
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    auto y = window_warp({x, 1, 30}, 0.2, scales, rng);
    for (float v : y) CHECK(v == doctest::Approx(4.25f).epsilon(1e-7));
  }
}

TEST_CASE("crop/resize: ratio one is the identity") {
  Rng data_rng(9);
  auto x = random_series(3, 19, data_rng);
  Rng rng(14);
  CHECK(max_diff(crop_resize({x, 3, 19}, 1.0, rng), x) == 0.0);
}

TEST_CASE("crop/resize: linear ramp stays affine") {
  auto x = ramp(1, 40);
  Rng rng(15);
  auto y = crop_resize({x, 1, 40}, 0.6, rng);
  REQUIRE(y.size() == 40);
  for (size_t t = 2; t < y.size(); ++t) {
    const double second_diff =
        double(y[t]) - 2.0 * double(y[t - 1]) + double(y[t - 2]);
    CHECK(std::fabs(second_diff) < 1e-4);
  }
}

TEST_CASE("flip reverses and is an involution") {
  std::vector<float> x = {1, 2, 3};
  auto y = flip({x, 1, 3});
  CHECK(y == std::vector<float>{3, 2, 1});
  auto z = flip({y, 1, 3});
  CHECK(z == x);
  std::vector<float> pal = {1, 5, 1};
  CHECK(flip({pal, 1, 3}) == pal);
}

TEST_CASE("time mask: ratio zero is the identity") {
  Rng data_rng(10);
  auto x = random_series(2, 12, data_rng);
  Rng rng(16);
  CHECK(time_mask({x, 2, 12}, 0.0, rng) == x);
}

TEST_CASE("time mask: zeroes exactly floor(ratio*L) contiguous columns") {
  Rng data_rng(11);
  auto x = random_series(2, 20, data_rng);
  for (float& v : x) v += (v >= 0 ? 1.0f : -1.0f);  // keep values nonzero
  Rng rng(17);
  auto y = time_mask({x, 2, 20}, 0.35, rng);
  const int64_t expect = int64_t(std::floor(0.35 * 20));  // 7
  std::vector<int64_t> zero_cols;
  for (int64_t t = 0; t < 20; ++t) {
    bool all_zero = true;
    for (int64_t j = 0; j < 2; ++j) {
      if (y[size_t(j * 20 + t)] != 0.0f) all_zero = false;
    }
    if (all_zero) zero_cols.push_back(t);
  }
  REQUIRE(int64_t(zero_cols.size()) == expect);
  for (size_t i = 1; i < zero_cols.size(); ++i) {
    CHECK(zero_cols[i] == zero_cols[i - 1] + 1);  // contiguous
  }
  Rng r2(17);
  CHECK(time_mask({x, 2, 20}, 0.35, r2) == y);  // same seed, same mask
}

TEST_CASE("apply dispatches every kind and preserves shape") {
  Rng data_rng(12);
  const int64_t d = 3, L = 21;
  auto x = random_series(d, L, data_rng);
  for (AugKind kind :
       {AugKind::Jitter, AugKind::Permutation, AugKind::MagnitudeWarp,
        AugKind::WindowWarp, AugKind::Resize, AugKind::Flip,
        AugKind::TimeMask}) {
    AugmentationSpec spec;
    spec.kind = kind;
    auto y = apply_augmentation(spec, {x, d, L}, 99);
    CHECK(y.size() == x.size());
    auto y2 = apply_augmentation(spec, {x, d, L}, 99);
    CHECK(y == y2);  // determinism
    auto y3 = apply_augmentation(spec, {x, d, L}, 100);
    if (kind != AugKind::Flip) CHECK(y != y3);
  }
}

TEST_CASE("apply: flip spec reverses, jitter sigma=0 is identity") {
  std::vector<float> x = {1, 2, 3, 4};
  AugmentationSpec spec;
  spec.kind = AugKind::Flip;
  CHECK(apply_augmentation(spec, {x, 1, 4}, 1) ==
        std::vector<float>{4, 3, 2, 1});
  spec.kind = AugKind::Jitter;
  spec.sigma = 0.0;
  CHECK(apply_augmentation(spec, {x, 1, 4}, 1) == x);
}

TEST_CASE("unknown augmentation kind string is a config error") {
  CHECK_THROWS_AS((void)aug_kind_from_string("mixup"), ConfigError);
}

TEST_CASE("string round trip for every kind") {
  for (AugKind kind :
       {AugKind::Jitter, AugKind::Permutation, AugKind::MagnitudeWarp,
        AugKind::WindowWarp, AugKind::Resize, AugKind::Flip,
        AugKind::TimeMask}) {
    CHECK(aug_kind_from_string(aug_kind_to_string(kind)) == kind);
  }
}

TEST_CASE("identity parameters across the board") {
  Rng data_rng(13);
  const int64_t d = 2, L = 24;
  auto x = random_series(d, L, data_rng);
  struct IdCase {
    AugmentationSpec spec;
    double tol;
  };
  std::vector<IdCase> cases;
  {
    AugmentationSpec s;
    s.kind = AugKind::Jitter;
    s.sigma = 0.0;
    cases.push_back({s, 0.0});
  }
  {
    AugmentationSpec s;
    s.kind = AugKind::Permutation;
    s.n_segments = 1;
    cases.push_back({s, 0.0});
  }
  {
    AugmentationSpec s;
    s.kind = AugKind::MagnitudeWarp;
    s.sigma = 0.0;
    cases.push_back({s, 0.0});
  }
  {
    AugmentationSpec s;
    s.kind = AugKind::WindowWarp;
    s.scales = {1.0};
    cases.push_back({s, 1e-6});
  }
  {
    AugmentationSpec s;
    s.kind = AugKind::Resize;
    s.crop_ratio = 1.0;
    cases.push_back({s, 1e-6});
  }
  {
    AugmentationSpec s;
    s.kind = AugKind::TimeMask;
    s.mask_ratio = 0.0;
    cases.push_back({s, 0.0});
  }
  for (const auto& c : cases) {
    auto y = apply_augmentation(c.spec, {x, d, L}, 5);
    CHECK(max_diff(x, y) <= c.tol);
  }
}
