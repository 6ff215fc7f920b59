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

#ifndef TSOOD_AUGMENT_HPP_
#define TSOOD_AUGMENT_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tsood/common.hpp"

namespace tsood {

enum class AugKind {
  Jitter,
  Permutation,
  MagnitudeWarp,
  WindowWarp,
  Resize,
  Flip,
  TimeMask,
};

AugKind aug_kind_from_string(const std::string& s);
std::string aug_kind_to_string(AugKind k);

/// One augmentation with its parameters. Unused fields are ignored by the
/// kinds that do not read them.
struct AugmentationSpec {
  AugKind kind = AugKind::Jitter;
  double sigma = 0.03;          // Jitter noise / MagnitudeWarp knot spread
  int n_segments = 5;           // Permutation
  int n_knots = 4;              // MagnitudeWarp
  double window_ratio = 0.1;    // WindowWarp
  std::vector<double> scales = {0.5, 2.0};  // WindowWarp
  double crop_ratio = 0.9;      // Resize
  double mask_ratio = 0.1;      // TimeMask
};

/// A single instance: d channels by L timesteps, row-major.
struct SeriesView {
  std::span<const float> values;
  int64_t d;
  int64_t L;
};

std::vector<float> jitter(SeriesView x, double sigma, Rng& rng);
std::vector<float> permute_segments(SeriesView x, int n_segments, Rng& rng);
std::vector<float> magnitude_warp(SeriesView x, double sigma, int n_knots,
                                  Rng& rng);
std::vector<float> window_warp(SeriesView x, double window_ratio,
                               std::span<const double> scales, Rng& rng);
std::vector<float> crop_resize(SeriesView x, double crop_ratio, Rng& rng);
std::vector<float> flip(SeriesView x);
std::vector<float> time_mask(SeriesView x, double mask_ratio, Rng& rng);

/// Dispatch on spec.kind; deterministic for equal (spec, seed, input).
std::vector<float> apply_augmentation(const AugmentationSpec& spec,
                                      SeriesView x, uint64_t seed);

/// Natural cubic spline through (xs, ys), second derivative zero at the
/// ends; evaluated by evaluate(). Knot positions must be strictly
/// increasing.
class NaturalCubicSpline {
 public:
  NaturalCubicSpline(std::vector<double> xs, std::vector<double> ys);
  double evaluate(double x) const;

 private:
  std::vector<double> xs_, ys_, m_;  // m_: second derivatives at knots
};

/// Endpoint-preserving linear resampling of y to n_out points.
std::vector<double> linear_resample(std::span<const double> y, int64_t n_out);

}  // namespace tsood

#endif  // TSOOD_AUGMENT_HPP_
