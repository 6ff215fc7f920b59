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

#include "tsood/augment.hpp"

#include <algorithm>
#include <cmath>

namespace tsood {

AugKind aug_kind_from_string(const std::string& s) {
  if (s == "jitter") return AugKind::Jitter;
  if (s == "permutation") return AugKind::Permutation;
  if (s == "magnitude_warp") return AugKind::MagnitudeWarp;
  if (s == "window_warp") return AugKind::WindowWarp;
  if (s == "resize") return AugKind::Resize;
  if (s == "flip") return AugKind::Flip;
  if (s == "time_mask") return AugKind::TimeMask;
  throw ConfigError("unknown augmentation kind '" + s + "'");
}

std::string aug_kind_to_string(AugKind k) {
  switch (k) {
    case AugKind::Jitter: return "jitter";
    case AugKind::Permutation: return "permutation";
    case AugKind::MagnitudeWarp: return "magnitude_warp";
    case AugKind::WindowWarp: return "window_warp";
    case AugKind::Resize: return "resize";
    case AugKind::Flip: return "flip";
    case AugKind::TimeMask: return "time_mask";
  }
  throw ConfigError("unknown augmentation kind tag");
}

// ---------------------------------------------------------------------------
// Numerics
// ---------------------------------------------------------------------------

NaturalCubicSpline::NaturalCubicSpline(std::vector<double> xs,
                                       std::vector<double> ys)
    : xs_(std::move(xs)), ys_(std::move(ys)) {
  const size_t n = xs_.size();
  if (n < 2 || ys_.size() != n) {
    throw ConfigError("spline: need >=2 knots with matching values");
  }
  m_.assign(n, 0.0);
  if (n == 2) return;  // straight line

  // Tridiagonal system for interior second derivatives; natural ends.
  std::vector<double> diag(n, 0.0), rhs(n, 0.0), sub(n, 0.0), sup(n, 0.0);
  for (size_t i = 1; i + 1 < n; ++i) {
    const double h0 = xs_[i] - xs_[i - 1];
    const double h1 = xs_[i + 1] - xs_[i];
    sub[i] = h0;
    diag[i] = 2.0 * (h0 + h1);
    sup[i] = h1;
    rhs[i] = 6.0 * ((ys_[i + 1] - ys_[i]) / h1 - (ys_[i] - ys_[i - 1]) / h0);
  }
  // Thomas algorithm over i = 1..n-2
  for (size_t i = 2; i + 1 < n; ++i) {
    const double w = sub[i] / diag[i - 1];
    diag[i] -= w * sup[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  for (size_t i = n - 2; i >= 1; --i) {
    const double upper = (i + 2 < n) ? sup[i] * m_[i + 1] : 0.0;
    m_[i] = (rhs[i] - upper) / diag[i];
    if (i == 1) break;
  }
}

double NaturalCubicSpline::evaluate(double x) const {
  const size_t n = xs_.size();
  size_t hi = 1;
  while (hi + 1 < n && xs_[hi] < x) ++hi;
  const size_t lo = hi - 1;
  const double h = xs_[hi] - xs_[lo];
  const double a = (xs_[hi] - x) / h;
  const double b = (x - xs_[lo]) / h;
  return a * ys_[lo] + b * ys_[hi] +
         ((a * a * a - a) * m_[lo] + (b * b * b - b) * m_[hi]) * h * h / 6.0;
}

std::vector<double> linear_resample(std::span<const double> y, int64_t n_out) {
  const int64_t m = int64_t(y.size());
  std::vector<double> out(static_cast<size_t>(n_out));
  if (m == 1) {
    std::fill(out.begin(), out.end(), y[0]);
    return out;
  }
  if (n_out == 1) {
    out[0] = y[0];
    return out;
  }
  for (int64_t i = 0; i < n_out; ++i) {
    const double pos = double(i) * double(m - 1) / double(n_out - 1);
    const int64_t k = std::min<int64_t>(int64_t(pos), m - 2);
    const double frac = pos - double(k);
    out[size_t(i)] = y[size_t(k)] * (1.0 - frac) + y[size_t(k + 1)] * frac;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Augmentations
// ---------------------------------------------------------------------------

namespace {

std::vector<float> copy_of(SeriesView x) {
  return std::vector<float>(x.values.begin(), x.values.end());
}

}  // namespace

std::vector<float> jitter(SeriesView x, double sigma, Rng& rng) {
  if (sigma < 0.0) throw ConfigError("jitter: sigma must be >= 0");
  std::vector<float> out = copy_of(x);
  if (sigma == 0.0) return out;
  for (float& v : out) v += float(rng.normal(0.0, sigma));
  return out;
}

std::vector<float> permute_segments(SeriesView x, int n_segments, Rng& rng) {
  if (n_segments < 1 || int64_t(n_segments) > x.L) {
    throw ConfigError("permute_segments: need 1 <= n_segments <= L");
  }
  // contiguous chunks whose sizes differ by at most one
  const int64_t n = n_segments;
  const int64_t base = x.L / n;
  const int64_t extra = x.L % n;
  std::vector<int64_t> starts(size_t(n) + 1, 0);
  for (int64_t s = 0; s < n; ++s) {
    starts[size_t(s + 1)] = starts[size_t(s)] + base + (s < extra ? 1 : 0);
  }
  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t s = 0; s < n; ++s) order[size_t(s)] = s;
  rng.shuffle(order);

  std::vector<float> out(x.values.size());
  for (int64_t j = 0; j < x.d; ++j) {
    int64_t t_out = 0;
    for (int64_t s : order) {
      for (int64_t t = starts[size_t(s)]; t < starts[size_t(s + 1)]; ++t) {
        out[size_t(j * x.L + t_out++)] = x.values[size_t(j * x.L + t)];
      }
    }
  }
  return out;
}

std::vector<float> magnitude_warp(SeriesView x, double sigma, int n_knots,
                                  Rng& rng) {
  if (n_knots < 2) throw ConfigError("magnitude_warp: need >= 2 knots");
  std::vector<double> knot_x(static_cast<size_t>(n_knots));
  for (int k = 0; k < n_knots; ++k) {
    knot_x[size_t(k)] =
        double(k) * double(x.L - 1) / double(n_knots - 1);
  }
  std::vector<float> out(x.values.size());
  for (int64_t j = 0; j < x.d; ++j) {
    std::vector<double> knot_y(static_cast<size_t>(n_knots));
    for (int k = 0; k < n_knots; ++k) knot_y[size_t(k)] = rng.normal(1.0, sigma);
    NaturalCubicSpline spline(knot_x, knot_y);
    for (int64_t t = 0; t < x.L; ++t) {
      out[size_t(j * x.L + t)] =
          float(double(x.values[size_t(j * x.L + t)]) *
                spline.evaluate(double(t)));
    }
  }
  return out;
}

std::vector<float> window_warp(SeriesView x, double window_ratio,
                               std::span<const double> scales, Rng& rng) {
  if (window_ratio <= 0.0 || window_ratio >= 1.0) {
    throw ConfigError("window_warp: window_ratio must be in (0,1)");
  }
  if (scales.empty()) throw ConfigError("window_warp: scales empty");
  for (double s : scales) {
    if (s <= 0.0) throw ConfigError("window_warp: scales must be positive");
  }
  const int64_t w = std::max<int64_t>(2, int64_t(window_ratio * double(x.L)));
  const int64_t start = rng.randint(x.L - w + 1);
  const double scale = scales[size_t(rng.randint(int64_t(scales.size())))];
  const int64_t w_scaled = std::max<int64_t>(2, int64_t(std::lround(double(w) * scale)));

  std::vector<float> out(x.values.size());
  for (int64_t j = 0; j < x.d; ++j) {
    const float* row = x.values.data() + j * x.L;
    std::vector<double> window(static_cast<size_t>(w));
    for (int64_t t = 0; t < w; ++t) window[size_t(t)] = double(row[start + t]);
    const std::vector<double> warped = linear_resample(window, w_scaled);

    std::vector<double> combined;
    combined.reserve(size_t(x.L - w + w_scaled));
    for (int64_t t = 0; t < start; ++t) combined.push_back(double(row[t]));
    combined.insert(combined.end(), warped.begin(), warped.end());
    for (int64_t t = start + w; t < x.L; ++t) combined.push_back(double(row[t]));

    const std::vector<double> final = linear_resample(combined, x.L);
    for (int64_t t = 0; t < x.L; ++t) {
      out[size_t(j * x.L + t)] = float(final[size_t(t)]);
    }
  }
  return out;
}

std::vector<float> crop_resize(SeriesView x, double crop_ratio, Rng& rng) {
  if (crop_ratio <= 0.0 || crop_ratio > 1.0) {
    throw ConfigError("crop_resize: crop_ratio must be in (0,1]");
  }
  const int64_t w =
      std::max<int64_t>(2, int64_t(std::floor(crop_ratio * double(x.L))));
  const int64_t start = rng.randint(x.L - w + 1);
  std::vector<float> out(x.values.size());
  for (int64_t j = 0; j < x.d; ++j) {
    const float* row = x.values.data() + j * x.L;
    std::vector<double> cropped(static_cast<size_t>(w));
    for (int64_t t = 0; t < w; ++t) cropped[size_t(t)] = double(row[start + t]);
    const std::vector<double> resized = linear_resample(cropped, x.L);
    for (int64_t t = 0; t < x.L; ++t) {
      out[size_t(j * x.L + t)] = float(resized[size_t(t)]);
    }
  }
  return out;
}

std::vector<float> flip(SeriesView x) {
  std::vector<float> out(x.values.size());
  for (int64_t j = 0; j < x.d; ++j) {
    for (int64_t t = 0; t < x.L; ++t) {
      out[size_t(j * x.L + t)] = x.values[size_t(j * x.L + (x.L - 1 - t))];
    }
  }
  return out;
}

std::vector<float> time_mask(SeriesView x, double mask_ratio, Rng& rng) {
  if (mask_ratio < 0.0 || mask_ratio >= 1.0) {
    throw ConfigError("time_mask: mask_ratio must be in [0,1)");
  }
  std::vector<float> out = copy_of(x);
  const int64_t w = int64_t(std::floor(mask_ratio * double(x.L)));
  if (w == 0) return out;
  const int64_t start = rng.randint(x.L - w + 1);
  for (int64_t j = 0; j < x.d; ++j) {
    for (int64_t t = start; t < start + w; ++t) out[size_t(j * x.L + t)] = 0.0f;
  }
  return out;
}

std::vector<float> apply_augmentation(const AugmentationSpec& spec,
                                      SeriesView x, uint64_t seed) {
  Rng rng(seed);
  switch (spec.kind) {
    case AugKind::Jitter:
      return jitter(x, spec.sigma, rng);
    case AugKind::Permutation:
      return permute_segments(x, spec.n_segments, rng);
    case AugKind::MagnitudeWarp:
      return magnitude_warp(x, spec.sigma, spec.n_knots, rng);
    case AugKind::WindowWarp:
      return window_warp(x, spec.window_ratio, spec.scales, rng);
    case AugKind::Resize:
      return crop_resize(x, spec.crop_ratio, rng);
    case AugKind::Flip:
      return flip(x);
    case AugKind::TimeMask:
      return time_mask(x, spec.mask_ratio, rng);
  }
  throw ConfigError("apply_augmentation: unknown kind tag");
}

}  // namespace tsood
