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

#ifndef TSOOD_TESTS_HELPERS_HPP_
#define TSOOD_TESTS_HELPERS_HPP_

#include <cmath>
#include <vector>

#include "tsood/tensor.hpp"

namespace tsood::testing {

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  auto ad = a.data();
  auto bd = b.data();
  for (size_t i = 0; i < ad.size(); ++i) {
    m = std::max(m, std::fabs(double(ad[i]) - double(bd[i])));
  }
  return m;
}

/// Direct O(L*k) convolution oracle, independent of the conv1d kernel.
inline std::vector<double> conv1d_oracle(const std::vector<float>& x,
                                         const std::vector<float>& w,
                                         int64_t cin, int64_t L, int64_t cout,
                                         int64_t k, bool same_padding,
                                         const std::vector<float>& bias) {
  const int64_t pad = same_padding ? (k - 1) / 2 : 0;
  const int64_t lo = same_padding ? L : L - k + 1;
  std::vector<double> out(size_t(cout * lo), 0.0);
  for (int64_t co = 0; co < cout; ++co) {
    for (int64_t t = 0; t < lo; ++t) {
      double acc = bias.empty() ? 0.0 : double(bias[size_t(co)]);
      for (int64_t ci = 0; ci < cin; ++ci) {
        for (int64_t u = 0; u < k; ++u) {
          const int64_t s = t + u - pad;
          if (s < 0 || s >= L) continue;
          acc += double(w[size_t((co * cin + ci) * k + u)]) *
                 double(x[size_t(ci * L + s)]);
        }
      }
      out[size_t(co * lo + t)] = acc;
    }
  }
  return out;
}

/// O(n^2) pair-counting AUROC oracle (OOD label = 1, higher score = more OOD).
inline double auroc_pair_oracle(const std::vector<double>& scores,
                                const std::vector<int>& labels) {
  double wins = 0.0;
  int64_t pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        wins += 0.5;
      }
    }
  }
  return wins / double(pairs);
}

}  // namespace tsood::testing

#endif  // TSOOD_TESTS_HELPERS_HPP_
