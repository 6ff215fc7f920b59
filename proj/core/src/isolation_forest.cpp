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

#include "tsood/feature_models.hpp"

namespace tsood {

namespace {

constexpr double kEulerGamma = 0.57721566490153286;

struct TreeBuilder {
  const FeatureMatrix& data;
  IsolationTree& tree;
  Rng& rng;
  int64_t max_depth;

  int build(std::vector<int64_t>& idx, int64_t depth) {
    IsolationTree::Node node;
    node.size = int64_t(idx.size());
    const int id = int(tree.nodes.size());
    tree.nodes.push_back(node);

    if (int64_t(idx.size()) <= 1 || depth >= max_depth) return id;

    // candidate features with positive range over this subset
    std::vector<int> candidates;
    std::vector<double> lo(static_cast<size_t>(data.F)),
        hi(static_cast<size_t>(data.F));
    for (int64_t f = 0; f < data.F; ++f) {
      double mn = data.row(idx[0])[size_t(f)];
      double mx = mn;
      for (int64_t i : idx) {
        const double v = data.row(i)[size_t(f)];
        mn = std::min(mn, v);
        mx = std::max(mx, v);
      }
      lo[size_t(f)] = mn;
      hi[size_t(f)] = mx;
      if (mx > mn) candidates.push_back(int(f));
    }
    if (candidates.empty()) return id;  // all points identical

    const int feature =
        candidates[size_t(rng.randint(int64_t(candidates.size())))];
    const double threshold =
        rng.uniform(lo[size_t(feature)], hi[size_t(feature)]);

    std::vector<int64_t> left_idx, right_idx;
    for (int64_t i : idx) {
      if (data.row(i)[size_t(feature)] < threshold) {
        left_idx.push_back(i);
      } else {
        right_idx.push_back(i);
      }
    }
    if (left_idx.empty() || right_idx.empty()) return id;  // degenerate draw

    tree.nodes[size_t(id)].feature = feature;
    tree.nodes[size_t(id)].threshold = threshold;
    const int left = build(left_idx, depth + 1);
    tree.nodes[size_t(id)].left = left;
    const int right = build(right_idx, depth + 1);
    tree.nodes[size_t(id)].right = right;
    return id;
  }
};

double path_length(const IsolationTree& tree, std::span<const double> x) {
  int node = 0;
  int64_t depth = 0;
  while (tree.nodes[size_t(node)].feature >= 0) {
    const auto& nd = tree.nodes[size_t(node)];
    node = x[size_t(nd.feature)] < nd.threshold ? nd.left : nd.right;
    ++depth;
  }
  return double(depth) + average_path_length(tree.nodes[size_t(node)].size);
}

}  // namespace

double average_path_length(int64_t m) {
  if (m <= 1) return 0.0;
  if (m == 2) return 1.0;
  const double h = std::log(double(m - 1)) + kEulerGamma;
  return 2.0 * h - 2.0 * double(m - 1) / double(m);
}

double if_score_from_mean_path(double mean_path, int64_t psi) {
  const double c = average_path_length(psi);
  if (c <= 0.0) return 0.5;
  return std::pow(2.0, -mean_path / c);
}

IsolationForestModel fit_isolation_forest(
    const std::vector<FeatureMatrix>& by_class, int64_t n_trees, int64_t psi,
    uint64_t seed) {
  if (by_class.empty()) throw DataError("fit_isolation_forest: no classes");
  if (psi < 2) throw ConfigError("fit_isolation_forest: psi must be >= 2");
  if (n_trees < 1) throw ConfigError("fit_isolation_forest: need >= 1 tree");

  IsolationForestModel model;
  model.n_trees = n_trees;
  model.F = by_class[0].F;
  Rng rng(seed);
  for (const auto& fm : by_class) {
    if (fm.F != model.F) {
      throw DataError("fit_isolation_forest: feature width mismatch");
    }
    IsolationForestModel::ClassForest forest;
    forest.psi = std::min(psi, fm.n);
    const int64_t max_depth =
        int64_t(std::ceil(std::log2(std::max<double>(2.0, double(forest.psi)))));
    for (int64_t t = 0; t < n_trees; ++t) {
      // subsample psi rows without replacement
      std::vector<int64_t> idx(static_cast<size_t>(fm.n));
      for (int64_t i = 0; i < fm.n; ++i) idx[size_t(i)] = i;
      rng.shuffle(idx);
      idx.resize(size_t(forest.psi));

      IsolationTree tree;
      TreeBuilder builder{fm, tree, rng, max_depth};
      builder.build(idx, 0);
      forest.trees.push_back(std::move(tree));
    }
    model.classes.push_back(std::move(forest));
  }
  return model;
}

std::vector<double> if_anomaly_score(const IsolationForestModel& model,
                                     std::span<const double> x) {
  std::vector<double> out;
  for (const auto& forest : model.classes) {
    double total = 0.0;
    for (const auto& tree : forest.trees) total += path_length(tree, x);
    const double mean_path = total / double(forest.trees.size());
    out.push_back(if_score_from_mean_path(mean_path, forest.psi));
  }
  return out;
}

}  // namespace tsood
