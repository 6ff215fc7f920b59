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
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "tsood/scorers.hpp"

namespace tsood {

Method method_from_string(const std::string& s) {
  if (s == "msp") return Method::MSP;
  if (s == "odin") return Method::ODIN;
  if (s == "ebo" || s == "energy") return Method::EBO;
  if (s == "gradnorm") return Method::GradNorm;
  if (s == "react") return Method::ReACT;
  if (s == "dice") return Method::DICE;
  if (s == "mds" || s == "mahalanobis") return Method::MDS;
  if (s == "dfm-pca") return Method::DfmPca;
  if (s == "dfm-if") return Method::DfmIf;
  if (s == "dfm-ocsvm") return Method::DfmOcsvm;
  throw ConfigError("unknown scoring method '" + s + "'");
}

std::string method_to_string(Method m) {
  switch (m) {
    case Method::MSP: return "msp";
    case Method::ODIN: return "odin";
    case Method::EBO: return "ebo";
    case Method::GradNorm: return "gradnorm";
    case Method::ReACT: return "react";
    case Method::DICE: return "dice";
    case Method::MDS: return "mds";
    case Method::DfmPca: return "dfm-pca";
    case Method::DfmIf: return "dfm-if";
    case Method::DfmOcsvm: return "dfm-ocsvm";
  }
  throw ConfigError("unknown method tag");
}

std::vector<Method> all_methods() {
  return {Method::MSP,  Method::ODIN,   Method::EBO,    Method::GradNorm,
          Method::ReACT, Method::DICE,  Method::MDS,    Method::DfmPca,
          Method::DfmIf, Method::DfmOcsvm};
}

namespace {

// ---------------------------------------------------------------------------
// Scalar scoring math (float64 on float32 activations)
// ---------------------------------------------------------------------------

double logsumexp_d(std::span<const double> z) {
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  double acc = 0.0;
  for (double v : z) acc += std::exp(v - mx);
  return mx + std::log(acc);
}

/// -max softmax(logits / T): the MSP-style confidence score, negated so
/// higher means more OOD.
double neg_max_softmax(std::span<const float> logits, double T) {
  std::vector<double> z(logits.size());
  for (size_t i = 0; i < z.size(); ++i) z[i] = double(logits[i]) / T;
  const double lse = logsumexp_d(z);
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  return -std::exp(mx - lse);
}

/// Energy -T logsumexp(logits'/T) where logits' come from the (possibly
/// clipped) prelogit through the (possibly masked) head. EBO, ReACT and
/// DICE all route through here so their reduction identities are exact.
double energy_from_prelogit(std::span<const float> prelogit,
                            std::span<const double> weight,
                            std::span<const double> bias,
                            std::span<const double> mask, double clip,
                            double T) {
  const int64_t C = int64_t(bias.size());
  const int64_t F = int64_t(prelogit.size());
  std::vector<double> z(static_cast<size_t>(C));
  for (int64_t c = 0; c < C; ++c) {
    double acc = bias[size_t(c)];
    const double* wrow = weight.data() + c * F;
    if (mask.empty()) {
      for (int64_t f = 0; f < F; ++f) {
        acc += wrow[f] * std::min(double(prelogit[size_t(f)]), clip);
      }
    } else {
      const double* mrow = mask.data() + c * F;
      for (int64_t f = 0; f < F; ++f) {
        acc += wrow[f] * mrow[f] * std::min(double(prelogit[size_t(f)]), clip);
      }
    }
    z[size_t(c)] = acc / T;
  }
  return -T * logsumexp_d(z);
}

/// ||d KL(u || softmax) / d W||_1 = ||p - u||_1 * ||h||_1 for the final
/// linear layer.
double gradnorm_l1(std::span<const float> prelogit,
                   std::span<const float> logits) {
  const int64_t C = int64_t(logits.size());
  std::vector<double> z(static_cast<size_t>(C));
  for (int64_t c = 0; c < C; ++c) z[size_t(c)] = double(logits[size_t(c)]);
  const double lse = logsumexp_d(z);
  double p_minus_u = 0.0;
  for (int64_t c = 0; c < C; ++c) {
    p_minus_u += std::fabs(std::exp(z[size_t(c)] - lse) - 1.0 / double(C));
  }
  double h_l1 = 0.0;
  for (float v : prelogit) h_l1 += std::fabs(double(v));
  return p_minus_u * h_l1;
}

std::vector<double> prelogit_as_double(std::span<const float> prelogit) {
  return std::vector<double>(prelogit.begin(), prelogit.end());
}

/// Interpolated percentile (inclusive): p=100 returns the max.
double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw DataError("percentile of empty set");
  std::sort(values.begin(), values.end());
  const double pos = (p / 100.0) * double(values.size() - 1);
  const size_t lo = size_t(pos);
  const size_t hi = std::min(values.size() - 1, lo + 1);
  const double frac = pos - double(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

ForwardOutputs shared_forward(Backbone& model, const Tensor& x) {
  return model.forward(x, /*training=*/false);
}

}  // namespace

FittedScorer fit_scorer(const ScorerSpec& spec, Backbone& model,
                        const TimeSeriesDataset& id_train) {
  FittedScorer out;
  out.spec = spec;
  out.n_classes = model.config().n_classes;
  out.feature_dim = model.feature_dim();

  // head snapshot
  {
    const Tensor& w = model.head_weight();
    const Tensor& b = model.head_bias();
    out.head_weight.assign(w.data().begin(), w.data().end());
    out.head_bias.assign(b.data().begin(), b.data().end());
  }

  const bool needs_features =
      spec.method == Method::ReACT || spec.method == Method::DICE ||
      spec.method == Method::MDS || spec.method == Method::DfmPca ||
      spec.method == Method::DfmIf || spec.method == Method::DfmOcsvm;
  if (!needs_features) return out;

  // ID-train prelogit features, eval mode, batched
  const int64_t F = out.feature_dim;
  std::vector<FeatureMatrix> by_class(static_cast<size_t>(out.n_classes));
  for (auto& fm : by_class) fm.F = F;
  std::vector<double> all_activations;
  std::vector<double> feature_mean(static_cast<size_t>(F), 0.0);

  const int64_t bs = 64;
  for (int64_t start = 0; start < id_train.n; start += bs) {
    const int64_t stop = std::min(id_train.n, start + bs);
    std::vector<int64_t> idx;
    for (int64_t i = start; i < stop; ++i) idx.push_back(i);
    ForwardOutputs fo = shared_forward(model, id_train.batch(idx));
    auto pd = fo.prelogit.data();
    for (int64_t i = 0; i < stop - start; ++i) {
      auto row = pd.subspan(size_t(i * F), size_t(F));
      const int label = id_train.labels[size_t(start + i)];
      if (label < 0 || int64_t(label) >= out.n_classes) {
        throw DataError("fit_scorer: label outside the model's classes");
      }
      by_class[size_t(label)].push_row(row);
      for (int64_t f = 0; f < F; ++f) {
        all_activations.push_back(double(row[size_t(f)]));
        feature_mean[size_t(f)] += double(row[size_t(f)]);
      }
    }
  }
  for (double& v : feature_mean) v /= double(id_train.n);

  switch (spec.method) {
    case Method::ReACT:
      out.react_clip = percentile(std::move(all_activations),
                                  spec.react_percentile);
      break;
    case Method::DICE:
      out.dice_mask = dice_mask_from(out.head_weight, feature_mean,
                                     spec.dice_prune_fraction, out.n_classes,
                                     F);
      break;
    case Method::MDS:
      out.mds = fit_gaussian_tied(by_class);
      break;
    case Method::DfmPca:
      out.pca = fit_pca(by_class, spec.pca_retained);
      break;
    case Method::DfmIf:
      out.iforest = fit_isolation_forest(by_class, spec.if_trees, spec.if_psi,
                                         spec.if_seed);
      break;
    case Method::DfmOcsvm:
      out.ocsvm = fit_ocsvm(by_class, spec.ocsvm_nu, spec.ocsvm_gamma);
      break;
    default:
      break;
  }
  return out;
}

std::vector<double> dice_mask_from(std::span<const double> head_weight,
                                   std::span<const double> feature_mean,
                                   double prune_fraction, int64_t n_classes,
                                   int64_t feature_dim) {
  if (prune_fraction < 0.0 || prune_fraction >= 1.0) {
    throw ConfigError("dice: prune_fraction must be in [0,1)");
  }
  const int64_t C = n_classes, F = feature_dim;
  const int64_t keep = std::max<int64_t>(
      1, int64_t(std::ceil((1.0 - prune_fraction) * double(F))));
  std::vector<double> mask(static_cast<size_t>(C * F), 0.0);
  for (int64_t c = 0; c < C; ++c) {
    std::vector<int64_t> order(static_cast<size_t>(F));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
      return head_weight[size_t(c * F + a)] * feature_mean[size_t(a)] >
             head_weight[size_t(c * F + b)] * feature_mean[size_t(b)];
    });
    for (int64_t r = 0; r < keep; ++r) {
      mask[size_t(c * F + order[size_t(r)])] = 1.0;
    }
  }
  return mask;
}

double score_from_outputs(const FittedScorer& scorer,
                          std::span<const float> prelogit,
                          std::span<const float> logits) {
  switch (scorer.spec.method) {
    case Method::MSP:
      return neg_max_softmax(logits, 1.0);
    case Method::EBO:
      return energy_from_prelogit(prelogit, scorer.head_weight,
                                  scorer.head_bias, {},
                                  std::numeric_limits<double>::infinity(),
                                  scorer.spec.temperature);
    case Method::GradNorm:
      return -gradnorm_l1(prelogit, logits);
    case Method::ReACT:
      return energy_from_prelogit(prelogit, scorer.head_weight,
                                  scorer.head_bias, {}, scorer.react_clip,
                                  scorer.spec.temperature);
    case Method::DICE:
      return energy_from_prelogit(prelogit, scorer.head_weight,
                                  scorer.head_bias, scorer.dice_mask,
                                  std::numeric_limits<double>::infinity(),
                                  scorer.spec.temperature);
    case Method::MDS: {
      auto d = mahalanobis_distance(scorer.mds, prelogit_as_double(prelogit));
      return *std::min_element(d.begin(), d.end());
    }
    case Method::DfmPca: {
      auto e = reconstruction_error(scorer.pca, prelogit_as_double(prelogit));
      return *std::min_element(e.begin(), e.end());
    }
    case Method::DfmIf: {
      auto s = if_anomaly_score(scorer.iforest, prelogit_as_double(prelogit));
      return *std::min_element(s.begin(), s.end());
    }
    case Method::DfmOcsvm: {
      auto d = ocsvm_decision(scorer.ocsvm, prelogit_as_double(prelogit));
      return -*std::max_element(d.begin(), d.end());
    }
    case Method::ODIN:
      throw LogicError("ODIN perturbs the input; use score_sample");
  }
  throw ConfigError("unknown method tag");
}

namespace {

double score_odin(const FittedScorer& scorer, Backbone& model,
                  const Tensor& x) {
  const double T = scorer.spec.odin_temperature;
  const double eps = scorer.spec.odin_epsilon;
  Tensor x_used = x;
  if (eps != 0.0) {
    // gradient of -log max softmax(logits/T) w.r.t. the input
    Tensor grad = input_gradient(model, x, [&](const ForwardOutputs& out) {
      Tensor scaled = mul_scalar(out.logits, float(1.0 / T));
      Tensor obj = sub(logsumexp(scaled), reduce_max(scaled, 1));
      return sum(obj);
    });
    x_used = x.clone();
    auto xd = x_used.mutable_data();
    auto gd = grad.data();
    for (size_t i = 0; i < xd.size(); ++i) {
      const float s = gd[i] > 0.0f ? 1.0f : (gd[i] < 0.0f ? -1.0f : 0.0f);
      xd[i] = float(double(xd[i]) - eps * double(s));
    }
  }
  ForwardOutputs out = model.forward(x_used, /*training=*/false);
  return neg_max_softmax(out.logits.data(), T);
}

}  // namespace

double score_sample(const FittedScorer& scorer, Backbone& model,
                    const Tensor& x) {
  if (scorer.spec.method == Method::ODIN) return score_odin(scorer, model, x);
  ForwardOutputs out = shared_forward(model, x);
  return score_from_outputs(scorer, out.prelogit.data(), out.logits.data());
}

BatchScores score_batch(const FittedScorer& scorer, Backbone& model,
                        const TimeSeriesDataset& mixture, bool record_latency,
                        bool include_forward) {
  using clock = std::chrono::steady_clock;
  BatchScores out;
  out.scores.reserve(size_t(mixture.n));
  out.latency_ms.assign(size_t(mixture.n), 0.0);
  const bool odin = scorer.spec.method == Method::ODIN;
  for (int64_t i = 0; i < mixture.n; ++i) {
    std::vector<int64_t> one = {i};
    Tensor x = mixture.batch(one);
    double score;
    if (odin || include_forward) {
      const auto t0 = clock::now();
      score = score_sample(scorer, model, x);
      if (record_latency) {
        out.latency_ms[size_t(i)] =
            std::chrono::duration<double, std::milli>(clock::now() - t0)
                .count();
      }
    } else {
      ForwardOutputs fo = shared_forward(model, x);  // shared, untimed
      const auto t0 = clock::now();
      score = score_from_outputs(scorer, fo.prelogit.data(), fo.logits.data());
      if (record_latency) {
        out.latency_ms[size_t(i)] =
            std::chrono::duration<double, std::milli>(clock::now() - t0)
                .count();
      }
    }
    if (!std::isfinite(score)) {
      throw NumericError("scorer " + method_to_string(scorer.spec.method) +
                         " produced a non-finite score");
    }
    out.scores.push_back(score);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization: scorer_<method>.json + scorer_<method>.bin
// ---------------------------------------------------------------------------

namespace {

using nlohmann::ordered_json;

struct BlobWriter {
  std::vector<double> data;
  void put(double v) { data.push_back(v); }
  void put_span(std::span<const double> v) {
    data.insert(data.end(), v.begin(), v.end());
  }
};

struct BlobReader {
  std::vector<double> data;
  size_t pos = 0;
  double get() {
    if (pos >= data.size()) throw DataError("scorer blob truncated");
    return data[pos++];
  }
  std::vector<double> get_vec(size_t n) {
    if (pos + n > data.size()) throw DataError("scorer blob truncated");
    std::vector<double> out(data.begin() + int64_t(pos),
                            data.begin() + int64_t(pos + n));
    pos += n;
    return out;
  }
};

}  // namespace

void save_scorer(const FittedScorer& scorer, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::string name = method_to_string(scorer.spec.method);

  ordered_json meta;
  meta["method"] = name;
  meta["n_classes"] = scorer.n_classes;
  meta["feature_dim"] = scorer.feature_dim;
  meta["dtype"] = "f64le";
  meta["spec"] = {
      {"temperature", scorer.spec.temperature},
      {"odin_temperature", scorer.spec.odin_temperature},
      {"odin_epsilon", scorer.spec.odin_epsilon},
      {"react_percentile", scorer.spec.react_percentile},
      {"dice_prune_fraction", scorer.spec.dice_prune_fraction},
      {"pca_retained", scorer.spec.pca_retained},
      {"if_trees", scorer.spec.if_trees},
      {"if_psi", scorer.spec.if_psi},
      {"if_seed", scorer.spec.if_seed},
      {"ocsvm_nu", scorer.spec.ocsvm_nu},
      {"ocsvm_gamma", scorer.spec.ocsvm_gamma},
  };

  BlobWriter blob;
  blob.put_span(scorer.head_weight);
  blob.put_span(scorer.head_bias);

  switch (scorer.spec.method) {
    case Method::ReACT:
      meta["react_clip"] = scorer.react_clip;
      break;
    case Method::DICE:
      blob.put_span(scorer.dice_mask);
      break;
    case Method::MDS: {
      meta["lambda"] = scorer.mds.lambda;
      for (const auto& mu : scorer.mds.means) blob.put_span(mu);
      blob.put_span(scorer.mds.covariance);
      blob.put_span(scorer.mds.precision);
      break;
    }
    case Method::DfmPca: {
      ordered_json ks = ordered_json::array();
      for (const auto& cls : scorer.pca.classes) {
        ks.push_back({{"k", cls.k},
                      {"n_ratios", cls.explained_ratio.size()}});
        blob.put_span(cls.mean);
        blob.put_span(cls.components);
        blob.put_span(cls.explained_ratio);
      }
      meta["pca_classes"] = ks;
      break;
    }
    case Method::DfmIf: {
      ordered_json cls_meta = ordered_json::array();
      for (const auto& forest : scorer.iforest.classes) {
        ordered_json tree_sizes = ordered_json::array();
        for (const auto& tree : forest.trees) {
          tree_sizes.push_back(tree.nodes.size());
          for (const auto& nd : tree.nodes) {
            blob.put(double(nd.feature));
            blob.put(nd.threshold);
            blob.put(double(nd.left));
            blob.put(double(nd.right));
            blob.put(double(nd.size));
          }
        }
        cls_meta.push_back({{"psi", forest.psi}, {"tree_sizes", tree_sizes}});
      }
      meta["if_classes"] = cls_meta;
      break;
    }
    case Method::DfmOcsvm: {
      meta["ocsvm_gamma_fitted"] = scorer.ocsvm.gamma;
      ordered_json cls_meta = ordered_json::array();
      for (const auto& cls : scorer.ocsvm.classes) {
        cls_meta.push_back({{"m", cls.m}, {"rho", cls.rho}});
        blob.put_span(cls.support_vectors);
        blob.put_span(cls.alphas);
      }
      meta["ocsvm_classes"] = cls_meta;
      break;
    }
    default:
      break;
  }

  {
    std::ofstream out(fs::path(dir) / ("scorer_" + name + ".json"));
    if (!out) throw DataError("cannot write scorer json in '" + dir + "'");
    out << meta.dump(2) << "\n";
  }
  {
    std::ofstream out(fs::path(dir) / ("scorer_" + name + ".bin"),
                      std::ios::binary);
    if (!out) throw DataError("cannot write scorer blob in '" + dir + "'");
    out.write(reinterpret_cast<const char*>(blob.data.data()),
              std::streamsize(blob.data.size() * sizeof(double)));
  }
}

FittedScorer load_scorer(const std::string& dir, Method method) {
  namespace fs = std::filesystem;
  const std::string name = method_to_string(method);
  std::ifstream mf(fs::path(dir) / ("scorer_" + name + ".json"));
  if (!mf) throw DataError("cannot open scorer json for '" + name + "'");
  ordered_json meta = ordered_json::parse(mf);

  FittedScorer out;
  out.spec.method = method;
  out.n_classes = meta.at("n_classes").get<int64_t>();
  out.feature_dim = meta.at("feature_dim").get<int64_t>();
  const auto& sj = meta.at("spec");
  out.spec.temperature = sj.at("temperature").get<double>();
  out.spec.odin_temperature = sj.at("odin_temperature").get<double>();
  out.spec.odin_epsilon = sj.at("odin_epsilon").get<double>();
  out.spec.react_percentile = sj.at("react_percentile").get<double>();
  out.spec.dice_prune_fraction = sj.at("dice_prune_fraction").get<double>();
  out.spec.pca_retained = sj.at("pca_retained").get<double>();
  out.spec.if_trees = sj.at("if_trees").get<int64_t>();
  out.spec.if_psi = sj.at("if_psi").get<int64_t>();
  out.spec.if_seed = sj.at("if_seed").get<uint64_t>();
  out.spec.ocsvm_nu = sj.at("ocsvm_nu").get<double>();
  out.spec.ocsvm_gamma = sj.at("ocsvm_gamma").get<double>();

  BlobReader blob;
  {
    std::ifstream in(fs::path(dir) / ("scorer_" + name + ".bin"),
                     std::ios::binary);
    if (!in) throw DataError("cannot open scorer blob for '" + name + "'");
    in.seekg(0, std::ios::end);
    const auto bytes = in.tellg();
    in.seekg(0);
    blob.data.resize(size_t(bytes) / sizeof(double));
    in.read(reinterpret_cast<char*>(blob.data.data()), bytes);
  }

  const int64_t C = out.n_classes, F = out.feature_dim;
  out.head_weight = blob.get_vec(size_t(C * F));
  out.head_bias = blob.get_vec(size_t(C));

  switch (method) {
    case Method::ReACT:
      out.react_clip = meta.at("react_clip").get<double>();
      break;
    case Method::DICE:
      out.dice_mask = blob.get_vec(size_t(C * F));
      break;
    case Method::MDS: {
      out.mds.F = F;
      out.mds.lambda = meta.at("lambda").get<double>();
      for (int64_t c = 0; c < C; ++c) {
        out.mds.means.push_back(blob.get_vec(size_t(F)));
      }
      out.mds.covariance = blob.get_vec(size_t(F * F));
      out.mds.precision = blob.get_vec(size_t(F * F));
      break;
    }
    case Method::DfmPca: {
      out.pca.F = F;
      out.pca.retained = out.spec.pca_retained;
      for (const auto& cj : meta.at("pca_classes")) {
        PcaClassModel::ClassPca cls;
        cls.k = cj.at("k").get<int64_t>();
        const size_t n_ratios = cj.at("n_ratios").get<size_t>();
        cls.mean = blob.get_vec(size_t(F));
        cls.components = blob.get_vec(size_t(cls.k * F));
        cls.explained_ratio = blob.get_vec(n_ratios);
        out.pca.classes.push_back(std::move(cls));
      }
      break;
    }
    case Method::DfmIf: {
      out.iforest.F = F;
      out.iforest.n_trees = out.spec.if_trees;
      for (const auto& cj : meta.at("if_classes")) {
        IsolationForestModel::ClassForest forest;
        forest.psi = cj.at("psi").get<int64_t>();
        for (const auto& sz : cj.at("tree_sizes")) {
          IsolationTree tree;
          const size_t n_nodes = sz.get<size_t>();
          for (size_t k = 0; k < n_nodes; ++k) {
            IsolationTree::Node nd;
            nd.feature = int(blob.get());
            nd.threshold = blob.get();
            nd.left = int(blob.get());
            nd.right = int(blob.get());
            nd.size = int64_t(blob.get());
            tree.nodes.push_back(nd);
          }
          forest.trees.push_back(std::move(tree));
        }
        out.iforest.classes.push_back(std::move(forest));
      }
      break;
    }
    case Method::DfmOcsvm: {
      out.ocsvm.F = F;
      out.ocsvm.nu = out.spec.ocsvm_nu;
      out.ocsvm.gamma = meta.at("ocsvm_gamma_fitted").get<double>();
      for (const auto& cj : meta.at("ocsvm_classes")) {
        OcsvmClassModel::ClassSvm cls;
        cls.m = cj.at("m").get<int64_t>();
        cls.rho = cj.at("rho").get<double>();
        cls.support_vectors = blob.get_vec(size_t(cls.m * F));
        cls.alphas = blob.get_vec(size_t(cls.m));
        out.ocsvm.classes.push_back(std::move(cls));
      }
      break;
    }
    default:
      break;
  }
  return out;
}

}  // namespace tsood
