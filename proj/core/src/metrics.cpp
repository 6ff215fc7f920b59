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
#include <cstdio>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "tsood/metrics.hpp"

namespace tsood {

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw DataError("auroc: scores and labels must align and be non-empty");
  }
  int64_t n_pos = 0, n_neg = 0;
  for (int l : labels) (l == 1 ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0) {
    throw DataError("auroc: both classes must be present");
  }

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // midranks over tie groups; rank sum of the positive class
  double pos_rank_sum = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * double(i + 1 + j);  // ranks are 1-based
    for (size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) pos_rank_sum += midrank;
    }
    i = j;
  }
  const double u =
      pos_rank_sum - double(n_pos) * double(n_pos + 1) / 2.0;
  return u / (double(n_pos) * double(n_neg));
}

double aupr(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw DataError("aupr: scores and labels must align and be non-empty");
  }
  int64_t n_pos = 0;
  for (int l : labels) n_pos += (l == 1);
  if (n_pos == 0) throw DataError("aupr: positive (OOD) class absent");

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  double ap = 0.0;
  double prev_recall = 0.0;
  int64_t tp = 0, fp = 0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    for (size_t k = i; k < j; ++k) {
      (labels[order[k]] == 1 ? tp : fp)++;
    }
    const double recall = double(tp) / double(n_pos);
    const double precision = double(tp) / double(tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

double pearson_corr(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw DataError("pearson: need two aligned series of length >= 2");
  }
  const double n = double(x.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    throw DataError("pearson: zero variance");
  }
  return sxy / std::sqrt(sxx * syy);
}

std::vector<CorrelationEntry> correlation_study(
    const std::vector<RunSummary>& runs) {
  if (runs.size() < 2) {
    throw DataError("correlation_study: need at least 2 runs");
  }
  // methods present in every run
  std::vector<std::string> methods;
  for (const auto& [m, v] : runs[0].method_auroc) {
    bool everywhere = true;
    for (const auto& r : runs) {
      if (!r.method_auroc.count(m)) everywhere = false;
    }
    if (everywhere) methods.push_back(m);
  }

  std::vector<double> acc;
  for (const auto& r : runs) acc.push_back(r.id_accuracy);

  std::vector<CorrelationEntry> out;
  for (const auto& m : methods) {
    std::vector<double> aurocs;
    for (const auto& r : runs) aurocs.push_back(r.method_auroc.at(m));
    CorrelationEntry entry;
    entry.method = m;
    entry.degenerate = runs.size() == 2;
    try {
      entry.pcc = pearson_corr(acc, aurocs);
      entry.valid = true;
    } catch (const DataError&) {
      entry.valid = false;  // "n/a" cell
    }
    out.push_back(std::move(entry));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

namespace {
using nlohmann::ordered_json;
}

std::string eval_report_to_json(const EvalReport& report) {
  ordered_json j;
  j["schema_version"] = 1;
  j["dataset"] = report.dataset;
  j["arch"] = report.arch;
  j["loss"] = report.loss;
  j["seed"] = report.seed;
  j["config_digest"] = report.config_digest;
  j["positive_class"] = "ood";  // AUPR treats OOD as positive
  j["split"] = {{"id_classes", report.split.id_classes},
                {"ood_classes", report.split.ood_classes},
                {"seed", report.split.seed}};
  j["id_accuracy"] = report.id_accuracy;
  ordered_json methods;
  for (const auto& [name, r] : report.methods) {
    methods[name] = {{"auroc", r.auroc},
                     {"aupr", r.aupr},
                     {"mean_latency_ms", r.mean_latency_ms}};
  }
  j["methods"] = methods;
  return j.dump(2) + "\n";
}

EvalReport eval_report_from_json(const std::string& text) {
  ordered_json j = ordered_json::parse(text);
  EvalReport report;
  report.dataset = j.at("dataset").get<std::string>();
  report.arch = j.at("arch").get<std::string>();
  report.loss = j.at("loss").get<std::string>();
  report.seed = j.at("seed").get<uint64_t>();
  report.config_digest = j.at("config_digest").get<std::string>();
  report.split.id_classes =
      j.at("split").at("id_classes").get<std::vector<int>>();
  report.split.ood_classes =
      j.at("split").at("ood_classes").get<std::vector<int>>();
  report.split.seed = j.at("split").at("seed").get<uint64_t>();
  report.id_accuracy = j.at("id_accuracy").get<double>();
  for (const auto& [name, r] : j.at("methods").items()) {
    MethodResult mr;
    mr.auroc = r.at("auroc").get<double>();
    mr.aupr = r.at("aupr").get<double>();
    mr.mean_latency_ms = r.at("mean_latency_ms").get<double>();
    report.methods[name] = mr;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Overhead benchmark
// ---------------------------------------------------------------------------

OverheadReport overhead_benchmark(const std::vector<FittedScorer>& scorers,
                                  Backbone& model,
                                  const TimeSeriesDataset& mixture,
                                  int64_t warmup, int64_t repeats,
                                  bool include_forward) {
  if (warmup < 1) throw ConfigError("overhead_benchmark: warmup must be >= 1");
  if (repeats < 1) {
    throw ConfigError("overhead_benchmark: repeats must be >= 1");
  }
  if (mixture.n == 0) throw DataError("overhead_benchmark: empty mixture");
  using clock = std::chrono::steady_clock;

  OverheadReport report;
  report.warmup = warmup;
  report.repeats = repeats;
  report.include_forward = include_forward;
  report.jobs = 1;

  for (const FittedScorer& scorer : scorers) {
    // warmup on the first samples, excluded from the mean
    for (int64_t w = 0; w < warmup; ++w) {
      std::vector<int64_t> one = {w % mixture.n};
      Tensor x = mixture.batch(one);
      (void)score_sample(scorer, model, x);
    }
    const bool odin = scorer.spec.method == Method::ODIN;
    double total_ms = 0.0;
    int64_t counted = 0;
    for (int64_t r = 0; r < repeats; ++r) {
      for (int64_t i = 0; i < mixture.n; ++i) {
        std::vector<int64_t> one = {i};
        Tensor x = mixture.batch(one);
        if (odin || include_forward) {
          const auto t0 = clock::now();
          (void)score_sample(scorer, model, x);
          total_ms +=
              std::chrono::duration<double, std::milli>(clock::now() - t0)
                  .count();
        } else {
          ForwardOutputs fo = model.forward(x, false);
          const auto t0 = clock::now();
          (void)score_from_outputs(scorer, fo.prelogit.data(),
                                   fo.logits.data());
          total_ms +=
              std::chrono::duration<double, std::milli>(clock::now() - t0)
                  .count();
        }
        ++counted;
      }
    }
    report.rows.push_back(
        {method_to_string(scorer.spec.method), total_ms / double(counted)});
  }
  return report;
}

// ---------------------------------------------------------------------------
// CSV writers
// ---------------------------------------------------------------------------

void write_scores_csv(const std::string& path,
                      const std::vector<std::string>& methods,
                      const std::vector<BatchScores>& per_method,
                      std::span<const int> is_ood,
                      const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  out << "sample_id,truth,method,score,latency_ms\n";
  char buf[160];
  for (size_t m = 0; m < methods.size(); ++m) {
    const auto& batch = per_method[m];
    for (size_t i = 0; i < batch.scores.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%zu,%s,%s,%.12g,%.6g\n", i,
                    is_ood[i] ? "ood" : "id", methods[m].c_str(),
                    batch.scores[i], batch.latency_ms[i]);
      out << buf;
    }
  }
}

void write_overhead_csv(const OverheadReport& report, const std::string& path,
                        const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  out << "# warmup=" << report.warmup << " repeats=" << report.repeats
      << " include_forward=" << (report.include_forward ? "true" : "false")
      << " jobs=" << report.jobs << "\n";
  out << "method,mean_ms\n";
  char buf[96];
  for (const auto& row : report.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.6g\n", row.method.c_str(),
                  row.mean_ms);
    out << buf;
  }
}

void write_correlation_csv(const std::vector<CorrelationEntry>& entries,
                           const std::string& path,
                           const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  out << "method,pcc,degenerate\n";
  char buf[96];
  for (const auto& e : entries) {
    if (e.valid) {
      std::snprintf(buf, sizeof(buf), "%s,%.9g,%s\n", e.method.c_str(), e.pcc,
                    e.degenerate ? "true" : "false");
    } else {
      std::snprintf(buf, sizeof(buf), "%s,n/a,%s\n", e.method.c_str(),
                    e.degenerate ? "true" : "false");
    }
    out << buf;
  }
}

}  // namespace tsood
