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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "tsood/pipeline.hpp"

namespace tsood {

namespace fs = std::filesystem;

EvalSession::EvalSession(IdOodSplit split, ChannelStats stats)
    : split_(std::move(split)), stats_(std::move(stats)) {}

const TimeSeriesDataset& EvalSession::ood_test() const {
  if (!scorers_fitted_) {
    throw LogicError(
        "ood_test requested before scorer fitting completed; the OOD split "
        "is sealed during fitting");
  }
  return split_.ood_test;
}

void load_dataset_pair(const DatasetConfig& config, TimeSeriesDataset& train,
                       TimeSeriesDataset& test) {
  if (config.synthetic.has_value()) {
    SyntheticConfig sc = *config.synthetic;
    sc.split_tag = "train";
    train = generate_synthetic(sc);
    SyntheticConfig tc = sc;
    tc.split_tag = "test";
    tc.seed = sc.seed ^ 0x5deece66dull;  // independent stream
    if (config.synthetic_test_per_class > 0) {
      tc.n_per_class = config.synthetic_test_per_class;
    }
    test = generate_synthetic(tc);
  } else {
    train = load_ts_file(config.train_path);
    train.split_tag = "train";
    test = load_ts_file(config.test_path);
    test.split_tag = "test";
    if (!config.name.empty()) {
      train.name = config.name;
      test.name = config.name;
    }
  }
}

EvalSession make_session(const DatasetConfig& config, uint64_t seed) {
  TimeSeriesDataset train, test;
  load_dataset_pair(config, train, test);
  IdOodSplit split = split_id_ood(train, test, seed);
  ChannelStats stats = fit_channel_stats(split.id_train);
  apply_channel_stats(stats, split.id_train);
  apply_channel_stats(stats, split.id_test);
  apply_channel_stats(stats, split.ood_test);
  return EvalSession(std::move(split), std::move(stats));
}

namespace {

std::string file_comment(const PipelineConfig& config) {
  return "config_digest=" + config.config_digest +
         " seed=" + std::to_string(config.seed);
}

ModelConfig model_config_for(const PipelineConfig& config,
                             const EvalSession& session) {
  ModelConfig mc;
  mc.arch = config.arch;
  mc.in_channels = session.id_train().d;
  mc.seq_len = session.id_train().L;
  mc.n_classes = int64_t(session.spec().id_classes.size());
  mc.width = config.width;
  mc.seed = config.seed;
  return mc;
}

}  // namespace

TrainRunResult run_train(const PipelineConfig& config) {
  EvalSession session = make_session(config.dataset, config.seed);
  auto model = Backbone::build(model_config_for(config, session));

  TrainConfig tc = config.train;
  TrainResult tr = train_model(*model, session.id_train(), &session.id_test(),
                               tc);
  tr.meta.config_digest = config.config_digest;
  tr.meta.seed = config.seed;

  fs::create_directories(config.out_dir);
  const std::string checkpoint_dir =
      (fs::path(config.out_dir) / "checkpoint").string();
  ModelArtifacts artifacts;
  artifacts.model = std::move(model);
  artifacts.stats = session.stats();
  artifacts.meta = tr.meta;
  save_checkpoint(artifacts, checkpoint_dir);
  write_train_log(tr.log, (fs::path(config.out_dir) / "train_log.csv").string(),
                  file_comment(config));

  TrainRunResult out;
  out.checkpoint_dir = checkpoint_dir;
  out.meta = tr.meta;
  return out;
}

EvalRunResult run_eval(const PipelineConfig& config,
                       const std::string& checkpoint_dir) {
  ModelArtifacts artifacts = load_checkpoint(checkpoint_dir);
  Backbone& model = *artifacts.model;

  // rebuild the split; normalization must use the checkpoint's statistics
  TimeSeriesDataset train, test;
  load_dataset_pair(config.dataset, train, test);
  IdOodSplit split = split_id_ood(train, test, config.seed);
  if (model.config().in_channels != split.id_train.d ||
      model.config().seq_len != split.id_train.L ||
      model.config().n_classes != int64_t(split.spec.id_classes.size())) {
    throw DataError("checkpoint dims (" +
                    std::to_string(model.config().in_channels) + "," +
                    std::to_string(model.config().seq_len) + "," +
                    std::to_string(model.config().n_classes) +
                    ") do not match the configured dataset");
  }
  apply_channel_stats(artifacts.stats, split.id_train);
  apply_channel_stats(artifacts.stats, split.id_test);
  apply_channel_stats(artifacts.stats, split.ood_test);
  EvalSession session(std::move(split), artifacts.stats);

  // fit every scorer strictly before the OOD side is readable
  std::vector<FittedScorer> fitted;
  for (const ScorerSpec& spec : config.scorers) {
    fitted.push_back(fit_scorer(spec, model, session.id_train()));
  }
  session.mark_scorers_fitted();
  for (const FittedScorer& scorer : fitted) {
    save_scorer(scorer, checkpoint_dir);
  }

  EvalMixture mixture =
      make_eval_mixture(session.id_test(), session.ood_test(), config.seed);

  EvalRunResult out;
  out.report.dataset = session.id_train().name;
  out.report.arch = arch_to_string(config.arch);
  out.report.loss = loss_kind_to_string(config.loss);
  out.report.seed = config.seed;
  out.report.config_digest = config.config_digest;
  out.report.split = session.spec();
  out.report.id_accuracy = evaluate_id_accuracy(model, session.id_test());

  std::vector<std::string> method_names;
  std::vector<BatchScores> per_method;
  for (const FittedScorer& scorer : fitted) {
    BatchScores scores = score_batch(scorer, model, mixture.instances,
                                     config.record_latency,
                                     config.include_forward);
    MethodResult result;
    result.auroc = auroc(scores.scores, mixture.is_ood);
    result.aupr = aupr(scores.scores, mixture.is_ood);
    double mean_ms = 0.0;
    for (double v : scores.latency_ms) mean_ms += v;
    result.mean_latency_ms =
        scores.latency_ms.empty() ? 0.0
                                  : mean_ms / double(scores.latency_ms.size());
    out.report.methods[method_to_string(scorer.spec.method)] = result;
    method_names.push_back(method_to_string(scorer.spec.method));
    per_method.push_back(std::move(scores));
  }

  fs::create_directories(config.out_dir);
  out.results_path = (fs::path(config.out_dir) / "results.json").string();
  {
    std::ofstream f(out.results_path);
    if (!f) throw DataError("cannot write '" + out.results_path + "'");
    f << eval_report_to_json(out.report);
  }
  out.scores_path = (fs::path(config.out_dir) / "scores.csv").string();
  write_scores_csv(out.scores_path, method_names, per_method, mixture.is_ood,
                   file_comment(config));
  return out;
}

OverheadReport run_bench(const PipelineConfig& config,
                         const std::string& checkpoint_dir,
                         int64_t requested_jobs) {
  (void)requested_jobs;  // the benchmark is defined as single-threaded
  ModelArtifacts artifacts = load_checkpoint(checkpoint_dir);
  Backbone& model = *artifacts.model;

  EvalSession session = [&] {
    TimeSeriesDataset train, test;
    load_dataset_pair(config.dataset, train, test);
    IdOodSplit split = split_id_ood(train, test, config.seed);
    apply_channel_stats(artifacts.stats, split.id_train);
    apply_channel_stats(artifacts.stats, split.id_test);
    apply_channel_stats(artifacts.stats, split.ood_test);
    return EvalSession(std::move(split), artifacts.stats);
  }();

  std::vector<FittedScorer> fitted;
  for (const ScorerSpec& spec : config.scorers) {
    fitted.push_back(fit_scorer(spec, model, session.id_train()));
  }
  session.mark_scorers_fitted();
  EvalMixture mixture =
      make_eval_mixture(session.id_test(), session.ood_test(), config.seed);

  OverheadReport report =
      overhead_benchmark(fitted, model, mixture.instances, config.bench_warmup,
                         config.bench_repeats, config.include_forward);
  fs::create_directories(config.out_dir);
  write_overhead_csv(report,
                     (fs::path(config.out_dir) / "overhead.csv").string(),
                     file_comment(config));
  return report;
}

// ---------------------------------------------------------------------------
// Matrix sweeps
// ---------------------------------------------------------------------------

namespace {

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') {
      c = '-';
    }
  }
  return s.empty() ? "x" : s;
}

struct SummaryKey {
  std::string grouping, key1, key2;
  bool operator<(const SummaryKey& o) const {
    return std::tie(grouping, key1, key2) <
           std::tie(o.grouping, o.key1, o.key2);
  }
};

struct SummaryAgg {
  double auroc_sum = 0.0;
  double aupr_sum = 0.0;
  int64_t n = 0;
};

}  // namespace

MatrixResult run_matrix(const MatrixConfig& config, int64_t jobs) {
  struct Cell {
    DatasetConfig dataset;
    Arch arch;
    LossKind loss;
    AugmentationSpec augmentation;
    uint64_t seed;
  };
  std::vector<Cell> cells;
  for (const auto& d : config.datasets) {
    for (Arch a : config.archs) {
      for (LossKind l : config.losses) {
        for (const auto& g : config.augmentations) {
          for (uint64_t s : config.seeds) {
            cells.push_back({d, a, l, g, s});
          }
        }
      }
    }
  }

  MatrixResult result;
  result.cells.resize(cells.size());
  std::mutex mu;
  size_t next = 0;

  auto worker = [&] {
    while (true) {
      size_t i;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= cells.size()) return;
        i = next++;
      }
      const Cell& cell = cells[i];
      MatrixCellOutcome outcome;
      outcome.dataset =
          cell.dataset.name.empty() ? "dataset" : cell.dataset.name;
      outcome.arch = arch_to_string(cell.arch);
      outcome.loss = loss_kind_to_string(cell.loss);
      outcome.augmentation = aug_kind_to_string(cell.augmentation.kind);
      outcome.seed = cell.seed;
      outcome.cell_id = sanitize(outcome.dataset) + "_" + outcome.arch + "_" +
                        outcome.loss + "_" + outcome.augmentation + "_s" +
                        std::to_string(cell.seed);
      try {
        PipelineConfig pc = config.base;
        pc.dataset = cell.dataset;
        pc.arch = cell.arch;
        pc.loss = cell.loss;
        pc.augmentation = cell.augmentation;
        pc.seed = cell.seed;
        pc.train.loss = cell.loss;
        pc.train.augmentation = cell.augmentation;
        pc.train.seed = cell.seed;
        pc.out_dir = (fs::path(config.out_dir) / outcome.cell_id).string();
        TrainRunResult tr = run_train(pc);
        EvalRunResult er = run_eval(pc, tr.checkpoint_dir);
        outcome.report = std::move(er.report);
        outcome.ok = true;
      } catch (const std::exception& e) {
        outcome.ok = false;
        outcome.error = e.what();
      }
      {
        std::lock_guard<std::mutex> lock(mu);
        result.cells[i] = std::move(outcome);
      }
    }
  };

  const int64_t n_workers =
      std::max<int64_t>(1, std::min<int64_t>(jobs, int64_t(cells.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int64_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  fs::create_directories(config.out_dir);

  // summary.csv: the three grouping shapes
  {
    std::map<SummaryKey, SummaryAgg> agg;
    for (const auto& cell : result.cells) {
      if (!cell.ok) continue;
      for (const auto& [method, r] : cell.report.methods) {
        for (SummaryKey key :
             {SummaryKey{"arch:method", cell.arch, method},
              SummaryKey{"augmentation:dataset", cell.augmentation,
                         cell.dataset},
              SummaryKey{"loss:method", cell.loss, method}}) {
          auto& a = agg[key];
          a.auroc_sum += r.auroc;
          a.aupr_sum += r.aupr;
          a.n += 1;
        }
      }
    }
    result.summary_path = (fs::path(config.out_dir) / "summary.csv").string();
    std::ofstream f(result.summary_path);
    if (!f) throw DataError("cannot write '" + result.summary_path + "'");
    f << "# config_digest=" << config.base.config_digest << "\n";
    f << "grouping,key1,key2,mean_auroc,mean_aupr,n_runs\n";
    char buf[192];
    for (const auto& [key, a] : agg) {
      std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.9g,%.9g,%lld\n",
                    key.grouping.c_str(), key.key1.c_str(), key.key2.c_str(),
                    a.auroc_sum / double(a.n), a.aupr_sum / double(a.n),
                    (long long)a.n);
      f << buf;
    }
  }

  // correlation.csv across datasets, per (arch, loss) column as in a
  // methods-by-training-setup table
  {
    std::set<std::string> datasets;
    for (const auto& cell : result.cells) {
      if (cell.ok) datasets.insert(cell.dataset);
    }
    if (datasets.size() >= 2) {
      // one correlation study per (arch, loss); rows averaged over seeds
      // and augmentations per dataset
      std::map<std::string, std::vector<RunSummary>> groups;
      for (const auto& cell : result.cells) {
        if (!cell.ok) continue;
        const std::string g = cell.arch + "-" + cell.loss;
        auto& runs = groups[g];
        auto it = std::find_if(runs.begin(), runs.end(), [&](const RunSummary& r) {
          return r.dataset == cell.dataset;
        });
        if (it == runs.end()) {
          RunSummary r;
          r.dataset = cell.dataset;
          r.id_accuracy = cell.report.id_accuracy;
          for (const auto& [m, mr] : cell.report.methods) {
            r.method_auroc[m] = mr.auroc;
          }
          runs.push_back(std::move(r));
        }
      }
      result.correlation_path =
          (fs::path(config.out_dir) / "correlation.csv").string();
      std::ofstream f(result.correlation_path);
      if (!f) throw DataError("cannot write correlation.csv");
      f << "# config_digest=" << config.base.config_digest << "\n";
      f << "arch_loss,method,pcc,degenerate\n";
      char buf[160];
      for (const auto& [g, runs] : groups) {
        if (runs.size() < 2) continue;
        for (const auto& e : correlation_study(runs)) {
          if (e.valid) {
            std::snprintf(buf, sizeof(buf), "%s,%s,%.9g,%s\n", g.c_str(),
                          e.method.c_str(), e.pcc,
                          e.degenerate ? "true" : "false");
          } else {
            std::snprintf(buf, sizeof(buf), "%s,%s,n/a,%s\n", g.c_str(),
                          e.method.c_str(), e.degenerate ? "true" : "false");
          }
          f << buf;
        }
      }
    }
  }

  // failures.csv when any cell failed
  {
    bool any_failed = false;
    for (const auto& cell : result.cells) any_failed |= !cell.ok;
    if (any_failed) {
      result.failures_path =
          (fs::path(config.out_dir) / "failures.csv").string();
      std::ofstream f(result.failures_path);
      f << "cell_id,error\n";
      for (const auto& cell : result.cells) {
        if (!cell.ok) {
          std::string msg = cell.error;
          std::replace(msg.begin(), msg.end(), ',', ';');
          std::replace(msg.begin(), msg.end(), '\n', ' ');
          f << cell.cell_id << "," << msg << "\n";
        }
      }
    }
  }
  return result;
}

std::string describe_checkpoint(const std::string& checkpoint_dir) {
  ModelArtifacts artifacts = load_checkpoint(checkpoint_dir);
  const Backbone& model = *artifacts.model;
  std::ostringstream out;
  out << "arch: " << arch_to_string(model.config().arch) << "\n"
      << "in_channels: " << model.config().in_channels << "\n"
      << "seq_len: " << model.config().seq_len << "\n"
      << "n_classes: " << model.config().n_classes << "\n"
      << "width: " << model.config().width << "\n"
      << "parameters: " << model.param_count() << "\n"
      << "buffers: " << model.buffers().size() << " tensors\n"
      << "loss: " << artifacts.meta.loss_kind << "\n"
      << "epochs: " << artifacts.meta.epochs << "\n"
      << "final_train_accuracy: " << artifacts.meta.final_train_accuracy
      << "\n"
      << "final_val_accuracy: " << artifacts.meta.final_val_accuracy << "\n"
      << "config_digest: " << artifacts.meta.config_digest << "\n"
      << "seed: " << artifacts.meta.seed << "\n"
      << "normalization channels: " << artifacts.stats.mean.size() << "\n";
  return out.str();
}

}  // namespace tsood
