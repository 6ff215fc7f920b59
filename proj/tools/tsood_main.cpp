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

#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "tsood/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitRunError = 3;

struct CommonArgs {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<uint64_t> seed;
  int64_t jobs = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
  auto* opt = cmd->add_option("--config", args.config_path,
                              "pipeline config file (JSON)");
  if (config_required) opt->required();
  cmd->add_option_function<std::string>(
      "--out", [&args](const std::string& v) { args.out_dir = v; },
      "output directory (overrides the config)");
  cmd->add_option_function<uint64_t>(
      "--seed", [&args](uint64_t v) { args.seed = v; },
      "seed (overrides the config)");
  cmd->add_option("--jobs", args.jobs, "parallel worker count");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tsood: train small time-series classifiers and benchmark "
               "post-hoc out-of-distribution scorers"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, bench_args, matrix_args;
  std::string eval_checkpoint, bench_checkpoint, inspect_dir;

  CLI::App* cmd_train =
      app.add_subcommand("train", "train a backbone on the ID classes");
  add_common(cmd_train, train_args);

  CLI::App* cmd_eval = app.add_subcommand(
      "eval", "fit scorers and evaluate AUROC/AUPR on the 50/50 mixture");
  add_common(cmd_eval, eval_args);
  cmd_eval->add_option("--checkpoint", eval_checkpoint,
                       "checkpoint directory (defaults to <out>/checkpoint)");

  CLI::App* cmd_bench = app.add_subcommand(
      "bench", "per-sample scoring overhead (always single-threaded)");
  add_common(cmd_bench, bench_args);
  cmd_bench->add_option("--checkpoint", bench_checkpoint,
                        "checkpoint directory (defaults to <out>/checkpoint)");

  CLI::App* cmd_matrix = app.add_subcommand(
      "matrix", "sweep datasets x archs x losses x augmentations x seeds");
  add_common(cmd_matrix, matrix_args);

  CLI::App* cmd_inspect =
      app.add_subcommand("inspect", "print a checkpoint summary");
  cmd_inspect->add_option("checkpoint", inspect_dir, "checkpoint directory")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_train->parsed()) {
      const auto config = tsood::load_pipeline_config(
          train_args.config_path, train_args.out_dir, train_args.seed);
      const auto result = tsood::run_train(config);
      std::printf("checkpoint: %s\n", result.checkpoint_dir.c_str());
      std::printf("final_train_accuracy: %.4f\n",
                  result.meta.final_train_accuracy);
      if (result.meta.final_val_accuracy >= 0.0) {
        std::printf("final_val_accuracy: %.4f\n",
                    result.meta.final_val_accuracy);
      }
      return kExitOk;
    }
    if (cmd_eval->parsed()) {
      const auto config = tsood::load_pipeline_config(
          eval_args.config_path, eval_args.out_dir, eval_args.seed);
      const std::string checkpoint =
          eval_checkpoint.empty() ? config.out_dir + "/checkpoint"
                                  : eval_checkpoint;
      const auto result = tsood::run_eval(config, checkpoint);
      std::printf("results: %s\n", result.results_path.c_str());
      std::printf("id_accuracy: %.4f\n", result.report.id_accuracy);
      for (const auto& [method, r] : result.report.methods) {
        std::printf("%-10s auroc=%.4f aupr=%.4f latency_ms=%.4f\n",
                    method.c_str(), r.auroc, r.aupr, r.mean_latency_ms);
      }
      return kExitOk;
    }
    if (cmd_bench->parsed()) {
      const auto config = tsood::load_pipeline_config(
          bench_args.config_path, bench_args.out_dir, bench_args.seed);
      const std::string checkpoint =
          bench_checkpoint.empty() ? config.out_dir + "/checkpoint"
                                   : bench_checkpoint;
      const auto report = tsood::run_bench(config, checkpoint, bench_args.jobs);
      std::printf("jobs: %lld (bench is always single-threaded)\n",
                  (long long)report.jobs);
      for (const auto& row : report.rows) {
        std::printf("%-10s %.4f ms/sample\n", row.method.c_str(), row.mean_ms);
      }
      return kExitOk;
    }
    if (cmd_matrix->parsed()) {
      const auto config = tsood::load_matrix_config(
          matrix_args.config_path, matrix_args.out_dir, matrix_args.seed);
      const auto result = tsood::run_matrix(config, matrix_args.jobs);
      int64_t ok = 0, failed = 0;
      for (const auto& cell : result.cells) (cell.ok ? ok : failed)++;
      std::printf("cells: %lld ok, %lld failed\n", (long long)ok,
                  (long long)failed);
      std::printf("summary: %s\n", result.summary_path.c_str());
      if (!result.correlation_path.empty()) {
        std::printf("correlation: %s\n", result.correlation_path.c_str());
      }
      if (!result.failures_path.empty()) {
        std::printf("failures: %s\n", result.failures_path.c_str());
      }
      return failed == 0 ? kExitOk : kExitRunError;
    }
    if (cmd_inspect->parsed()) {
      std::fputs(tsood::describe_checkpoint(inspect_dir).c_str(), stdout);
      return kExitOk;
    }
  } catch (const tsood::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRunError;
  }
  return kExitOk;
}
