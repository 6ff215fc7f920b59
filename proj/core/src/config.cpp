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

#include <fstream>

#include "json.hpp"
#include "tsood/config.hpp"

namespace tsood {

namespace {

using nlohmann::json;

[[noreturn]] void bad_key(const std::string& path, const std::string& why) {
  throw ConfigError("config key '" + path + "': " + why);
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback,
         const std::string& path) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    bad_key(path + "." + key, "wrong type");
  }
}

DatasetConfig parse_dataset(const json& j, const std::string& path) {
  DatasetConfig out;
  if (!j.is_object()) bad_key(path, "must be an object");
  out.name = get_or<std::string>(j, "name", "", path);
  const bool has_synth = j.contains("synthetic");
  const bool has_paths = j.contains("train_path") || j.contains("test_path");
  if (has_synth == has_paths) {
    bad_key(path, "needs exactly one of 'synthetic' or train_path/test_path");
  }
  if (has_synth) {
    const json& s = j.at("synthetic");
    SyntheticConfig sc;
    sc.classes = get_or<int64_t>(s, "classes", 4, path + ".synthetic");
    sc.n_per_class =
        get_or<int64_t>(s, "n_per_class", 50, path + ".synthetic");
    sc.d = get_or<int64_t>(s, "dims", 2, path + ".synthetic");
    sc.L = get_or<int64_t>(s, "length", 32, path + ".synthetic");
    sc.noise_sigma =
        get_or<double>(s, "noise_sigma", 0.1, path + ".synthetic");
    sc.seed = get_or<uint64_t>(s, "seed", 1, path + ".synthetic");
    sc.name = out.name.empty() ? "synthetic" : out.name;
    if (sc.classes < 2) bad_key(path + ".synthetic.classes", "need >= 2");
    if (sc.n_per_class < 1 || sc.d < 1 || sc.L < 2) {
      bad_key(path + ".synthetic", "counts must be positive");
    }
    out.synthetic = sc;
    out.synthetic_test_per_class =
        get_or<int64_t>(s, "n_per_class_test", 0, path + ".synthetic");
    if (out.name.empty()) out.name = "synthetic";
  } else {
    out.train_path = get_or<std::string>(j, "train_path", "", path);
    out.test_path = get_or<std::string>(j, "test_path", "", path);
    if (out.train_path.empty()) bad_key(path + ".train_path", "missing");
    if (out.test_path.empty()) bad_key(path + ".test_path", "missing");
  }
  return out;
}

AugmentationSpec parse_augmentation(const json& j, const std::string& path) {
  AugmentationSpec out;
  if (j.is_string()) {
    out.kind = aug_kind_from_string(j.get<std::string>());
    return out;
  }
  if (!j.is_object()) bad_key(path, "must be a string or object");
  if (!j.contains("kind")) bad_key(path + ".kind", "missing");
  out.kind = aug_kind_from_string(j.at("kind").get<std::string>());
  out.sigma = get_or<double>(j, "sigma", out.sigma, path);
  out.n_segments = get_or<int>(j, "n_segments", out.n_segments, path);
  out.n_knots = get_or<int>(j, "knots", out.n_knots, path);
  out.window_ratio = get_or<double>(j, "window_ratio", out.window_ratio, path);
  out.scales = get_or<std::vector<double>>(j, "scales", out.scales, path);
  out.crop_ratio = get_or<double>(j, "crop_ratio", out.crop_ratio, path);
  out.mask_ratio = get_or<double>(j, "mask_ratio", out.mask_ratio, path);
  return out;
}

ScorerSpec parse_scorer(const json& j, const std::string& path) {
  ScorerSpec out;
  if (j.is_string()) {
    out.method = method_from_string(j.get<std::string>());
  } else if (j.is_object()) {
    if (!j.contains("method")) bad_key(path + ".method", "missing");
    out.method = method_from_string(j.at("method").get<std::string>());
    out.temperature = get_or<double>(j, "temperature", out.temperature, path);
    out.odin_temperature =
        get_or<double>(j, "odin_temperature", out.odin_temperature, path);
    out.odin_epsilon = get_or<double>(j, "epsilon", out.odin_epsilon, path);
    out.react_percentile =
        get_or<double>(j, "percentile", out.react_percentile, path);
    out.dice_prune_fraction =
        get_or<double>(j, "prune_fraction", out.dice_prune_fraction, path);
    out.pca_retained = get_or<double>(j, "retained", out.pca_retained, path);
    out.if_trees = get_or<int64_t>(j, "trees", out.if_trees, path);
    out.if_psi = get_or<int64_t>(j, "psi", out.if_psi, path);
    out.if_seed = get_or<uint64_t>(j, "forest_seed", out.if_seed, path);
    out.ocsvm_nu = get_or<double>(j, "nu", out.ocsvm_nu, path);
    out.ocsvm_gamma = get_or<double>(j, "gamma", out.ocsvm_gamma, path);
  } else {
    bad_key(path, "must be a string or object");
  }
  if (out.odin_temperature <= 0.0 || out.temperature <= 0.0) {
    bad_key(path, "temperatures must be positive");
  }
  if (out.odin_epsilon < 0.0) bad_key(path + ".epsilon", "must be >= 0");
  if (out.react_percentile <= 0.0 || out.react_percentile > 100.0) {
    bad_key(path + ".percentile", "must be in (0,100]");
  }
  if (out.dice_prune_fraction < 0.0 || out.dice_prune_fraction >= 1.0) {
    bad_key(path + ".prune_fraction", "must be in [0,1)");
  }
  return out;
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " +
                      e.what());
  }
}

PipelineConfig parse_pipeline(const json& j,
                              const std::optional<std::string>& out_dir,
                              const std::optional<uint64_t>& seed) {
  PipelineConfig out;
  if (!j.contains("dataset")) bad_key("dataset", "missing");
  out.dataset = parse_dataset(j.at("dataset"), "dataset");
  out.arch = arch_from_string(get_or<std::string>(j, "arch", "resnet1d", ""));
  out.width = get_or<int64_t>(j, "width", 64, "");
  if (out.width < 4) bad_key("width", "too small");
  out.loss =
      loss_kind_from_string(get_or<std::string>(j, "loss", "ce", ""));
  if (j.contains("augmentation")) {
    out.augmentation = parse_augmentation(j.at("augmentation"), "augmentation");
  }
  out.augment_ce = get_or<bool>(j, "augment_ce", false, "");

  if (j.contains("train")) {
    const json& t = j.at("train");
    out.train.epochs = get_or<int64_t>(t, "epochs", 100, "train");
    out.train.batch_size = get_or<int64_t>(t, "batch_size", 16, "train");
    out.train.learning_rate =
        get_or<double>(t, "learning_rate", 1e-3, "train");
    out.train.temperature = get_or<double>(t, "temperature", 0.07, "train");
    out.train.linear_probe_epochs =
        get_or<int64_t>(t, "linear_probe_epochs", 50, "train");
    if (out.train.epochs < 0 || out.train.batch_size < 1) {
      bad_key("train", "bad epochs/batch_size");
    }
    if (out.train.temperature <= 0.0) {
      bad_key("train.temperature", "must be positive");
    }
  }

  if (j.contains("scorers")) {
    size_t i = 0;
    for (const auto& s : j.at("scorers")) {
      out.scorers.push_back(parse_scorer(s, "scorers[" + std::to_string(i) +
                                                "]"));
      ++i;
    }
  } else {
    for (Method m : all_methods()) {
      ScorerSpec spec;
      spec.method = m;
      out.scorers.push_back(spec);
    }
  }

  out.seed = seed.value_or(get_or<uint64_t>(j, "seed", 1, ""));
  out.out_dir = out_dir.value_or(get_or<std::string>(j, "out_dir", "out", ""));
  out.record_latency = get_or<bool>(j, "record_latency", true, "");
  out.include_forward = get_or<bool>(j, "include_forward", false, "");
  if (j.contains("bench")) {
    const json& b = j.at("bench");
    out.bench_warmup = get_or<int64_t>(b, "warmup", 20, "bench");
    out.bench_repeats = get_or<int64_t>(b, "repeats", 100, "bench");
    out.include_forward =
        get_or<bool>(b, "include_forward", out.include_forward, "bench");
  }

  // loss flows into the train config; keep one source of truth
  out.train.loss = out.loss;
  out.train.augmentation = out.augmentation;
  out.train.augment_ce = out.augment_ce;
  out.train.seed = out.seed;

  out.config_digest = config_digest_of(json(j).dump(), out.seed);
  return out;
}

}  // namespace

std::string config_digest_of(const std::string& canonical_json,
                             uint64_t seed) {
  return hex64(fnv1a64(canonical_json + "#" + std::to_string(seed)));
}

PipelineConfig load_pipeline_config(const std::string& path,
                                    const std::optional<std::string>& out_dir,
                                    const std::optional<uint64_t>& seed) {
  return parse_pipeline(load_json(path), out_dir, seed);
}

MatrixConfig load_matrix_config(const std::string& path,
                                const std::optional<std::string>& out_dir,
                                const std::optional<uint64_t>& seed) {
  const json j = load_json(path);
  MatrixConfig out;

  // base settings come from the same document minus the list keys
  json base = j;
  base.erase("datasets");
  base.erase("archs");
  base.erase("losses");
  base.erase("augmentations");
  base.erase("seeds");
  if (!base.contains("dataset")) {
    // placeholder; each cell substitutes its own dataset
    base["dataset"] = {{"synthetic", json::object()}};
  }
  out.base = parse_pipeline(base, out_dir, seed);
  out.out_dir = out.base.out_dir;

  if (!j.contains("datasets") || j.at("datasets").empty()) {
    bad_key("datasets", "matrix needs at least one dataset");
  }
  size_t i = 0;
  for (const auto& d : j.at("datasets")) {
    out.datasets.push_back(
        parse_dataset(d, "datasets[" + std::to_string(i) + "]"));
    ++i;
  }
  if (j.contains("archs")) {
    for (const auto& a : j.at("archs")) {
      out.archs.push_back(arch_from_string(a.get<std::string>()));
    }
  } else {
    out.archs.push_back(out.base.arch);
  }
  if (j.contains("losses")) {
    for (const auto& l : j.at("losses")) {
      out.losses.push_back(loss_kind_from_string(l.get<std::string>()));
    }
  } else {
    out.losses.push_back(out.base.loss);
  }
  if (j.contains("augmentations")) {
    size_t k = 0;
    for (const auto& a : j.at("augmentations")) {
      out.augmentations.push_back(
          parse_augmentation(a, "augmentations[" + std::to_string(k) + "]"));
      ++k;
    }
  } else {
    out.augmentations.push_back(out.base.augmentation);
  }
  if (j.contains("seeds")) {
    for (const auto& s : j.at("seeds")) {
      out.seeds.push_back(s.get<uint64_t>());
    }
  } else {
    out.seeds.push_back(out.base.seed);
  }
  if (out.archs.empty() || out.losses.empty() || out.seeds.empty()) {
    bad_key("matrix", "archs/losses/seeds must not be empty lists");
  }
  return out;
}

}  // namespace tsood
