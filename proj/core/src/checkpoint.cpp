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

#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "tsood/model.hpp"

namespace tsood {

namespace {

using nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

void write_floats_le(std::ofstream& out, std::span<const float> data) {
  static_assert(sizeof(float) == 4);
  // x86/arm64 little-endian; serialize bytes as stored
  out.write(reinterpret_cast<const char*>(data.data()),
            std::streamsize(data.size() * sizeof(float)));
}

void read_floats_le(std::ifstream& in, std::span<float> data) {
  in.read(reinterpret_cast<char*>(data.data()),
          std::streamsize(data.size() * sizeof(float)));
  if (!in) throw DataError("weights.bin truncated");
}

ordered_json tensor_entry(const std::string& name, const Tensor& t) {
  ordered_json e;
  e["name"] = name;
  e["shape"] = t.shape();
  return e;
}

}  // namespace

void save_checkpoint(const ModelArtifacts& artifacts, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const Backbone& model = *artifacts.model;

  ordered_json manifest;
  manifest["schema_version"] = kSchemaVersion;
  manifest["arch"] = arch_to_string(model.config().arch);
  manifest["config"] = {
      {"in_channels", model.config().in_channels},
      {"seq_len", model.config().seq_len},
      {"n_classes", model.config().n_classes},
      {"width", model.config().width},
      {"seed", model.config().seed},
  };
  manifest["params"] = ordered_json::array();
  for (const auto& [name, t] : model.params()) {
    manifest["params"].push_back(tensor_entry(name, t));
  }
  manifest["buffers"] = ordered_json::array();
  for (const auto& [name, t] : model.buffers()) {
    manifest["buffers"].push_back(tensor_entry(name, t));
  }
  manifest["normalization"] = {
      {"mean", artifacts.stats.mean},
      {"stddev", artifacts.stats.stddev},
  };
  manifest["training"] = {
      {"loss", artifacts.meta.loss_kind},
      {"epochs", artifacts.meta.epochs},
      {"final_train_accuracy", artifacts.meta.final_train_accuracy},
      {"final_val_accuracy", artifacts.meta.final_val_accuracy},
      {"config_digest", artifacts.meta.config_digest},
      {"seed", artifacts.meta.seed},
  };

  {
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw DataError("cannot write manifest.json in '" + dir + "'");
    out << manifest.dump(2) << "\n";
  }
  {
    std::ofstream out(fs::path(dir) / "weights.bin", std::ios::binary);
    if (!out) throw DataError("cannot write weights.bin in '" + dir + "'");
    for (const auto& [name, t] : model.params()) write_floats_le(out, t.data());
    for (const auto& [name, t] : model.buffers()) {
      write_floats_le(out, t.data());
    }
  }
}

ModelArtifacts load_checkpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw DataError("cannot open manifest.json in '" + dir + "'");
  ordered_json manifest = ordered_json::parse(mf);
  if (manifest.at("schema_version").get<int>() != kSchemaVersion) {
    throw DataError("unsupported checkpoint schema version");
  }

  ModelConfig config;
  config.arch = arch_from_string(manifest.at("arch").get<std::string>());
  const auto& cj = manifest.at("config");
  config.in_channels = cj.at("in_channels").get<int64_t>();
  config.seq_len = cj.at("seq_len").get<int64_t>();
  config.n_classes = cj.at("n_classes").get<int64_t>();
  config.width = cj.at("width").get<int64_t>();
  config.seed = cj.at("seed").get<uint64_t>();

  ModelArtifacts artifacts;
  artifacts.model = Backbone::build(config);

  auto check_and_read = [&](std::ifstream& in, const ordered_json& listed,
                            std::vector<std::pair<std::string, Tensor>>& dst) {
    if (listed.size() != dst.size()) {
      throw DataError("checkpoint tensor list does not match architecture");
    }
    size_t i = 0;
    for (const auto& entry : listed) {
      const std::string name = entry.at("name").get<std::string>();
      const Shape shape = entry.at("shape").get<Shape>();
      if (dst[i].first != name || dst[i].second.shape() != shape) {
        throw DataError("checkpoint tensor '" + name +
                        "' does not match architecture schema");
      }
      read_floats_le(in, dst[i].second.mutable_data());
      ++i;
    }
  };

  std::ifstream wf(fs::path(dir) / "weights.bin", std::ios::binary);
  if (!wf) throw DataError("cannot open weights.bin in '" + dir + "'");
  check_and_read(wf, manifest.at("params"), artifacts.model->params());
  check_and_read(wf, manifest.at("buffers"), artifacts.model->buffers());

  const auto& nj = manifest.at("normalization");
  artifacts.stats.mean = nj.at("mean").get<std::vector<float>>();
  artifacts.stats.stddev = nj.at("stddev").get<std::vector<float>>();

  const auto& tj = manifest.at("training");
  artifacts.meta.loss_kind = tj.at("loss").get<std::string>();
  artifacts.meta.epochs = tj.at("epochs").get<int64_t>();
  artifacts.meta.final_train_accuracy =
      tj.at("final_train_accuracy").get<double>();
  artifacts.meta.final_val_accuracy = tj.at("final_val_accuracy").get<double>();
  artifacts.meta.config_digest = tj.at("config_digest").get<std::string>();
  artifacts.meta.seed = tj.at("seed").get<uint64_t>();
  return artifacts;
}

}  // namespace tsood
