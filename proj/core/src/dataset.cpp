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

#include "tsood/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace tsood {

Tensor TimeSeriesDataset::batch(std::span<const int64_t> indices) const {
  Tensor out({int64_t(indices.size()), d, L});
  auto od = out.mutable_data();
  for (size_t b = 0; b < indices.size(); ++b) {
    auto src = instance(indices[b]);
    std::copy(src.begin(), src.end(), od.begin() + int64_t(b) * d * L);
  }
  return out;
}

Tensor TimeSeriesDataset::all() const {
  std::vector<int64_t> idx(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) idx[size_t(i)] = i;
  return batch(idx);
}

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = char(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string strip(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream iss(s);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

float parse_float(const std::string& tok, int64_t line_no) {
  const std::string t = strip(tok);
  float v = 0.0f;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || t.empty()) {
    throw ParseError(ParseError::Kind::MalformedNumber,
                     "line " + std::to_string(line_no) +
                         ": malformed number '" + tok + "'");
  }
  return v;
}

}  // namespace

TimeSeriesDataset parse_ts_file(std::istream& in, const std::string& name) {
  TimeSeriesDataset ds;
  ds.name = name;

  bool seen_data = false;
  bool equal_length = true;
  bool has_equal_length = false;
  int64_t decl_dims = -1;
  int64_t decl_len = -1;
  bool class_label_declared = false;
  std::map<std::string, int> class_index;

  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = strip(line);
    if (t.empty() || t[0] == '#') continue;
    if (t[0] != '@') {
      throw ParseError(ParseError::Kind::MissingHeader,
                       "line " + std::to_string(line_no) +
                           ": data before @data directive");
    }
    const auto toks = split_ws(t);
    const std::string key = lower(toks[0]);
    if (key == "@data") {
      seen_data = true;
      break;
    } else if (key == "@problemname") {
      if (toks.size() > 1 && ds.name.empty()) ds.name = toks[1];
    } else if (key == "@dimensions") {
      if (toks.size() > 1) decl_dims = std::stoll(toks[1]);
    } else if (key == "@serieslength") {
      if (toks.size() > 1) decl_len = std::stoll(toks[1]);
    } else if (key == "@equallength") {
      has_equal_length = true;
      equal_length = toks.size() > 1 && lower(toks[1]) == "true";
    } else if (key == "@classlabel") {
      // "@classLabel true name1 name2 ..."
      if (toks.size() > 1 && lower(toks[1]) == "true") {
        class_label_declared = true;
        for (size_t i = 2; i < toks.size(); ++i) {
          auto [it, inserted] =
              class_index.emplace(toks[i], int(ds.class_names.size()));
          if (inserted) ds.class_names.push_back(toks[i]);
        }
      }
    }
    // @timeStamps, @univariate, @missing: accepted and ignored
  }

  if (!seen_data) {
    throw ParseError(ParseError::Kind::MissingHeader,
                     "no @data directive found");
  }
  if (has_equal_length && !equal_length) {
    throw ParseError(ParseError::Kind::UnequalLength,
                     "@equalLength false: only equal-length series supported");
  }

  int64_t d = decl_dims;
  int64_t L = decl_len;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = strip(line);
    if (t.empty() || t[0] == '#') continue;

    std::vector<std::string> blocks;
    size_t start = 0;
    while (true) {
      const size_t pos = t.find(':', start);
      if (pos == std::string::npos) {
        blocks.push_back(t.substr(start));
        break;
      }
      blocks.push_back(t.substr(start, pos - start));
      start = pos + 1;
    }
    if (blocks.size() < 2) {
      throw ParseError(ParseError::Kind::DimensionMismatch,
                       "line " + std::to_string(line_no) +
                           ": expected <channels...>:<label>");
    }
    const std::string label = strip(blocks.back());
    blocks.pop_back();

    if (d < 0) d = int64_t(blocks.size());
    if (int64_t(blocks.size()) != d) {
      throw ParseError(ParseError::Kind::DimensionMismatch,
                       "line " + std::to_string(line_no) + ": row has " +
                           std::to_string(blocks.size()) +
                           " dimension blocks, expected " + std::to_string(d));
    }

    std::vector<float> row;
    for (const std::string& block : blocks) {
      std::vector<float> channel;
      size_t s2 = 0;
      const std::string b2 = strip(block);
      while (true) {
        const size_t pos = b2.find(',', s2);
        const std::string tok =
            pos == std::string::npos ? b2.substr(s2) : b2.substr(s2, pos - s2);
        channel.push_back(parse_float(tok, line_no));
        if (pos == std::string::npos) break;
        s2 = pos + 1;
      }
      if (L < 0) L = int64_t(channel.size());
      if (int64_t(channel.size()) != L) {
        throw ParseError(ParseError::Kind::UnequalLength,
                         "line " + std::to_string(line_no) + ": channel has " +
                             std::to_string(channel.size()) +
                             " values, expected " + std::to_string(L));
      }
      row.insert(row.end(), channel.begin(), channel.end());
    }

    int label_idx;
    if (class_label_declared) {
      auto it = class_index.find(label);
      if (it == class_index.end()) {
        throw ParseError(ParseError::Kind::UnknownClass,
                         "line " + std::to_string(line_no) + ": label '" +
                             label + "' not declared");
      }
      label_idx = it->second;
    } else {
      auto it = class_index.find(label);
      if (it == class_index.end()) {
        label_idx = int(ds.class_names.size());
        class_index.emplace(label, label_idx);
        ds.class_names.push_back(label);
      } else {
        label_idx = it->second;
      }
    }

    ds.values.insert(ds.values.end(), row.begin(), row.end());
    ds.labels.push_back(label_idx);
  }

  ds.n = int64_t(ds.labels.size());
  ds.d = std::max<int64_t>(d, 0);
  ds.L = std::max<int64_t>(L, 0);
  if (decl_dims > 0 && ds.n > 0 && ds.d != decl_dims) {
    throw ParseError(ParseError::Kind::DimensionMismatch,
                     "@dimensions says " + std::to_string(decl_dims) +
                         " but rows have " + std::to_string(ds.d));
  }
  if (decl_len > 0 && ds.n > 0 && ds.L != decl_len) {
    throw ParseError(ParseError::Kind::UnequalLength,
                     "@seriesLength says " + std::to_string(decl_len) +
                         " but rows have " + std::to_string(ds.L));
  }
  return ds;
}

TimeSeriesDataset parse_ts_string(const std::string& text,
                                  const std::string& name) {
  std::istringstream iss(text);
  return parse_ts_file(iss, name);
}

TimeSeriesDataset load_ts_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_ts_file(in, "");
}

std::string to_ts_string(const TimeSeriesDataset& ds) {
  std::string out;
  out += "@problemName " +
         (ds.name.empty() ? std::string("unnamed") : ds.name) + "\n";
  out += "@timeStamps false\n";
  out += "@missing false\n";
  out += std::string("@univariate ") + (ds.d == 1 ? "true" : "false") + "\n";
  out += "@dimensions " + std::to_string(ds.d) + "\n";
  out += "@equalLength true\n";
  out += "@seriesLength " + std::to_string(ds.L) + "\n";
  out += "@classLabel true";
  for (const auto& c : ds.class_names) out += " " + c;
  out += "\n@data\n";
  char buf[48];
  for (int64_t i = 0; i < ds.n; ++i) {
    auto row = ds.instance(i);
    for (int64_t j = 0; j < ds.d; ++j) {
      for (int64_t t = 0; t < ds.L; ++t) {
        // %.9g round-trips float32 exactly
        std::snprintf(buf, sizeof(buf), "%.9g",
                      double(row[size_t(j * ds.L + t)]));
        out += buf;
        out += (t + 1 < ds.L) ? "," : ":";
      }
    }
    out += ds.class_names[size_t(ds.labels[size_t(i)])];
    out += "\n";
  }
  return out;
}

void save_ts_file(const TimeSeriesDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << to_ts_string(ds);
}

TimeSeriesDataset generate_synthetic(const SyntheticConfig& config) {
  if (config.classes <= 0 || config.n_per_class <= 0 || config.d <= 0 ||
      config.L <= 0) {
    throw ConfigError("generate_synthetic: all counts must be positive");
  }
  TimeSeriesDataset ds;
  ds.name = config.name;
  ds.split_tag = config.split_tag;
  ds.n = config.classes * config.n_per_class;
  ds.d = config.d;
  ds.L = config.L;
  ds.values.resize(size_t(ds.n * ds.d * ds.L));
  ds.labels.resize(size_t(ds.n));
  for (int64_t c = 0; c < config.classes; ++c) {
    ds.class_names.push_back("c" + std::to_string(c));
  }
  Rng rng(config.seed);
  const double two_pi = 6.283185307179586476925286766559;
  int64_t i = 0;
  for (int64_t c = 0; c < config.classes; ++c) {
    const double freq = double(c + 1);
    for (int64_t k = 0; k < config.n_per_class; ++k, ++i) {
      ds.labels[size_t(i)] = int(c);
      auto row = ds.instance_mut(i);
      for (int64_t j = 0; j < config.d; ++j) {
        const double phase = rng.uniform(0.0, two_pi);
        for (int64_t t = 0; t < config.L; ++t) {
          const double v =
              std::sin(two_pi * freq * double(t) / double(config.L) + phase) +
              rng.normal(0.0, config.noise_sigma);
          row[size_t(j * config.L + t)] = float(v);
        }
      }
    }
  }
  return ds;
}

namespace {

TimeSeriesDataset subset(const TimeSeriesDataset& src,
                         const std::vector<int64_t>& indices,
                         const std::string& split_tag) {
  TimeSeriesDataset out;
  out.name = src.name;
  out.split_tag = split_tag;
  out.d = src.d;
  out.L = src.L;
  out.class_names = src.class_names;
  out.n = int64_t(indices.size());
  out.values.reserve(size_t(out.n * out.d * out.L));
  out.labels.reserve(size_t(out.n));
  for (int64_t idx : indices) {
    auto row = src.instance(idx);
    out.values.insert(out.values.end(), row.begin(), row.end());
    out.labels.push_back(src.labels[size_t(idx)]);
  }
  return out;
}

}  // namespace

IdOodSplit split_id_ood(const TimeSeriesDataset& train,
                        const TimeSeriesDataset& test, uint64_t seed) {
  if (train.n_classes() < 2) {
    throw DataError("split_id_ood: need at least 2 classes");
  }
  if (train.class_names != test.class_names || train.d != test.d ||
      train.L != test.L) {
    throw DataError("split_id_ood: train/test metadata disagree");
  }
  const int64_t C = train.n_classes();
  const int64_t n_id = (C + 1) / 2;  // ceil(C/2)

  SplitSpec spec;
  spec.seed = seed;
  for (int64_t c = 0; c < C; ++c) {
    if (c < n_id) {
      spec.id_classes.push_back(int(c));
    } else {
      spec.ood_classes.push_back(int(c));
    }
  }

  auto is_id = [&](int label) { return int64_t(label) < n_id; };

  std::vector<int64_t> id_train_idx, id_test_idx, ood_test_idx;
  for (int64_t i = 0; i < train.n; ++i) {
    if (is_id(train.labels[size_t(i)])) id_train_idx.push_back(i);
  }
  for (int64_t i = 0; i < test.n; ++i) {
    if (is_id(test.labels[size_t(i)])) {
      id_test_idx.push_back(i);
    } else {
      ood_test_idx.push_back(i);
    }
  }
  if (id_train_idx.empty() || id_test_idx.empty() || ood_test_idx.empty()) {
    throw DataError("split_id_ood: a split side is empty (id_train=" +
                    std::to_string(id_train_idx.size()) + ", id_test=" +
                    std::to_string(id_test_idx.size()) + ", ood_test=" +
                    std::to_string(ood_test_idx.size()) + ")");
  }

  IdOodSplit out;
  out.spec = std::move(spec);
  out.id_train = subset(train, id_train_idx, "train");
  out.id_test = subset(test, id_test_idx, "test");
  out.ood_test = subset(test, ood_test_idx, "test");
  return out;
}

EvalMixture make_eval_mixture(const TimeSeriesDataset& id_test,
                              const TimeSeriesDataset& ood_test,
                              uint64_t seed) {
  if (id_test.n == 0 || ood_test.n == 0) {
    throw DataError("make_eval_mixture: empty side");
  }
  const int64_t n = std::min(id_test.n, ood_test.n);
  Rng rng(seed);

  auto pick = [&](int64_t total) {
    std::vector<int64_t> idx(static_cast<size_t>(total));
    for (int64_t i = 0; i < total; ++i) idx[size_t(i)] = i;
    rng.shuffle(idx);
    idx.resize(size_t(n));
    return idx;
  };
  const std::vector<int64_t> id_pick = pick(id_test.n);
  const std::vector<int64_t> ood_pick = pick(ood_test.n);

  struct Item {
    const TimeSeriesDataset* src;
    int64_t idx;
    int ood;
  };
  std::vector<Item> items;
  items.reserve(size_t(2 * n));
  for (int64_t i : id_pick) items.push_back({&id_test, i, 0});
  for (int64_t i : ood_pick) items.push_back({&ood_test, i, 1});
  rng.shuffle(items);

  EvalMixture mix;
  mix.instances.name = id_test.name;
  mix.instances.split_tag = "eval";
  mix.instances.d = id_test.d;
  mix.instances.L = id_test.L;
  mix.instances.class_names = id_test.class_names;
  mix.instances.n = int64_t(items.size());
  mix.instances.values.reserve(
      size_t(mix.instances.n * id_test.d * id_test.L));
  for (const Item& it : items) {
    auto row = it.src->instance(it.idx);
    mix.instances.values.insert(mix.instances.values.end(), row.begin(),
                                row.end());
    mix.instances.labels.push_back(it.src->labels[size_t(it.idx)]);
    mix.is_ood.push_back(it.ood);
    mix.source_index.push_back(it.idx);
  }
  return mix;
}

ChannelStats fit_channel_stats(const TimeSeriesDataset& source) {
  ChannelStats stats;
  stats.mean.resize(size_t(source.d));
  stats.stddev.resize(size_t(source.d));
  const int64_t count = source.n * source.L;
  for (int64_t j = 0; j < source.d; ++j) {
    double m = 0.0;
    for (int64_t i = 0; i < source.n; ++i) {
      auto row = source.instance(i);
      for (int64_t t = 0; t < source.L; ++t) {
        m += double(row[size_t(j * source.L + t)]);
      }
    }
    m /= double(count);
    double var = 0.0;
    for (int64_t i = 0; i < source.n; ++i) {
      auto row = source.instance(i);
      for (int64_t t = 0; t < source.L; ++t) {
        const double dv = double(row[size_t(j * source.L + t)]) - m;
        var += dv * dv;
      }
    }
    var /= double(count);
    stats.mean[size_t(j)] = float(m);
    stats.stddev[size_t(j)] = float(std::sqrt(var));
  }
  return stats;
}

void apply_channel_stats(const ChannelStats& stats,
                         TimeSeriesDataset& target) {
  if (int64_t(stats.mean.size()) != target.d) {
    throw DataError("apply_channel_stats: channel count mismatch");
  }
  for (int64_t j = 0; j < target.d; ++j) {
    const float m = stats.mean[size_t(j)];
    const float s = std::max(stats.stddev[size_t(j)], 1e-8f);
    for (int64_t i = 0; i < target.n; ++i) {
      auto row = target.instance_mut(i);
      for (int64_t t = 0; t < target.L; ++t) {
        row[size_t(j * target.L + t)] =
            (row[size_t(j * target.L + t)] - m) / s;
      }
    }
  }
}

}  // namespace tsood
