/* Copyright 2026 The provsage Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "provsage/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "provsage/error.hpp"

namespace provsage {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& v) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw InvalidArgument(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty() || !std::isfinite(out)) {
    throw InvalidArgument(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

}  // namespace

void Config::set(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "BS") bs = parse_integer<std::size_t>(key, v);
  else if (key == "SS") ss = parse_integer<std::size_t>(key, v);
  else if (key == "split_size") split_size = parse_integer<std::size_t>(key, v);
  else if (key == "R") r = parse_real(key, v);
  else if (key == "T") t = (v == "inf") ? AlertConfig::kForever : parse_integer<std::int64_t>(key, v);
  else if (key == "T_hat") t_hat = parse_integer<std::size_t>(key, v);
  else if (key == "K") k = parse_integer<int>(key, v);
  else if (key == "hidden_width") hidden_width = parse_integer<int>(key, v);
  else if (key == "epoch") epoch = parse_integer<int>(key, v);
  else if (key == "learning_rate") learning_rate = parse_real(key, v);
  else if (key == "seed") seed = parse_integer<std::uint64_t>(key, v);
  else if (key == "contrast_per_class") contrast_per_class = parse_integer<std::size_t>(key, v);
  else if (key == "stall_limit") stall_limit = parse_integer<int>(key, v);
  else if (key == "repeats") repeats = parse_integer<std::size_t>(key, v);
  else if (key == "unknown_type_policy") {
    if (v == "flag") unknown_type_policy = UnknownTypePolicy::kFlagAnomalous;
    else if (v == "error") unknown_type_policy = UnknownTypePolicy::kError;
    else throw InvalidArgument(key + ": expected flag or error, got '" + v + "'");
  } else if (key == "ss_semantics") {
    if (v == "edges") ss_semantics = SnapshotTrigger::kNewEdges;
    else if (v == "active-nodes") ss_semantics = SnapshotTrigger::kActiveNodes;
    else throw InvalidArgument(key + ": expected edges or active-nodes, got '" + v + "'");
  } else if (key == "feature_source") {
    if (v == "subgraph") feature_source = FeatureSource::kSubgraphLocal;
    else if (v == "whole-history") feature_source = FeatureSource::kWholeHistory;
    else throw InvalidArgument(key + ": expected subgraph or whole-history, got '" + v + "'");
  } else {
    throw InvalidArgument("unknown config key '" + key + "'");
  }
}

void Config::validate() const {
  if (bs == 0) throw InvalidArgument("BS must be positive");
  if (ss == 0) throw InvalidArgument("SS must be positive");
  if (split_size == 0) throw InvalidArgument("split_size must be positive");
  if (!(r >= 1.0)) throw InvalidArgument("R must be >= 1");
  if (t < 0) throw InvalidArgument("T must be >= 0");
  if (k != 1 && k != 2) throw InvalidArgument("K must be 1 or 2");
  if (hidden_width <= 0) throw InvalidArgument("hidden_width must be positive");
  if (epoch <= 0) throw InvalidArgument("epoch must be positive");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
  if (stall_limit <= 0) throw InvalidArgument("stall_limit must be positive");
  if (repeats == 0) throw InvalidArgument("repeats must be positive");
}

EnsembleConfig Config::ensemble_config() const {
  EnsembleConfig c;
  c.ratio_threshold = r;
  c.train.batch_size = bs;
  c.train.epochs = epoch;
  c.train.learning_rate = learning_rate;
  c.train.hidden_width = hidden_width;
  c.train.hops = k;
  c.stall_limit = stall_limit;
  c.contrast_per_class = contrast_per_class;
  c.split_size = split_size;
  c.seed = seed;
  c.features.source = feature_source;
  return c;
}

StreamConfig Config::stream_config() const {
  StreamConfig c;
  c.snapshot_size = ss;
  c.trigger = ss_semantics;
  c.context_hops = k;
  c.features.source = feature_source;
  c.features.unknown = unknown_type_policy;
  c.alert.wait_time = t;
  c.alert.tolerance = t_hat;
  return c;
}

std::string Config::to_text() const {
  std::ostringstream o;
  o.precision(17);
  o << "BS = " << bs << "\nSS = " << ss << "\nsplit_size = " << split_size << "\nR = " << r
    << "\nT = " << (t == AlertConfig::kForever ? std::string("inf") : std::to_string(t))
    << "\nT_hat = " << t_hat << "\nK = " << k << "\nhidden_width = " << hidden_width
    << "\nepoch = " << epoch << "\nlearning_rate = " << learning_rate << "\nseed = " << seed
    << "\nunknown_type_policy = "
    << (unknown_type_policy == UnknownTypePolicy::kError ? "error" : "flag")
    << "\nss_semantics = " << (ss_semantics == SnapshotTrigger::kNewEdges ? "edges" : "active-nodes")
    << "\nfeature_source = "
    << (feature_source == FeatureSource::kSubgraphLocal ? "subgraph" : "whole-history")
    << "\ncontrast_per_class = " << contrast_per_class << "\nstall_limit = " << stall_limit
    << "\nrepeats = " << repeats << '\n';
  return o.str();
}

void apply_config_text(Config& config, std::istream& in, const std::string& source,
                       std::vector<std::string>* keys) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument(source + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      const std::string key = trim(line.substr(0, eq));
      config.set(key, line.substr(eq + 1));
      if (keys) keys->push_back(key);
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void apply_config_file(Config& config, const std::string& path,
                       std::vector<std::string>* keys) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  apply_config_text(config, in, path, keys);
}

}  // namespace provsage
