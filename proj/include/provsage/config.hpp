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

#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <vector>

#include "provsage/ensemble.hpp"
#include "provsage/features.hpp"
#include "provsage/streaming.hpp"

namespace provsage {

// Run parameters. The file form is flat `key = value` text, one per line,
// '#' starting a comment; keys are the names below.
struct Config {
  std::size_t bs = 5000;            // BS: minibatch size
  std::size_t ss = 200000;          // SS: new edges (or active nodes) per flush
  std::size_t split_size = 150000;  // active nodes per training subgraph
  double r = 1.5;                   // R: confidence ratio
  std::int64_t t = 168;             // T: waiting time; "inf" never confirms
  std::size_t t_hat = 2;            // T_hat: tolerance
  int k = 2;                        // K: hops
  int hidden_width = 32;
  int epoch = 60;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
  UnknownTypePolicy unknown_type_policy = UnknownTypePolicy::kFlagAnomalous;
  SnapshotTrigger ss_semantics = SnapshotTrigger::kNewEdges;
  FeatureSource feature_source = FeatureSource::kSubgraphLocal;
  std::size_t contrast_per_class = 16;
  int stall_limit = 3;
  std::size_t repeats = 5;

  // Throws InvalidArgument on an unknown key or a malformed value.
  void set(const std::string& key, const std::string& value);
  // Throws InvalidArgument.
  void validate() const;

  EnsembleConfig ensemble_config() const;
  StreamConfig stream_config() const;

  // Every key in file form, in declaration order.
  std::string to_text() const;
};

// Applies the lines of a config file on top of `config`. Errors name the
// line; `keys` collects the keys that were set. Throws IoError when the file
// cannot be read.
void apply_config_text(Config& config, std::istream& in, const std::string& source = "config",
                       std::vector<std::string>* keys = nullptr);
void apply_config_file(Config& config, const std::string& path,
                       std::vector<std::string>* keys = nullptr);

}  // namespace provsage
