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
#include <string>
#include <vector>

#include "provsage/dataset.hpp"
#include "provsage/graph.hpp"

namespace provsage::synthetic {

// Benign host activity where the "file" label covers two unrelated roles:
// data files (read and written by file workers) and UNIX-domain socket files
// (connect/send/recv from file workers), the latter shaped like network
// sockets one hop out. Everything else is support: shells, file workers,
// network clients, binaries, sockets and broadcast sockets.
struct TwoRoleSpec {
  std::size_t shells = 20;
  std::size_t file_workers = 300;
  std::size_t net_workers = 300;
  std::size_t data_files = 400;
  std::size_t socket_files = 50;
  std::size_t sockets = 150;
  std::size_t binaries = 6;
  std::size_t broadcasts = 8;
};

enum Role : std::uint8_t { kSupport = 0, kRoleA = 1, kRoleB = 2 };

struct TwoRoleGraph {
  ProvenanceGraph graph;
  std::vector<std::uint8_t> role;  // per node index
};

TwoRoleGraph make_two_role_graph(std::uint64_t seed, const TwoRoleSpec& spec = {},
                                 const std::string& prefix = "");

// Processes shaped like the anomalous node of the motivating example: one
// out-edge each of read, write, connect, send and a burst of `burst` out-edges
// of recv, all towards fresh peer nodes.
struct AnomalySpec {
  std::size_t count = 10;
  std::uint32_t burst = 25301;
  std::size_t burst_peers = 4;
  // Give each anomaly a fork in-edge from an existing process so it becomes
  // active when streamed.
  bool forked = true;
  std::string prefix = "anom";
};

struct Injection {
  std::vector<NodeIndex> anomalous;
  std::vector<NodeIndex> peers;
  std::vector<NodeIndex> parents;
};

Injection inject_anomalies(ProvenanceGraph& graph, std::uint64_t seed,
                           const AnomalySpec& spec = {});

// StreamSpot-like corpus: five benign browsing/gaming/download scenes and one
// drive-by-download attack scene, with graph ids laid out scene * 100 + i.
struct CorpusSpec {
  std::size_t graphs_per_benign_scene = 14;
  std::size_t attack_graphs = 25;
  std::size_t workers_min = 120;
  std::size_t workers_max = 220;
  int attack_scene = 3;
};

std::vector<LabeledGraph> make_streamspot_corpus(std::uint64_t seed,
                                                 const CorpusSpec& spec = {});

// One graph of the given scene (attack iff scene == spec.attack_scene).
LabeledGraph make_scene_graph(std::uint64_t seed, int scene, std::size_t index,
                              const CorpusSpec& spec = {});

}  // namespace provsage::synthetic
