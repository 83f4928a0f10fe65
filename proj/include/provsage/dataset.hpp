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

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "provsage/graph.hpp"

namespace provsage {

struct LabeledGraph {
  std::string graph_id;
  int scene = -1;
  bool attack = false;
  ProvenanceGraph graph;
};

// graph_id / scene_size gives the scene; listed scenes are attack scenes.
// The defaults follow the public StreamSpot release (scene 3 is the
// drive-by-download attack).
struct SceneMapping {
  long scene_size = 100;
  std::vector<int> attack_scenes{3};

  bool is_attack(int scene) const;
};

// StreamSpot TSV: src_id, src_type, dst_id, dst_type, edge_type, graph_id.
// Timestamps are synthesized as the per-graph edge ordinal. Graphs come back
// ordered by numeric graph_id.
std::vector<LabeledGraph> read_streamspot(std::istream& in, const SceneMapping& mapping = {});
std::vector<LabeledGraph> load_streamspot(const std::string& path,
                                          const SceneMapping& mapping = {});
void write_streamspot(std::ostream& out, const std::vector<LabeledGraph>& graphs);

// Canonical edge stream, one record per line.
ProvenanceGraph read_edge_stream(std::istream& in);
ProvenanceGraph load_edge_stream(const std::string& path);
void write_edge_stream(std::ostream& out, const ProvenanceGraph& graph);
void save_edge_stream(const std::string& path, const ProvenanceGraph& graph);

// One node id per line; blank lines and '#' comments are skipped.
std::vector<std::string> load_id_list(const std::string& path);

}  // namespace provsage
