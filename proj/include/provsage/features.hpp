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
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "provsage/graph.hpp"

namespace provsage {

// Dense, injective node-type and edge-type maps. Frozen once training starts:
// lookups of unseen strings return nullopt instead of growing the map.
class TypeMaps {
 public:
  TypeMaps() = default;
  TypeMaps(std::vector<std::string> node_types, std::vector<std::string> edge_types);

  std::optional<int> node_type(std::string_view name) const;
  std::optional<int> edge_type(std::string_view name) const;

  std::size_t n_node_types() const { return node_types_.size(); }
  std::size_t n_edge_types() const { return edge_types_.size(); }
  std::size_t feature_width() const { return 2 * edge_types_.size(); }

  const std::vector<std::string>& node_types() const { return node_types_; }
  const std::vector<std::string>& edge_types() const { return edge_types_; }

  // FNV-1a over the ordered type names; binds serialized models to maps.
  std::uint64_t fingerprint() const;

  bool operator==(const TypeMaps& other) const {
    return node_types_ == other.node_types_ && edge_types_ == other.edge_types_;
  }

  // First-appearance extension, used only while building.
  void observe_node_type(std::string_view name);
  void observe_edge_type(std::string_view name);

 private:
  std::vector<std::string> node_types_;
  std::vector<std::string> edge_types_;
  std::unordered_map<std::string, int> node_lookup_;
  std::unordered_map<std::string, int> edge_lookup_;
};

// Consecutive integers in first-appearance order: graphs in the given order,
// each graph's edges by edge id (src type, dst type, edge type), then any
// edge-less nodes by index.
TypeMaps build_type_maps(std::span<const ProvenanceGraph* const> graphs);
TypeMaps build_type_maps(const ProvenanceGraph& graph);

enum class UnknownTypePolicy {
  kFlagAnomalous,  // keep going, mark touched nodes
  kError,          // throw UnknownType
};

// Labels and in/out edge-type histograms for a set of nodes. Row i belongs to
// nodes[i]; columns [0, N_e) count in-edges by mapped type and [N_e, 2 N_e)
// count out-edges.
struct FeatureSet {
  std::size_t width = 0;
  std::vector<NodeIndex> nodes;
  std::vector<int> labels;              // -1 when the node type is unmapped
  std::vector<std::uint32_t> counts;    // row-major, nodes.size() x width
  std::vector<std::uint8_t> unknown;    // node or one of its edges unmapped

  std::size_t size() const { return nodes.size(); }
  std::span<const std::uint32_t> row(std::size_t i) const {
    return {counts.data() + i * width, width};
  }
  std::span<std::uint32_t> row(std::size_t i) {
    return {counts.data() + i * width, width};
  }
  // Position of a node in `nodes`, or nullopt.
  std::optional<std::size_t> position(NodeIndex v) const;
};

// Batch recount over exactly the supplied edges. `nodes` need not be sorted;
// edges whose endpoints are outside `nodes` only count for the inside end.
FeatureSet extract_features(const ProvenanceGraph& graph,
                            std::span<const NodeIndex> nodes,
                            std::span<const EdgeIndex> edges,
                            const TypeMaps& maps,
                            UnknownTypePolicy policy = UnknownTypePolicy::kError);

// Whole graph, every edge.
FeatureSet extract_features(const ProvenanceGraph& graph, const TypeMaps& maps,
                            UnknownTypePolicy policy = UnknownTypePolicy::kError);

// Subgraph-local counts over the subgraph's members and induced edges.
FeatureSet extract_features(const ProvenanceGraph& graph, const Subgraph& subgraph,
                            const TypeMaps& maps,
                            UnknownTypePolicy policy = UnknownTypePolicy::kError);

// Reads the graph's running per-type counters (the incremental path); the
// result covers the whole history of each node.
FeatureSet whole_history_features(const ProvenanceGraph& graph,
                                  std::span<const NodeIndex> nodes,
                                  const TypeMaps& maps,
                                  UnknownTypePolicy policy = UnknownTypePolicy::kError);

// node_id \t label \t c0,c1,...  one node per line.
void write_feature_dump(std::ostream& out, const ProvenanceGraph& graph,
                        const FeatureSet& features);

}  // namespace provsage
