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
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace provsage {

using NodeIndex = std::uint32_t;
using EdgeIndex = std::uint64_t;
using TypeId = std::uint32_t;

// One line of the canonical edge stream:
//   src_id \t src_type \t dst_id \t dst_type \t edge_type \t timestamp
struct EdgeRecord {
  std::string src_id;
  std::string src_type;
  std::string dst_id;
  std::string dst_type;
  std::string edge_type;
  std::int64_t timestamp = 0;

  bool operator==(const EdgeRecord&) const = default;
};

// Parses one canonical line. Throws FormatError carrying `line_no`.
EdgeRecord parse_edge_line(std::string_view line, std::size_t line_no = 0);
std::string format_edge_line(const EdgeRecord& record);

struct Edge {
  NodeIndex src;
  NodeIndex dst;
  TypeId type;  // graph-local interned edge type
  std::int64_t timestamp;
};

// Typed, timestamped, directed multigraph. Node ids are opaque strings mapped
// to dense indices in first-appearance order; node and edge type strings are
// interned per graph. Edges are append-only and their index is the edge id.
//
// The graph also keeps per-node in/out counts by interned edge type, bumped on
// every append; this is the incremental feature path.
class ProvenanceGraph {
 public:
  // Declares a node or returns the existing index. A second declaration with
  // a different type throws TypeConflict.
  NodeIndex add_node(std::string_view id, std::string_view type);

  EdgeIndex add_edge(const EdgeRecord& record);
  EdgeIndex add_edge(NodeIndex src, NodeIndex dst, std::string_view edge_type,
                     std::int64_t timestamp);

  std::size_t node_count() const { return node_ids_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  bool empty() const { return node_ids_.empty(); }

  const Edge& edge(EdgeIndex e) const { return edges_[e]; }
  const std::vector<Edge>& edges() const { return edges_; }

  const std::string& node_id(NodeIndex v) const { return node_ids_[v]; }
  TypeId node_type_id(NodeIndex v) const { return node_types_[v]; }
  const std::string& node_type(NodeIndex v) const {
    return node_type_names_[node_types_[v]];
  }
  const std::string& edge_type(EdgeIndex e) const {
    return edge_type_names_[edges_[e].type];
  }
  const std::vector<std::string>& node_type_names() const {
    return node_type_names_;
  }
  const std::vector<std::string>& edge_type_names() const {
    return edge_type_names_;
  }

  std::optional<NodeIndex> find(std::string_view id) const;
  // Throws UnknownNode.
  NodeIndex index_of(std::string_view id) const;

  std::span<const EdgeIndex> in_edges(NodeIndex v) const { return in_[v]; }
  std::span<const EdgeIndex> out_edges(NodeIndex v) const { return out_[v]; }

  // Running counts indexed by interned edge type; may be shorter than
  // edge_type_names() when the node never saw the later types.
  std::span<const std::uint32_t> in_type_counts(NodeIndex v) const {
    return in_counts_[v];
  }
  std::span<const std::uint32_t> out_type_counts(NodeIndex v) const {
    return out_counts_[v];
  }

  EdgeRecord record(EdgeIndex e) const;

  // Copy with the given edges only, in the given order. Nodes are preserved
  // (same dense indices); timestamps are kept.
  ProvenanceGraph with_edges(std::span<const EdgeIndex> keep) const;

 private:
  TypeId intern_edge_type(std::string_view type);

  std::vector<std::string> node_ids_;
  std::vector<TypeId> node_types_;
  std::unordered_map<std::string, NodeIndex> id_to_index_;
  std::vector<std::string> node_type_names_;
  std::unordered_map<std::string, TypeId> node_type_lookup_;
  std::vector<std::string> edge_type_names_;
  std::unordered_map<std::string, TypeId> edge_type_lookup_;
  std::vector<Edge> edges_;
  std::vector<std::vector<EdgeIndex>> in_;
  std::vector<std::vector<EdgeIndex>> out_;
  std::vector<std::vector<std::uint32_t>> in_counts_;
  std::vector<std::vector<std::uint32_t>> out_counts_;
};

enum class Direction { kBackward, kForward, kBoth };

// Nodes reachable from (kForward) or reaching (kBackward) any seed within
// `hops` directed steps, excluding the seeds themselves. Sorted ascending.
std::vector<NodeIndex> k_hop(const ProvenanceGraph& graph,
                             std::span<const NodeIndex> seeds, int hops,
                             Direction direction);

// All u with a directed path u -> ... -> v of length <= 2; excludes v.
std::vector<NodeIndex> two_hop_ancestors(const ProvenanceGraph& graph,
                                         NodeIndex v);
std::vector<NodeIndex> two_hop_descendants(const ProvenanceGraph& graph,
                                           NodeIndex v);

// In-memory working set: nodes to train on or detect (active), their context
// (related, which reach an active node within two directed hops) and the
// edges induced among them.
struct Subgraph {
  std::vector<NodeIndex> active;
  std::vector<NodeIndex> related;
  std::vector<EdgeIndex> edges;

  std::size_t node_count() const { return active.size() + related.size(); }
  std::vector<NodeIndex> members() const;
};

// Builds the subgraph for an active set: related = `context_hops` in-ancestors
// not already active; edges = every graph edge with both endpoints inside.
Subgraph make_subgraph(const ProvenanceGraph& graph,
                       std::vector<NodeIndex> active, int context_hops = 2);

// Randomly partitions V into disjoint active sets of at most `split_size`
// nodes (the last one may be smaller) and wraps each into a Subgraph.
std::vector<Subgraph> build_training_subgraphs(const ProvenanceGraph& graph,
                                               std::size_t split_size,
                                               std::uint64_t seed);

}  // namespace provsage
