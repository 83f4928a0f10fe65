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

#include "provsage/features.hpp"

#include <algorithm>
#include <numeric>

#include "provsage/error.hpp"

namespace provsage {

TypeMaps::TypeMaps(std::vector<std::string> node_types,
                   std::vector<std::string> edge_types) {
  for (const auto& t : node_types) observe_node_type(t);
  for (const auto& t : edge_types) observe_edge_type(t);
  if (node_types_.size() != node_types.size() ||
      edge_types_.size() != edge_types.size()) {
    throw InvalidArgument("type maps must not contain duplicates");
  }
}

void TypeMaps::observe_node_type(std::string_view name) {
  std::string key(name);
  if (node_lookup_.count(key)) return;
  node_lookup_.emplace(key, static_cast<int>(node_types_.size()));
  node_types_.push_back(std::move(key));
}

void TypeMaps::observe_edge_type(std::string_view name) {
  std::string key(name);
  if (edge_lookup_.count(key)) return;
  edge_lookup_.emplace(key, static_cast<int>(edge_types_.size()));
  edge_types_.push_back(std::move(key));
}

std::optional<int> TypeMaps::node_type(std::string_view name) const {
  auto it = node_lookup_.find(std::string(name));
  if (it == node_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> TypeMaps::edge_type(std::string_view name) const {
  auto it = edge_lookup_.find(std::string(name));
  if (it == edge_lookup_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t TypeMaps::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;  // separator outside the byte range of names
    h *= 0x100000001b3ULL;
  };
  mix("node");
  for (const auto& t : node_types_) mix(t);
  mix("edge");
  for (const auto& t : edge_types_) mix(t);
  return h;
}

TypeMaps build_type_maps(std::span<const ProvenanceGraph* const> graphs) {
  TypeMaps maps;
  for (const ProvenanceGraph* g : graphs) {
    for (EdgeIndex e = 0; e < g->edge_count(); ++e) {
      const Edge& ed = g->edge(e);
      maps.observe_node_type(g->node_type(ed.src));
      maps.observe_node_type(g->node_type(ed.dst));
      maps.observe_edge_type(g->edge_type(e));
    }
    for (NodeIndex v = 0; v < g->node_count(); ++v) {
      maps.observe_node_type(g->node_type(v));
    }
  }
  return maps;
}

TypeMaps build_type_maps(const ProvenanceGraph& graph) {
  const ProvenanceGraph* one[] = {&graph};
  return build_type_maps(one);
}

std::optional<std::size_t> FeatureSet::position(NodeIndex v) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), v);
  if (it != nodes.end() && *it == v) return static_cast<std::size_t>(it - nodes.begin());
  return std::nullopt;
}

namespace {

FeatureSet init_feature_set(const ProvenanceGraph& graph,
                            std::span<const NodeIndex> nodes,
                            const TypeMaps& maps, UnknownTypePolicy policy) {
  FeatureSet fs;
  fs.width = maps.feature_width();
  fs.nodes.assign(nodes.begin(), nodes.end());
  std::sort(fs.nodes.begin(), fs.nodes.end());
  fs.nodes.erase(std::unique(fs.nodes.begin(), fs.nodes.end()), fs.nodes.end());
  fs.labels.resize(fs.nodes.size());
  fs.unknown.assign(fs.nodes.size(), 0);
  fs.counts.assign(fs.nodes.size() * fs.width, 0);
  for (std::size_t i = 0; i < fs.nodes.size(); ++i) {
    const auto label = maps.node_type(graph.node_type(fs.nodes[i]));
    if (!label) {
      if (policy == UnknownTypePolicy::kError) {
        throw UnknownType("unknown node type '" + graph.node_type(fs.nodes[i]) +
                          "' on node '" + graph.node_id(fs.nodes[i]) + "'");
      }
      fs.unknown[i] = 1;
    }
    fs.labels[i] = label.value_or(-1);
  }
  return fs;
}

// Graph-local edge type id -> mapped id (or -1).
std::vector<int> edge_type_translation(const ProvenanceGraph& graph,
                                       const TypeMaps& maps) {
  std::vector<int> tr(graph.edge_type_names().size());
  for (std::size_t t = 0; t < tr.size(); ++t) {
    tr[t] = maps.edge_type(graph.edge_type_names()[t]).value_or(-1);
  }
  return tr;
}

}  // namespace

FeatureSet extract_features(const ProvenanceGraph& graph,
                            std::span<const NodeIndex> nodes,
                            std::span<const EdgeIndex> edges,
                            const TypeMaps& maps, UnknownTypePolicy policy) {
  FeatureSet fs = init_feature_set(graph, nodes, maps, policy);
  const auto tr = edge_type_translation(graph, maps);
  const std::size_t ne = maps.n_edge_types();
  // Dense position lookup; graph-sized but filled only for members.
  std::vector<std::int64_t> pos(graph.node_count(), -1);
  for (std::size_t i = 0; i < fs.nodes.size(); ++i) pos[fs.nodes[i]] = static_cast<std::int64_t>(i);
  for (EdgeIndex e : edges) {
    const Edge& ed = graph.edge(e);
    const int t = tr[ed.type];
    const auto ps = pos[ed.src];
    const auto pd = pos[ed.dst];
    if (t < 0) {
      if (policy == UnknownTypePolicy::kError) {
        throw UnknownType("unknown edge type '" + graph.edge_type(e) + "'");
      }
      if (ps >= 0) fs.unknown[ps] = 1;
      if (pd >= 0) fs.unknown[pd] = 1;
      continue;
    }
    if (pd >= 0) ++fs.counts[pd * fs.width + t];
    if (ps >= 0) ++fs.counts[ps * fs.width + ne + t];
  }
  return fs;
}

FeatureSet extract_features(const ProvenanceGraph& graph, const TypeMaps& maps,
                            UnknownTypePolicy policy) {
  std::vector<NodeIndex> nodes(graph.node_count());
  std::iota(nodes.begin(), nodes.end(), NodeIndex{0});
  std::vector<EdgeIndex> edges(graph.edge_count());
  std::iota(edges.begin(), edges.end(), EdgeIndex{0});
  return extract_features(graph, nodes, edges, maps, policy);
}

FeatureSet extract_features(const ProvenanceGraph& graph, const Subgraph& subgraph,
                            const TypeMaps& maps, UnknownTypePolicy policy) {
  const auto members = subgraph.members();
  return extract_features(graph, members, subgraph.edges, maps, policy);
}

FeatureSet whole_history_features(const ProvenanceGraph& graph,
                                  std::span<const NodeIndex> nodes,
                                  const TypeMaps& maps, UnknownTypePolicy policy) {
  FeatureSet fs = init_feature_set(graph, nodes, maps, policy);
  const auto tr = edge_type_translation(graph, maps);
  const std::size_t ne = maps.n_edge_types();
  for (std::size_t i = 0; i < fs.nodes.size(); ++i) {
    auto row = fs.row(i);
    auto apply = [&](std::span<const std::uint32_t> counts, std::size_t offset) {
      for (std::size_t t = 0; t < counts.size(); ++t) {
        if (counts[t] == 0) continue;
        if (tr[t] < 0) {
          if (policy == UnknownTypePolicy::kError) {
            throw UnknownType("unknown edge type '" + graph.edge_type_names()[t] + "'");
          }
          fs.unknown[i] = 1;
          continue;
        }
        row[offset + tr[t]] += counts[t];
      }
    };
    apply(graph.in_type_counts(fs.nodes[i]), 0);
    apply(graph.out_type_counts(fs.nodes[i]), ne);
  }
  return fs;
}

void write_feature_dump(std::ostream& out, const ProvenanceGraph& graph,
                        const FeatureSet& features) {
  for (std::size_t i = 0; i < features.size(); ++i) {
    out << graph.node_id(features.nodes[i]) << '\t' << features.labels[i] << '\t';
    const auto row = features.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out << ',';
      out << row[j];
    }
    out << '\n';
  }
}

}  // namespace provsage
