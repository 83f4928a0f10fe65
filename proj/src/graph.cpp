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

#include "provsage/graph.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <unordered_set>

#include "provsage/error.hpp"
#include "provsage/rng.hpp"

namespace provsage {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      cols.push_back(line.substr(start));
      break;
    }
    cols.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cols;
}

}  // namespace

EdgeRecord parse_edge_line(std::string_view line, std::size_t line_no) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto cols = split_tabs(line);
  if (cols.size() != 6) {
    throw FormatError("expected 6 tab-separated columns, got " +
                          std::to_string(cols.size()),
                      line_no);
  }
  for (std::size_t i = 0; i < 5; ++i) {
    if (cols[i].empty()) throw FormatError("empty column", line_no);
  }
  EdgeRecord r;
  r.src_id = cols[0];
  r.src_type = cols[1];
  r.dst_id = cols[2];
  r.dst_type = cols[3];
  r.edge_type = cols[4];
  const auto ts = cols[5];
  const auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(),
                                         r.timestamp);
  if (ec != std::errc() || ptr != ts.data() + ts.size()) {
    throw FormatError("bad timestamp '" + std::string(ts) + "'", line_no);
  }
  return r;
}

std::string format_edge_line(const EdgeRecord& r) {
  std::string out;
  out.reserve(r.src_id.size() + r.dst_id.size() + 48);
  out += r.src_id;
  out += '\t';
  out += r.src_type;
  out += '\t';
  out += r.dst_id;
  out += '\t';
  out += r.dst_type;
  out += '\t';
  out += r.edge_type;
  out += '\t';
  out += std::to_string(r.timestamp);
  return out;
}

NodeIndex ProvenanceGraph::add_node(std::string_view id, std::string_view type) {
  const std::string key(id);
  if (auto it = id_to_index_.find(key); it != id_to_index_.end()) {
    const NodeIndex v = it->second;
    if (node_type_names_[node_types_[v]] != type) {
      throw TypeConflict("node '" + key + "' declared as '" +
                         node_type_names_[node_types_[v]] + "' and '" +
                         std::string(type) + "'");
    }
    return v;
  }
  TypeId tid;
  const std::string tkey(type);
  if (auto it = node_type_lookup_.find(tkey); it != node_type_lookup_.end()) {
    tid = it->second;
  } else {
    tid = static_cast<TypeId>(node_type_names_.size());
    node_type_names_.push_back(tkey);
    node_type_lookup_.emplace(tkey, tid);
  }
  const auto v = static_cast<NodeIndex>(node_ids_.size());
  node_ids_.push_back(key);
  node_types_.push_back(tid);
  id_to_index_.emplace(key, v);
  in_.emplace_back();
  out_.emplace_back();
  in_counts_.emplace_back();
  out_counts_.emplace_back();
  return v;
}

TypeId ProvenanceGraph::intern_edge_type(std::string_view type) {
  const std::string key(type);
  if (auto it = edge_type_lookup_.find(key); it != edge_type_lookup_.end()) {
    return it->second;
  }
  const auto tid = static_cast<TypeId>(edge_type_names_.size());
  edge_type_names_.push_back(key);
  edge_type_lookup_.emplace(key, tid);
  return tid;
}

EdgeIndex ProvenanceGraph::add_edge(const EdgeRecord& r) {
  // Validate both endpoints before mutating so a conflict leaves no trace.
  if (auto s = find(r.src_id); s && node_type(*s) != r.src_type) {
    add_node(r.src_id, r.src_type);
  }
  if (auto d = find(r.dst_id); d && node_type(*d) != r.dst_type) {
    add_node(r.dst_id, r.dst_type);
  }
  if (r.src_id == r.dst_id && r.src_type != r.dst_type) {
    throw TypeConflict("self-loop on '" + r.src_id + "' with two types");
  }
  const NodeIndex src = add_node(r.src_id, r.src_type);
  const NodeIndex dst = add_node(r.dst_id, r.dst_type);
  return add_edge(src, dst, r.edge_type, r.timestamp);
}

EdgeIndex ProvenanceGraph::add_edge(NodeIndex src, NodeIndex dst,
                                    std::string_view edge_type,
                                    std::int64_t timestamp) {
  if (src >= node_count() || dst >= node_count()) {
    throw UnknownNode("#" + std::to_string(std::max(src, dst)));
  }
  const TypeId t = intern_edge_type(edge_type);
  const EdgeIndex e = edges_.size();
  edges_.push_back(Edge{src, dst, t, timestamp});
  out_[src].push_back(e);
  in_[dst].push_back(e);
  auto bump = [t](std::vector<std::uint32_t>& counts) {
    if (counts.size() <= t) counts.resize(t + 1, 0);
    ++counts[t];
  };
  bump(out_counts_[src]);
  bump(in_counts_[dst]);
  return e;
}

std::optional<NodeIndex> ProvenanceGraph::find(std::string_view id) const {
  auto it = id_to_index_.find(std::string(id));
  if (it == id_to_index_.end()) return std::nullopt;
  return it->second;
}

NodeIndex ProvenanceGraph::index_of(std::string_view id) const {
  if (auto v = find(id)) return *v;
  throw UnknownNode(std::string(id));
}

EdgeRecord ProvenanceGraph::record(EdgeIndex e) const {
  const Edge& ed = edges_[e];
  return EdgeRecord{node_ids_[ed.src], node_type(ed.src), node_ids_[ed.dst],
                    node_type(ed.dst), edge_type_names_[ed.type], ed.timestamp};
}

ProvenanceGraph ProvenanceGraph::with_edges(std::span<const EdgeIndex> keep) const {
  ProvenanceGraph g;
  for (NodeIndex v = 0; v < node_count(); ++v) g.add_node(node_ids_[v], node_type(v));
  for (EdgeIndex e : keep) {
    const Edge& ed = edges_[e];
    g.add_edge(ed.src, ed.dst, edge_type_names_[ed.type], ed.timestamp);
  }
  return g;
}

std::vector<NodeIndex> k_hop(const ProvenanceGraph& graph,
                             std::span<const NodeIndex> seeds, int hops,
                             Direction direction) {
  std::unordered_set<NodeIndex> seen;
  std::vector<NodeIndex> frontier;
  for (NodeIndex s : seeds) {
    if (seen.insert(s).second) frontier.push_back(s);
  }
  std::vector<NodeIndex> found;
  std::vector<NodeIndex> next;
  for (int h = 0; h < hops && !frontier.empty(); ++h) {
    next.clear();
    for (NodeIndex v : frontier) {
      auto visit = [&](NodeIndex u) {
        if (seen.insert(u).second) {
          next.push_back(u);
          found.push_back(u);
        }
      };
      if (direction != Direction::kForward) {
        for (EdgeIndex e : graph.in_edges(v)) visit(graph.edge(e).src);
      }
      if (direction != Direction::kBackward) {
        for (EdgeIndex e : graph.out_edges(v)) visit(graph.edge(e).dst);
      }
    }
    frontier.swap(next);
  }
  std::sort(found.begin(), found.end());
  return found;
}

std::vector<NodeIndex> two_hop_ancestors(const ProvenanceGraph& graph,
                                         NodeIndex v) {
  if (v >= graph.node_count()) throw UnknownNode("#" + std::to_string(v));
  const NodeIndex seed[] = {v};
  return k_hop(graph, seed, 2, Direction::kBackward);
}

std::vector<NodeIndex> two_hop_descendants(const ProvenanceGraph& graph,
                                           NodeIndex v) {
  if (v >= graph.node_count()) throw UnknownNode("#" + std::to_string(v));
  const NodeIndex seed[] = {v};
  return k_hop(graph, seed, 2, Direction::kForward);
}

std::vector<NodeIndex> Subgraph::members() const {
  std::vector<NodeIndex> all;
  all.reserve(node_count());
  all.insert(all.end(), active.begin(), active.end());
  all.insert(all.end(), related.begin(), related.end());
  std::sort(all.begin(), all.end());
  return all;
}

Subgraph make_subgraph(const ProvenanceGraph& graph,
                       std::vector<NodeIndex> active, int context_hops) {
  std::sort(active.begin(), active.end());
  active.erase(std::unique(active.begin(), active.end()), active.end());
  Subgraph sg;
  sg.related = k_hop(graph, active, context_hops, Direction::kBackward);
  sg.active = std::move(active);

  std::vector<std::uint8_t> inside(graph.node_count(), 0);
  for (NodeIndex v : sg.active) inside[v] = 1;
  for (NodeIndex v : sg.related) inside[v] = 1;
  auto collect = [&](NodeIndex v) {
    for (EdgeIndex e : graph.out_edges(v)) {
      if (inside[graph.edge(e).dst]) sg.edges.push_back(e);
    }
  };
  for (NodeIndex v : sg.active) collect(v);
  for (NodeIndex v : sg.related) collect(v);
  std::sort(sg.edges.begin(), sg.edges.end());
  return sg;
}

std::vector<Subgraph> build_training_subgraphs(const ProvenanceGraph& graph,
                                               std::size_t split_size,
                                               std::uint64_t seed) {
  if (split_size == 0) throw InvalidArgument("split_size must be >= 1");
  std::vector<NodeIndex> order(graph.node_count());
  std::iota(order.begin(), order.end(), NodeIndex{0});
  if (order.size() > split_size) {
    Rng rng(seed);
    rng.shuffle(order);
  }
  std::vector<Subgraph> out;
  for (std::size_t start = 0; start < order.size(); start += split_size) {
    const std::size_t end = std::min(order.size(), start + split_size);
    out.push_back(make_subgraph(
        graph, std::vector<NodeIndex>(order.begin() + start, order.begin() + end)));
  }
  return out;
}

}  // namespace provsage
