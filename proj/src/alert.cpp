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

#include "provsage/alert.hpp"

#include <algorithm>
#include <cstdio>

#include "provsage/error.hpp"

namespace provsage {

AlertState::AlertState(AlertConfig config, std::vector<std::string> whitelist)
    : config_(config), whitelist_(whitelist.begin(), whitelist.end()) {
  if (config_.wait_time < 0) throw InvalidArgument("waiting time must be >= 0");
}

std::vector<ConfirmedNode> AlertState::ingest_verdicts(std::int64_t snapshot_time,
                                                       std::span<const FlaggedNode> anomalous,
                                                       std::span<const std::string> benign) {
  for (const auto& f : anomalous) {
    if (whitelist_.count(f.node_id) || confirmed_ids_.count(f.node_id)) continue;
    auto [it, fresh] = queue_.try_emplace(f.node_id, Entry{f, snapshot_time});
    if (!fresh) it->second.node = f;  // keep the first time, refresh diagnostics
  }
  for (const auto& id : benign) queue_.erase(id);
  return confirm_if(snapshot_time, false);
}

std::vector<ConfirmedNode> AlertState::finalize() {
  if (config_.wait_time == AlertConfig::kForever) return {};
  return confirm_if(0, true);
}

std::vector<ConfirmedNode> AlertState::confirm_if(std::int64_t now, bool end_of_stream) {
  std::vector<ConfirmedNode> out;
  if (config_.wait_time == AlertConfig::kForever) return out;
  for (auto it = queue_.begin(); it != queue_.end();) {
    const std::int64_t first = it->second.first;
    // now - first > T, written to avoid overflow.
    const bool due = end_of_stream || (now > first && now - first > config_.wait_time);
    if (!due) {
      ++it;
      continue;
    }
    // At end of stream the stamp is the earliest time the wait runs out.
    ConfirmedNode c{it->second.node, first, end_of_stream ? first + config_.wait_time + 1 : now};
    confirmed_ids_.insert(it->first);
    confirmed_.push_back(c);
    out.push_back(std::move(c));
    it = queue_.erase(it);
    if (!alert_raised_ && confirmed_.size() > config_.tolerance) {
      alert_raised_ = true;
      alert_time_ = confirmed_.back().confirmed_at;
    }
  }
  return out;
}

std::string format_alert_line(const ConfirmedNode& c) {
  char ratio[32];
  std::snprintf(ratio, sizeof ratio, "%.6g", c.node.ratio);
  return std::to_string(c.confirmed_at) + '\t' + c.node.node_id + '\t' + c.node.node_type +
         '\t' + c.node.best_class + '\t' + ratio;
}

TracedSubgraph trace(const ProvenanceGraph& graph, NodeIndex v,
                     const std::unordered_set<NodeIndex>& flagged) {
  if (v >= graph.node_count()) throw UnknownNode("#" + std::to_string(v));
  TracedSubgraph t;
  t.center = v;
  const auto anc = two_hop_ancestors(graph, v);
  const auto des = two_hop_descendants(graph, v);
  t.nodes = anc;
  t.nodes.insert(t.nodes.end(), des.begin(), des.end());
  t.nodes.push_back(v);
  std::sort(t.nodes.begin(), t.nodes.end());
  t.nodes.erase(std::unique(t.nodes.begin(), t.nodes.end()), t.nodes.end());
  for (NodeIndex u : t.nodes) t.flagged.push_back(flagged.count(u) ? 1 : 0);
  auto inside = [&](NodeIndex u) { return std::binary_search(t.nodes.begin(), t.nodes.end(), u); };
  for (NodeIndex u : t.nodes) {
    for (EdgeIndex e : graph.out_edges(u)) {
      if (inside(graph.edge(e).dst)) t.edges.push_back(e);
    }
  }
  std::sort(t.edges.begin(), t.edges.end());
  return t;
}

TracedSubgraph trace(const ProvenanceGraph& graph, const std::string& node_id,
                     const std::unordered_set<NodeIndex>& flagged) {
  return trace(graph, graph.index_of(node_id), flagged);
}

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

void write_trace_dot(std::ostream& out, const ProvenanceGraph& graph, const TracedSubgraph& t) {
  out << "digraph trace {\n";
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    const NodeIndex v = t.nodes[i];
    out << "  n" << v << " [label=\"" << dot_escape(graph.node_id(v)) << "\\n"
        << dot_escape(graph.node_type(v)) << "\"";
    if (v == t.center) {
      out << ", shape=doublecircle";
    }
    if (t.flagged[i]) out << ", color=red";
    out << "];\n";
  }
  for (EdgeIndex e : t.edges) {
    const Edge& ed = graph.edge(e);
    out << "  n" << ed.src << " -> n" << ed.dst << " [label=\""
        << dot_escape(graph.edge_type(e)) << "@" << ed.timestamp << "\"];\n";
  }
  out << "}\n";
}

nlohmann::json trace_to_json(const ProvenanceGraph& graph, const TracedSubgraph& t) {
  nlohmann::json j;
  j["center"] = graph.node_id(t.center);
  auto& nodes = j["nodes"] = nlohmann::json::array();
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    nodes.push_back({{"id", graph.node_id(t.nodes[i])},
                     {"type", graph.node_type(t.nodes[i])},
                     {"flagged", t.flagged[i] != 0}});
  }
  auto& edges = j["edges"] = nlohmann::json::array();
  for (EdgeIndex e : t.edges) {
    const Edge& ed = graph.edge(e);
    edges.push_back({{"src", graph.node_id(ed.src)},
                     {"dst", graph.node_id(ed.dst)},
                     {"type", graph.edge_type(e)},
                     {"timestamp", ed.timestamp}});
  }
  return j;
}

ConfusionCounts score_node_level(const ProvenanceGraph& graph,
                                 const std::unordered_set<NodeIndex>& anomalous,
                                 const std::unordered_set<NodeIndex>& flagged) {
  ConfusionCounts c;
  for (NodeIndex v = 0; v < graph.node_count(); ++v) {
    const bool is_anom = anomalous.count(v) > 0;
    const bool is_flagged = flagged.count(v) > 0;
    if (is_anom && is_flagged) {
      ++c.tp;
      continue;
    }
    if (!is_anom && !is_flagged) {
      ++c.tn;
      continue;
    }
    auto anc = two_hop_ancestors(graph, v);
    const auto des = two_hop_descendants(graph, v);
    anc.insert(anc.end(), des.begin(), des.end());
    if (is_anom) {
      const bool near = std::any_of(anc.begin(), anc.end(),
                                    [&](NodeIndex u) { return flagged.count(u) > 0; });
      ++(near ? c.tp : c.fn);
    } else {
      const bool near = std::any_of(anc.begin(), anc.end(),
                                    [&](NodeIndex u) { return anomalous.count(u) > 0; });
      // A flagged benign node next to an attack is not held against us.
      ++(near ? c.tn : c.fp);
    }
  }
  return c;
}

}  // namespace provsage
