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
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "provsage/graph.hpp"
#include "provsage/metrics.hpp"

namespace provsage {

struct AlertConfig {
  static constexpr std::int64_t kForever = std::numeric_limits<std::int64_t>::max();

  // Waiting time T in stream timestamp units; kForever never confirms.
  std::int64_t wait_time = 168;  // must stay below kForever - 1 when finite
  // Tolerance T-hat: the alert latches once more than this many nodes are
  // confirmed.
  std::size_t tolerance = 2;
};

// What detection said about a flagged node; carried into the alert log.
struct FlaggedNode {
  std::string node_id;
  std::string node_type;
  std::string best_class;
  double ratio = 0.0;
};

struct ConfirmedNode {
  FlaggedNode node;
  std::int64_t first_flagged = 0;
  std::int64_t confirmed_at = 0;
};

class AlertState {
 public:
  explicit AlertState(AlertConfig config = {},
                      std::vector<std::string> whitelist = {});

  // One detection snapshot. `anomalous` and `benign` must be disjoint.
  // Returns the nodes confirmed by this call, in node-id order.
  std::vector<ConfirmedNode> ingest_verdicts(std::int64_t snapshot_time,
                                             std::span<const FlaggedNode> anomalous,
                                             std::span<const std::string> benign);

  // End of stream: with a finite T every queued node has waited long
  // enough and is confirmed.
  std::vector<ConfirmedNode> finalize();

  const AlertConfig& config() const { return config_; }
  bool alert_raised() const { return alert_raised_; }
  bool queued(const std::string& node_id) const { return queue_.count(node_id) > 0; }
  bool confirmed(const std::string& node_id) const {
    return confirmed_ids_.count(node_id) > 0;
  }
  std::size_t queue_size() const { return queue_.size(); }
  const std::vector<ConfirmedNode>& confirmed_nodes() const { return confirmed_; }
  // First time the latch closed, if it has.
  std::int64_t alert_time() const { return alert_time_; }

 private:
  struct Entry {
    FlaggedNode node;
    std::int64_t first;
  };
  std::vector<ConfirmedNode> confirm_if(std::int64_t now, bool end_of_stream);

  AlertConfig config_;
  std::unordered_set<std::string> whitelist_;
  std::map<std::string, Entry> queue_;
  std::vector<ConfirmedNode> confirmed_;
  std::set<std::string> confirmed_ids_;
  bool alert_raised_ = false;
  std::int64_t alert_time_ = 0;
};

// timestamp \t node_id \t node_type \t best_class \t ratio
std::string format_alert_line(const ConfirmedNode& node);

struct TracedSubgraph {
  NodeIndex center;
  std::vector<NodeIndex> nodes;       // sorted
  std::vector<std::uint8_t> flagged;  // aligned with nodes
  std::vector<EdgeIndex> edges;       // induced, in edge-id order
};

// {v} plus its two-hop ancestors and descendants, with every induced edge.
// Throws UnknownNode.
TracedSubgraph trace(const ProvenanceGraph& graph, NodeIndex v,
                     const std::unordered_set<NodeIndex>& flagged = {});
TracedSubgraph trace(const ProvenanceGraph& graph, const std::string& node_id,
                     const std::unordered_set<NodeIndex>& flagged = {});

void write_trace_dot(std::ostream& out, const ProvenanceGraph& graph,
                     const TracedSubgraph& traced);
nlohmann::json trace_to_json(const ProvenanceGraph& graph, const TracedSubgraph& traced);

// Node-level counts: an anomalous node is a TP when it or a node within its
// two-hop ancestors and descendants is flagged; a flagged benign node is an FP
// only when no anomalous node lies within that neighborhood.
ConfusionCounts score_node_level(const ProvenanceGraph& graph,
                                 const std::unordered_set<NodeIndex>& anomalous,
                                 const std::unordered_set<NodeIndex>& flagged);

}  // namespace provsage
