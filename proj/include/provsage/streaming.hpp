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

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "provsage/alert.hpp"
#include "provsage/ensemble.hpp"
#include "provsage/graph.hpp"
#include "provsage/store.hpp"

namespace provsage {

enum class SnapshotTrigger {
  kNewEdges,     // flush after SS newly arrived edges
  kActiveNodes,  // flush once SS distinct edge destinations are pending
};

struct StreamConfig {
  std::size_t snapshot_size = 200000;  // SS
  SnapshotTrigger trigger = SnapshotTrigger::kNewEdges;
  int context_hops = 2;
  FeatureOptions features;
  AlertConfig alert;
  std::vector<std::string> whitelist;
  // Run detection on a second thread, fed through a bounded queue.
  bool pipelined = true;
  std::size_t queue_capacity = 2;
};

struct StreamStats {
  std::size_t edges = 0;
  std::size_t flushes = 0;
  std::size_t flagged_events = 0;  // anomalous verdicts summed over flushes
  // Largest snapshot (active plus related nodes) ever held for detection.
  std::size_t snapshot_high_water = 0;
  std::size_t max_edges_between_flushes = 0;
};

// Called on the ingesting thread, so the graph may be read safely.
using ConfirmCallback = std::function<void(const ProvenanceGraph&, const ConfirmedNode&)>;

// Ingests edges into a store (or an in-memory graph), cuts a detection
// snapshot every SS edges and feeds the verdicts to an AlertState.
//
// A snapshot's active set is the destinations of the edges since the last
// flush plus their two-hop descendants; its related nodes are the active
// set's two-hop ancestors.
class StreamingDetector {
 public:
  StreamingDetector(const Ensemble& ensemble, StreamConfig config, GraphStore* store = nullptr);
  ~StreamingDetector();
  StreamingDetector(const StreamingDetector&) = delete;
  StreamingDetector& operator=(const StreamingDetector&) = delete;

  void on_confirm(ConfirmCallback callback) { callback_ = std::move(callback); }

  // Throws TypeConflict; the edge is then not ingested.
  void push(const EdgeRecord& record);
  // Flushes the pending edges, drains the pipeline and finalizes alerts.
  void finish();

  const ProvenanceGraph& graph() const;
  const AlertState& alerts() const { return alerts_; }
  const StreamStats& stats() const { return stats_; }
  bool finished() const { return finished_; }

 private:
  struct Snapshot {
    PreparedGraph prepared;
    std::vector<NodeIndex> candidates;
    std::vector<std::string> ids;    // aligned with candidates
    std::vector<std::string> types;  // aligned with candidates
    std::int64_t time = 0;
  };
  struct Verdicts {
    std::int64_t time = 0;
    std::vector<FlaggedNode> anomalous;
    std::vector<std::string> benign;
  };

  void flush();
  Verdicts run_detection(const Snapshot& snap) const;
  void apply(const Verdicts& v);
  void worker_loop();
  void drain_results(bool wait_all);

  const Ensemble& ensemble_;
  StreamConfig config_;
  GraphStore* store_;
  ProvenanceGraph own_graph_;
  AlertState alerts_;
  StreamStats stats_;
  ConfirmCallback callback_;
  bool finished_ = false;

  std::vector<NodeIndex> pending_dsts_;
  std::vector<std::uint8_t> pending_mark_;
  std::size_t pending_edges_ = 0;
  std::size_t pending_distinct_ = 0;
  std::optional<std::int64_t> clock_;

  // Pipeline state; guarded by mu_.
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Snapshot> inbox_;
  std::deque<Verdicts> outbox_;
  std::size_t in_flight_ = 0;
  bool stop_ = false;
  std::exception_ptr worker_error_;
  std::thread worker_;
};

}  // namespace provsage
