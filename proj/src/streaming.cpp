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

#include "provsage/streaming.hpp"

#include <algorithm>

#include "provsage/error.hpp"

namespace provsage {

StreamingDetector::StreamingDetector(const Ensemble& ensemble, StreamConfig config,
                                     GraphStore* store)
    : ensemble_(ensemble),
      config_(std::move(config)),
      store_(store),
      alerts_(config_.alert, config_.whitelist) {
  if (config_.snapshot_size == 0) throw InvalidArgument("SS must be >= 1");
  if (config_.context_hops < 0) throw InvalidArgument("context hops must be >= 0");
  if (config_.queue_capacity == 0) throw InvalidArgument("queue capacity must be >= 1");
  if (config_.pipelined) worker_ = std::thread([this] { worker_loop(); });
}

StreamingDetector::~StreamingDetector() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

const ProvenanceGraph& StreamingDetector::graph() const {
  return store_ ? store_->graph() : own_graph_;
}

void StreamingDetector::push(const EdgeRecord& record) {
  if (finished_) throw InvalidArgument("detector already finished");
  const EdgeIndex e = store_ ? store_->append_edge(record) : own_graph_.add_edge(record);
  const ProvenanceGraph& g = graph();
  const NodeIndex dst = g.edge(e).dst;
  ++stats_.edges;
  ++pending_edges_;
  clock_ = clock_ ? std::max(*clock_, record.timestamp) : record.timestamp;
  if (pending_mark_.size() < g.node_count()) pending_mark_.resize(g.node_count(), 0);
  if (!pending_mark_[dst]) {
    pending_mark_[dst] = 1;
    pending_dsts_.push_back(dst);
    ++pending_distinct_;
  }
  const std::size_t level = config_.trigger == SnapshotTrigger::kNewEdges ? pending_edges_
                                                                          : pending_distinct_;
  if (level >= config_.snapshot_size) flush();
  drain_results(false);
}

void StreamingDetector::flush() {
  if (pending_edges_ == 0) return;
  const ProvenanceGraph& g = graph();
  std::vector<NodeIndex> active = pending_dsts_;
  const auto desc = k_hop(g, pending_dsts_, config_.context_hops, Direction::kForward);
  active.insert(active.end(), desc.begin(), desc.end());
  const Subgraph sg = make_subgraph(g, std::move(active), config_.context_hops);

  Snapshot snap;
  snap.prepared = prepare_graph(g, sg, ensemble_.maps(), config_.features);
  snap.candidates = sg.active;
  for (NodeIndex v : sg.active) {
    snap.ids.push_back(g.node_id(v));
    snap.types.push_back(g.node_type(v));
  }
  snap.time = *clock_;

  stats_.snapshot_high_water = std::max(stats_.snapshot_high_water, snap.prepared.nodes.size());
  stats_.max_edges_between_flushes = std::max(stats_.max_edges_between_flushes, pending_edges_);
  ++stats_.flushes;
  for (NodeIndex v : pending_dsts_) pending_mark_[v] = 0;
  pending_dsts_.clear();
  pending_edges_ = 0;
  pending_distinct_ = 0;

  if (!config_.pipelined) {
    apply(run_detection(snap));
    return;
  }
  std::unique_lock<std::mutex> lock(mu_);
  cv_.wait(lock, [&] { return inbox_.size() < config_.queue_capacity || worker_error_; });
  if (worker_error_) std::rethrow_exception(worker_error_);
  inbox_.push_back(std::move(snap));
  ++in_flight_;
  lock.unlock();
  cv_.notify_all();
}

StreamingDetector::Verdicts StreamingDetector::run_detection(const Snapshot& snap) const {
  const DetectionResult res = detect_prepared(snap.prepared, snap.candidates, ensemble_);
  Verdicts v;
  v.time = snap.time;
  const auto& classes = ensemble_.maps().node_types();
  auto pos = [&](NodeIndex n) {
    return std::lower_bound(snap.candidates.begin(), snap.candidates.end(), n) -
           snap.candidates.begin();
  };
  for (std::size_t i = 0; i < res.anomalous.size(); ++i) {
    const auto& d = res.diagnostics[i];
    const auto p = pos(res.anomalous[i]);
    FlaggedNode f;
    f.node_id = snap.ids[p];
    f.node_type = snap.types[p];
    f.best_class = d.best_class >= 0 && static_cast<std::size_t>(d.best_class) < classes.size()
                       ? classes[d.best_class]
                       : "-";
    f.ratio = d.best_ratio;
    v.anomalous.push_back(std::move(f));
  }
  for (NodeIndex n : res.benign) v.benign.push_back(snap.ids[pos(n)]);
  return v;
}

void StreamingDetector::apply(const Verdicts& v) {
  stats_.flagged_events += v.anomalous.size();
  const auto confirmed = alerts_.ingest_verdicts(v.time, v.anomalous, v.benign);
  if (callback_) {
    for (const auto& c : confirmed) callback_(graph(), c);
  }
}

void StreamingDetector::worker_loop() {
  while (true) {
    Snapshot snap;
    {
      std::unique_lock<std::mutex> lock(mu_);
      cv_.wait(lock, [&] { return stop_ || !inbox_.empty(); });
      if (inbox_.empty()) return;
      snap = std::move(inbox_.front());
      inbox_.pop_front();
    }
    cv_.notify_all();
    try {
      Verdicts v = run_detection(snap);
      std::lock_guard<std::mutex> lock(mu_);
      outbox_.push_back(std::move(v));
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu_);
      worker_error_ = std::current_exception();
    }
    cv_.notify_all();
  }
}

void StreamingDetector::drain_results(bool wait_all) {
  if (!config_.pipelined) return;
  while (true) {
    std::deque<Verdicts> ready;
    {
      std::unique_lock<std::mutex> lock(mu_);
      if (wait_all) {
        cv_.wait(lock, [&] { return !outbox_.empty() || in_flight_ == 0 || worker_error_; });
      }
      if (worker_error_) std::rethrow_exception(worker_error_);
      ready.swap(outbox_);
      in_flight_ -= ready.size();
    }
    for (const auto& v : ready) apply(v);
    if (!wait_all) return;
    std::lock_guard<std::mutex> lock(mu_);
    if (in_flight_ == 0 && outbox_.empty()) return;
  }
}

void StreamingDetector::finish() {
  if (finished_) return;
  flush();
  drain_results(true);
  const auto confirmed = alerts_.finalize();
  if (callback_) {
    for (const auto& c : confirmed) callback_(graph(), c);
  }
  if (store_) store_->flush();
  finished_ = true;
}

}  // namespace provsage
