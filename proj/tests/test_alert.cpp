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

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "provsage/alert.hpp"
#include "provsage/error.hpp"
#include "provsage/streaming.hpp"
#include "provsage/synthetic.hpp"

using namespace provsage;

namespace {

FlaggedNode flag(const std::string& id) { return FlaggedNode{id, "process", "file", 1.1}; }

std::vector<FlaggedNode> flags(std::initializer_list<const char*> ids) {
  std::vector<FlaggedNode> out;
  for (const char* id : ids) out.push_back(flag(id));
  return out;
}

AlertState state(std::int64_t t, std::size_t t_hat) {
  return AlertState(AlertConfig{t, t_hat});
}

const std::vector<std::string> kNone;

ProvenanceGraph chain(const std::string& ids) {
  ProvenanceGraph g;
  for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
    g.add_edge({std::string(1, ids[i]), "p", std::string(1, ids[i + 1]), "p", "x",
                static_cast<std::int64_t>(i)});
  }
  return g;
}

std::set<NodeIndex> as_set(const std::vector<NodeIndex>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("three confirmed nodes exceed a tolerance of two") {
  auto s = state(10, 2);
  s.ingest_verdicts(0, flags({"a", "b", "c"}), kNone);
  CHECK_FALSE(s.alert_raised());
  s.ingest_verdicts(11, {}, kNone);
  CHECK(s.confirmed_nodes().size() == 3);
  CHECK(s.alert_raised());
  CHECK(s.alert_time() == 11);
}

TEST_CASE("two confirmed nodes do not exceed a tolerance of two") {
  auto s = state(10, 2);
  s.ingest_verdicts(0, flags({"a", "b"}), kNone);
  s.ingest_verdicts(100, {}, kNone);
  CHECK(s.confirmed_nodes().size() == 2);
  CHECK_FALSE(s.alert_raised());
}

TEST_CASE("reclassified as benign before T leaves the queue for good") {
  auto s = state(10, 0);
  s.ingest_verdicts(0, flags({"a"}), kNone);
  CHECK(s.queued("a"));
  const std::vector<std::string> benign{"a"};
  s.ingest_verdicts(5, {}, benign);
  CHECK_FALSE(s.queued("a"));
  s.ingest_verdicts(1000, {}, kNone);
  CHECK(s.finalize().empty());
  CHECK_FALSE(s.confirmed("a"));
  CHECK_FALSE(s.alert_raised());
}

TEST_CASE("silent until T plus one is confirmed, exactly T is not") {
  auto s = state(10, 5);
  s.ingest_verdicts(0, flags({"a"}), kNone);
  CHECK(s.ingest_verdicts(10, {}, kNone).empty());
  CHECK(s.queued("a"));
  const auto c = s.ingest_verdicts(11, {}, kNone);
  REQUIRE(c.size() == 1);
  CHECK(c[0].node.node_id == "a");
  CHECK(c[0].first_flagged == 0);
  CHECK(c[0].confirmed_at == 11);
  CHECK_FALSE(s.queued("a"));
  CHECK(s.confirmed("a"));
}

TEST_CASE("re-flagging keeps the first time") {
  auto s = state(10, 5);
  s.ingest_verdicts(0, flags({"a"}), kNone);
  s.ingest_verdicts(8, flags({"a"}), kNone);
  CHECK(s.ingest_verdicts(11, flags({"a"}), kNone).size() == 1);
}

TEST_CASE("boundary: T = 0 confirms at the next ingest") {
  auto s = state(0, 0);
  CHECK(s.ingest_verdicts(5, flags({"a", "b"}), kNone).empty());
  CHECK(s.queue_size() == 2);
  const auto c = s.ingest_verdicts(6, {}, kNone);
  CHECK(c.size() == 2);
  CHECK(s.alert_raised());
}

TEST_CASE("boundary: T = forever never confirms") {
  auto s = state(AlertConfig::kForever, 0);
  s.ingest_verdicts(0, flags({"a", "b", "c"}), kNone);
  s.ingest_verdicts(std::numeric_limits<std::int64_t>::max(), flags({"d"}), kNone);
  CHECK(s.finalize().empty());
  CHECK(s.confirmed_nodes().empty());
  CHECK(s.queue_size() == 4);
  CHECK_FALSE(s.alert_raised());
}

TEST_CASE("boundary: T-hat = 0 latches on the first confirmation") {
  auto s = state(1, 0);
  s.ingest_verdicts(0, flags({"a"}), kNone);
  CHECK_FALSE(s.alert_raised());
  s.ingest_verdicts(2, {}, kNone);
  CHECK(s.confirmed_nodes().size() == 1);
  CHECK(s.alert_raised());
  // Later benign verdicts do not undo the latch.
  const std::vector<std::string> benign{"a"};
  s.ingest_verdicts(3, {}, benign);
  CHECK(s.alert_raised());
  CHECK(s.confirmed("a"));
}

TEST_CASE("finalize confirms whatever is still waiting") {
  auto s = state(168, 2);
  s.ingest_verdicts(1, flags({"a", "b", "c"}), kNone);
  const auto c = s.finalize();
  CHECK(c.size() == 3);
  CHECK(c[0].confirmed_at == 1 + 168 + 1);
  CHECK(s.alert_raised());
  CHECK(s.queue_size() == 0);
}

TEST_CASE("whitelisted ids never enter the queue") {
  AlertState s(AlertConfig{0, 0}, {"ok"});
  s.ingest_verdicts(0, flags({"ok", "bad"}), kNone);
  CHECK_FALSE(s.queued("ok"));
  CHECK(s.queued("bad"));
  s.ingest_verdicts(1, flags({"ok"}), kNone);
  CHECK_FALSE(s.confirmed("ok"));
  CHECK(s.confirmed("bad"));
}

TEST_CASE("queue and confirmed stay disjoint and the latch is monotone over random streams") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const std::int64_t t = static_cast<std::int64_t>(rng.below(20));
    const std::size_t t_hat = rng.below(4);
    auto s = state(t, t_hat);
    bool was_raised = false;
    std::int64_t now = 0;
    for (int step = 0; step < 40; ++step) {
      now += static_cast<std::int64_t>(rng.below(6));
      std::vector<FlaggedNode> anom;
      std::vector<std::string> benign;
      for (int id = 0; id < 12; ++id) {
        const auto r = rng.below(4);
        if (r == 0) anom.push_back(flag("n" + std::to_string(id)));
        if (r == 1) benign.push_back("n" + std::to_string(id));
      }
      s.ingest_verdicts(now, anom, benign);
      for (int id = 0; id < 12; ++id) {
        const auto name = "n" + std::to_string(id);
        CHECK_FALSE((s.queued(name) && s.confirmed(name)));
      }
      CHECK(s.alert_raised() == (s.confirmed_nodes().size() > t_hat));
      CHECK((!was_raised || s.alert_raised()));
      was_raised = s.alert_raised();
    }
  }
}

TEST_CASE("alert log line") {
  ConfirmedNode c{FlaggedNode{"proc:7", "process", "file", 1.25}, 3, 200};
  CHECK(format_alert_line(c) == "200\tproc:7\tprocess\tfile\t1.25");
}

TEST_CASE("trace of an isolated node and of a chain") {
  ProvenanceGraph iso;
  iso.add_node("x", "p");
  const auto t0 = trace(iso, "x");
  CHECK(t0.nodes.size() == 1);
  CHECK(t0.edges.empty());

  const auto g = chain("abcdefg");
  const auto c = g.index_of("c");
  const auto t = trace(g, "e", {c});
  std::set<std::string> ids;
  for (auto v : t.nodes) ids.insert(g.node_id(v));
  CHECK(ids == std::set<std::string>{"c", "d", "e", "f", "g"});
  CHECK(t.edges.size() == 4);
  const auto pos = std::lower_bound(t.nodes.begin(), t.nodes.end(), c) - t.nodes.begin();
  CHECK(t.flagged[pos] == 1);
  CHECK(std::count(t.flagged.begin(), t.flagged.end(), 1) == 1);

  const auto mid = trace(g, "c");
  CHECK(mid.nodes.size() == 5);  // a, b, c, d, e
  CHECK_THROWS_AS(trace(g, "zz"), UnknownNode);
  CHECK_THROWS_AS(trace(g, NodeIndex{99}), UnknownNode);
}

TEST_CASE("trace members equal the union of the oracle searches") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = oracle::random_graph(seed, {40, 90});
    for (NodeIndex v = 0; v < g.node_count(); ++v) {
      const auto t = trace(g, v);
      auto expect = oracle::bfs_edge_list(g, v, 2, true);
      const auto back = oracle::bfs_edge_list(g, v, 2, false);
      expect.insert(back.begin(), back.end());
      expect.insert(v);
      CHECK(as_set(t.nodes) == expect);
      std::size_t induced = 0;
      for (const auto& e : g.edges()) induced += expect.count(e.src) && expect.count(e.dst);
      CHECK(t.edges.size() == induced);
    }
  }
}

TEST_CASE("trace renders as DOT and JSON") {
  const auto g = chain("abc");
  const auto t = trace(g, "b", {g.index_of("b")});
  std::ostringstream dot;
  write_trace_dot(dot, g, t);
  CHECK(dot.str().rfind("digraph trace {", 0) == 0);
  CHECK(dot.str().find("n0 -> n1") != std::string::npos);
  CHECK(dot.str().find("color=red") != std::string::npos);
  const auto j = trace_to_json(g, t);
  CHECK(j["center"] == "b");
  CHECK(j["nodes"].size() == 3);
  CHECK(j["edges"].size() == 2);
}

TEST_CASE("node-level scoring rules") {
  // Two separate chains: a1 -> a2 (attack) and b1 -> b2 -> b3 -> b4 -> b5 -> b6.
  ProvenanceGraph g;
  g.add_edge({"a1", "p", "a2", "p", "x", 0});
  for (int i = 1; i < 6; ++i) {
    g.add_edge({"b" + std::to_string(i), "p", "b" + std::to_string(i + 1), "p", "x", i});
  }
  const std::unordered_set<NodeIndex> anom{g.index_of("a1"), g.index_of("a2")};
  auto c = score_node_level(g, anom, anom);
  CHECK(c == ConfusionCounts{2, 6, 0, 0});

  // Flag only a2: a1 is still a TP through its descendant.
  c = score_node_level(g, anom, {g.index_of("a2")});
  CHECK(c.tp == 2);
  CHECK(c.fn == 0);

  // Benign b3 is adjacent to nothing anomalous: an FP.
  c = score_node_level(g, anom, {g.index_of("b3")});
  CHECK(c == ConfusionCounts{0, 5, 1, 2});

  // Benign neighbor of an anomaly flagged: not an FP, and the anomaly is a TP.
  const std::unordered_set<NodeIndex> one{g.index_of("b4")};
  c = score_node_level(g, one, {g.index_of("b3")});
  CHECK(c.fp == 0);
  CHECK(c.tp == 1);
  CHECK(c.tn == 7);
}

TEST_CASE("node-level scoring matches an exhaustive oracle on random flag sets") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = oracle::random_graph(seed, {40, 70});
    Rng rng(seed + 7);
    std::unordered_set<NodeIndex> anom, flagged;
    for (NodeIndex v = 0; v < g.node_count(); ++v) {
      if (rng.below(6) == 0) anom.insert(v);
      if (rng.below(5) == 0) flagged.insert(v);
    }
    ConfusionCounts want;
    for (NodeIndex v = 0; v < g.node_count(); ++v) {
      auto hood = oracle::bfs_edge_list(g, v, 2, true);
      const auto back = oracle::bfs_edge_list(g, v, 2, false);
      hood.insert(back.begin(), back.end());
      bool flagged_near = false, anom_near = false;
      for (auto u : hood) {
        flagged_near = flagged_near || flagged.count(u);
        anom_near = anom_near || anom.count(u);
      }
      if (anom.count(v)) {
        if (flagged.count(v) || flagged_near) want.tp += 1; else want.fn += 1;
      } else if (flagged.count(v) && !anom_near) {
        want.fp += 1;
      } else {
        want.tn += 1;
      }
    }
    const auto got = score_node_level(g, anom, flagged);
    CHECK(got == want);
    CHECK(got.tp + got.fn == anom.size());
    CHECK(got.tn + got.fp == g.node_count() - anom.size());
  }
}

namespace {

const Ensemble& benign_model() {
  static const Ensemble e = [] {
    std::vector<synthetic::TwoRoleGraph> gs;
    std::vector<const ProvenanceGraph*> ptrs;
    for (int i = 0; i < 3; ++i) {
      gs.push_back(synthetic::make_two_role_graph(40 + i, {}, "t" + std::to_string(i) + "_"));
    }
    for (auto& g : gs) ptrs.push_back(&g.graph);
    EnsembleConfig cfg;
    cfg.seed = 1;
    return train_on_graph_sequence(ptrs, cfg);
  }();
  return e;
}

std::vector<EdgeRecord> records(const ProvenanceGraph& g) {
  std::vector<EdgeRecord> out;
  for (EdgeIndex e = 0; e < g.edge_count(); ++e) out.push_back(g.record(e));
  return out;
}

}  // namespace

TEST_CASE("an empty stream finishes with no flushes") {
  const auto& ens = benign_model();
  StreamingDetector det(ens, {});
  det.finish();
  CHECK(det.stats().flushes == 0);
  CHECK_FALSE(det.alerts().alert_raised());
}

TEST_CASE("flush cadence follows SS and the snapshot stays small") {
  const auto& ens = benign_model();
  const auto g = synthetic::make_two_role_graph(90).graph;
  StreamConfig cfg;
  cfg.snapshot_size = 500;
  StreamingDetector det(ens, cfg);
  for (const auto& r : records(g)) det.push(r);
  det.finish();
  const std::size_t e = g.edge_count();
  CHECK(det.stats().flushes == (e + 499) / 500);
  CHECK(det.stats().max_edges_between_flushes <= 500);
  CHECK(det.stats().snapshot_high_water > 0);
  CHECK(det.stats().snapshot_high_water < det.graph().node_count());
}

TEST_CASE("pipelined and inline detection agree") {
  const auto& ens = benign_model();
  auto data = synthetic::make_two_role_graph(91);
  synthetic::inject_anomalies(data.graph, 5);
  auto run = [&](bool pipelined) {
    StreamConfig cfg;
    cfg.snapshot_size = 2000;
    cfg.pipelined = pipelined;
    cfg.alert.wait_time = 1000;
    StreamingDetector det(ens, cfg);
    std::vector<std::string> log;
    det.on_confirm([&](const ProvenanceGraph&, const ConfirmedNode& c) {
      log.push_back(format_alert_line(c));
    });
    for (const auto& r : records(data.graph)) det.push(r);
    det.finish();
    return std::make_pair(log, det.alerts().alert_raised());
  };
  const auto a = run(true);
  const auto b = run(false);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.second);
}

TEST_CASE("benign replay stays quiet, injected anomalies raise the alert") {
  const auto& ens = benign_model();
  auto benign = synthetic::make_two_role_graph(41, {}, "t1_");  // a training graph
  StreamingDetector quiet(ens, {});
  for (const auto& r : records(benign.graph)) quiet.push(r);
  quiet.finish();
  CHECK_FALSE(quiet.alerts().alert_raised());

  auto attacked = synthetic::make_two_role_graph(92);
  const auto inj = synthetic::inject_anomalies(attacked.graph, 6);
  StreamingDetector loud(ens, {});
  std::set<std::string> traced;
  loud.on_confirm([&](const ProvenanceGraph& g, const ConfirmedNode& c) {
    traced.insert(c.node.node_id);
    const auto t = trace(g, c.node.node_id);
    CHECK(!t.nodes.empty());
  });
  for (const auto& r : records(attacked.graph)) loud.push(r);
  loud.finish();
  CHECK(loud.alerts().alert_raised());
  for (auto v : inj.anomalous) CHECK(traced.count(attacked.graph.node_id(v)));
}

TEST_CASE("pure sources are never detection candidates") {
  // With no submodels every candidate is anomalous, so the confirmed set is
  // exactly the set of nodes that were ever active.
  const auto g = oracle::random_graph(3, {30, 60});
  Ensemble empty(build_type_maps(g), 1.5);
  StreamConfig cfg;
  cfg.snapshot_size = 7;
  cfg.alert.wait_time = 0;
  StreamingDetector det(empty, cfg);
  for (const auto& r : records(g)) det.push(r);
  det.finish();
  std::set<std::string> confirmed;
  for (const auto& c : det.alerts().confirmed_nodes()) confirmed.insert(c.node.node_id);
  for (NodeIndex v = 0; v < g.node_count(); ++v) {
    CHECK(confirmed.count(g.node_id(v)) == (g.in_edges(v).empty() ? 0u : 1u));
  }
}

TEST_CASE("active-node trigger counts distinct destinations") {
  const auto& ens = benign_model();
  StreamConfig cfg;
  cfg.trigger = SnapshotTrigger::kActiveNodes;
  cfg.snapshot_size = 2;
  StreamingDetector det(ens, cfg);
  det.push({"a", "process", "f", "file", "read", 0});
  det.push({"b", "process", "f", "file", "read", 1});
  CHECK(det.stats().flushes == 0);
  det.push({"a", "process", "g", "file", "read", 2});
  CHECK(det.stats().flushes == 1);
  det.finish();
}

TEST_CASE("streaming into a store persists the stream; conflicts are rejected") {
  const auto dir = std::filesystem::temp_directory_path() / "provsage_test_stream_store";
  std::filesystem::remove_all(dir);
  {
    const auto& ens = benign_model();
    auto store = GraphStore::open(dir, StoreOptions{false});
    StreamingDetector det(ens, {}, &store);
    det.push({"a", "process", "f", "file", "read", 0});
    CHECK_THROWS_AS(det.push({"a", "file", "g", "file", "read", 1}), TypeConflict);
    det.push({"b", "process", "f", "file", "write", 2});
    det.finish();
    CHECK(det.stats().edges == 2);
  }
  auto again = GraphStore::open(dir);
  CHECK(again.graph().edge_count() == 2);
  std::filesystem::remove_all(dir);
}
