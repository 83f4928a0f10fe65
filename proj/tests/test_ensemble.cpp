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
#include <set>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "provsage/ensemble.hpp"
#include "provsage/error.hpp"
#include "provsage/synthetic.hpp"

using namespace provsage;

namespace {

std::vector<NodeIndex> all_nodes(const ProvenanceGraph& g) {
  std::vector<NodeIndex> v(g.node_count());
  for (NodeIndex i = 0; i < v.size(); ++i) v[i] = i;
  return v;
}

DetectionResult detect_all(const ProvenanceGraph& g, const Ensemble& ens) {
  const auto nodes = all_nodes(g);
  return detect(g, make_subgraph(g, nodes), nodes, ens);
}

struct Trained {
  synthetic::TwoRoleGraph data;
  Ensemble ensemble;
  TrainingReport report;
};

const Trained& two_role() {
  static const Trained t = [] {
    Trained out;
    out.data = synthetic::make_two_role_graph(5);
    EnsembleConfig cfg;
    cfg.seed = 5;
    const ProvenanceGraph* gs[] = {&out.data.graph};
    out.ensemble = train_on_graph_sequence(gs, cfg, &out.report);
    return out;
  }();
  return t;
}

std::string bytes(const Ensemble& e) {
  std::ostringstream out;
  e.write(out);
  return out.str();
}

}  // namespace

TEST_CASE("two-role graph needs at least two submodels and is fully covered") {
  const auto& t = two_role();
  CHECK(t.ensemble.count() >= 2);
  CHECK(t.report.submodel_count == t.ensemble.count());
  std::set<NodeIndex> unlearnable;
  for (const auto& s : t.report.subgraphs) {
    for (const auto& u : s.unlearnable) {
      unlearnable.insert(u.node);
      CHECK(u.cause == "feature-collision");
    }
    // |X| strictly shrinks with every kept submodel.
    for (std::size_t i = 1; i < s.remaining_after_submodel.size(); ++i) {
      CHECK(s.remaining_after_submodel[i] < s.remaining_after_submodel[i - 1]);
    }
  }
  const auto res = detect_all(t.data.graph, t.ensemble);
  for (auto v : res.anomalous) CHECK(unlearnable.count(v));
}

TEST_CASE("a second pass over covered data is a pre-filter no-op") {
  const auto& t = two_role();
  EnsembleConfig cfg;
  cfg.seed = 99;
  TrainingReport report;
  const auto g = &t.data.graph;
  const auto nodes = all_nodes(*g);
  const auto again = train_ensemble(*g, make_subgraph(*g, nodes), t.ensemble, cfg, &report);
  CHECK(again.count() == t.ensemble.count());
  REQUIRE(report.subgraphs.size() == 1);
  CHECK(report.subgraphs[0].submodels_added == 0);
  CHECK(bytes(again) == bytes(t.ensemble));
}

TEST_CASE("graph with a single node type needs one submodel") {
  ProvenanceGraph g;
  Rng rng(1);
  for (int i = 0; i < 60; ++i) {
    g.add_edge({"p" + std::to_string(rng.below(20)), "process", "p" + std::to_string(rng.below(20)),
                "process", i % 2 ? "fork" : "signal", i});
  }
  TrainingReport report;
  const ProvenanceGraph* gs[] = {&g};
  const auto ens = train_on_graph_sequence(gs, {}, &report);
  CHECK(ens.count() == 1);
  CHECK(detect_all(g, ens).anomalous.empty());
}

TEST_CASE("training the same graph twice skips the duplicate; an empty graph is skipped") {
  const auto g = synthetic::make_two_role_graph(11, {4, 40, 40, 50, 6, 20, 3, 2}).graph;
  ProvenanceGraph empty;
  EnsembleConfig cfg;
  cfg.seed = 2;
  const ProvenanceGraph* once[] = {&g};
  const ProvenanceGraph* twice[] = {&g, &g, &empty};
  TrainingReport r1, r2;
  const auto a = train_on_graph_sequence(once, cfg, &r1);
  const auto b = train_on_graph_sequence(twice, cfg, &r2);
  CHECK(a.count() == b.count());
  CHECK(r2.graphs_trained == std::vector<std::size_t>{0});
  CHECK(r2.graphs_skipped == std::vector<std::size_t>{1, 2});
}

TEST_CASE("the motivating anomalous process is detected") {
  const auto& t = two_role();
  auto test = synthetic::make_two_role_graph(1005);
  synthetic::AnomalySpec spec;
  spec.count = 3;
  const auto inj = synthetic::inject_anomalies(test.graph, 8, spec);
  const auto res = detect_all(test.graph, t.ensemble);
  for (auto v : inj.anomalous) {
    CHECK(std::binary_search(res.anomalous.begin(), res.anomalous.end(), v));
    const auto* d = res.diagnostics_for(v);
    REQUIRE(d != nullptr);
    CHECK(d->per_submodel.size() == t.ensemble.count());
  }
}

TEST_CASE("anomalous means rejected by every submodel") {
  const auto& t = two_role();
  auto test = synthetic::make_two_role_graph(77);
  synthetic::inject_anomalies(test.graph, 3);
  const auto res = detect_all(test.graph, t.ensemble);
  for (const auto& d : res.diagnostics) {
    if (d.unknown_type) continue;
    for (const auto& v : d.per_submodel) CHECK_FALSE(v.confidence.accepted);
  }
  const auto nodes = all_nodes(test.graph);
  const auto pg = prepare_graph(test.graph, make_subgraph(test.graph, nodes), t.ensemble.maps());
  std::vector<std::uint32_t> local;
  for (auto v : res.benign) local.push_back(*pg.local(v));
  for (int first : first_accepting_submodel(pg, local, t.ensemble)) CHECK(first >= 0);
  CHECK(res.anomalous.size() + res.benign.size() == nodes.size());
}

TEST_CASE("raising R never shrinks the anomalous set") {
  const auto& t = two_role();
  auto test = synthetic::make_two_role_graph(31);
  synthetic::inject_anomalies(test.graph, 4);
  Ensemble ens = t.ensemble;
  std::vector<NodeIndex> prev;
  for (double r : {1.0, 1.2, 1.5, 2.0, 5.0, 50.0, 1e6}) {
    ens.set_ratio_threshold(r);
    const auto res = detect_all(test.graph, ens);
    CHECK(std::includes(res.anomalous.begin(), res.anomalous.end(), prev.begin(), prev.end()));
    prev = res.anomalous;
  }
}

TEST_CASE("submodel order does not change the verdicts") {
  const auto& t = two_role();
  REQUIRE(t.ensemble.count() >= 2);
  auto test = synthetic::make_two_role_graph(32);
  synthetic::inject_anomalies(test.graph, 4);
  Ensemble rev = t.ensemble;
  std::vector<std::size_t> order(rev.count());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = order.size() - 1 - i;
  rev.reorder(order);
  CHECK(detect_all(test.graph, rev).anomalous == detect_all(test.graph, t.ensemble).anomalous);
  CHECK_THROWS_AS(rev.reorder(std::vector<std::size_t>{0, 0}), InvalidArgument);
}

TEST_CASE("model files round-trip byte for byte") {
  const auto& t = two_role();
  const auto first = bytes(t.ensemble);
  std::istringstream in(first);
  const auto loaded = Ensemble::read(in);
  CHECK(bytes(loaded) == first);
  CHECK(loaded.maps() == t.ensemble.maps());
  CHECK(loaded.ratio_threshold() == t.ensemble.ratio_threshold());
  auto test = synthetic::make_two_role_graph(33);
  CHECK(detect_all(test.graph, loaded).anomalous == detect_all(test.graph, t.ensemble).anomalous);

  std::istringstream garbage("not a model");
  CHECK_THROWS_AS(Ensemble::read(garbage), FormatError);
  std::istringstream truncated(first.substr(0, first.size() / 2));
  CHECK_THROWS_AS(Ensemble::read(truncated), FormatError);
  CHECK_THROWS_AS(Ensemble::load("/nonexistent/model.bin"), IoError);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto g = synthetic::make_two_role_graph(12, {4, 40, 40, 50, 6, 20, 3, 2}).graph;
  EnsembleConfig cfg;
  cfg.seed = 4;
  const ProvenanceGraph* gs[] = {&g};
  CHECK(bytes(train_on_graph_sequence(gs, cfg)) == bytes(train_on_graph_sequence(gs, cfg)));
}

TEST_CASE("submodels from other maps are rejected") {
  const auto& t = two_role();
  ProvenanceGraph other;
  other.add_edge({"a", "x", "b", "y", "z", 0});
  Ensemble foreign(build_type_maps(other), 1.5);
  CHECK_THROWS_AS(foreign.append(t.ensemble.submodels()[0]), ShapeMismatch);
}

TEST_CASE("indistinguishable nodes with different labels are reported as collisions") {
  // A file and a socket, each written three times by the same process. Any
  // lopsided split would let a later single-class submodel take the loser, so
  // the pair is balanced and neither label can win.
  ProvenanceGraph g;
  for (int i = 0; i < 3; ++i) g.add_edge({"p", "process", "f", "file", "write", i});
  for (int i = 0; i < 3; ++i) g.add_edge({"p", "process", "s", "socket", "write", 3 + i});
  g.add_edge({"q", "process", "p", "process", "fork", 11});
  EnsembleConfig cfg;
  cfg.stall_limit = 2;
  TrainingReport report;
  const ProvenanceGraph* gs[] = {&g};
  const auto ens = train_on_graph_sequence(gs, cfg, &report);
  std::vector<UnlearnableNode> unl;
  for (const auto& s : report.subgraphs) unl.insert(unl.end(), s.unlearnable.begin(), s.unlearnable.end());
  REQUIRE(!unl.empty());
  for (const auto& u : unl) CHECK(u.cause == "feature-collision");
  std::set<std::string> ids;
  for (const auto& u : unl) ids.insert(u.node_id);
  CHECK(ids == std::set<std::string>{"f", "s"});
  const auto json = report.to_json();
  CHECK(json.contains("subgraphs"));
  CHECK(ens.count() >= 1);
}

TEST_CASE("unknown types at detection are flagged or rejected by policy") {
  const auto& t = two_role();
  auto g = t.data.graph;
  g.add_edge({"intruder", "thread", "fresh", "file", "read", 1 << 30});
  const auto nodes = all_nodes(g);
  const auto sg = make_subgraph(g, nodes);
  const auto intruder = g.index_of("intruder");
  const auto res = detect(g, sg, std::vector<NodeIndex>{intruder}, t.ensemble);
  REQUIRE(res.anomalous == std::vector<NodeIndex>{intruder});
  CHECK(res.diagnostics[0].unknown_type);
  FeatureOptions strict;
  strict.unknown = UnknownTypePolicy::kError;
  CHECK_THROWS_AS(detect(g, sg, std::vector<NodeIndex>{intruder}, t.ensemble, strict), UnknownType);
}

TEST_CASE("configuration errors") {
  ProvenanceGraph g;
  g.add_node("a", "p");
  const ProvenanceGraph* gs[] = {&g};
  CHECK_THROWS_AS(train_on_graph_sequence(gs, {}), InvalidArgument);
  const auto& t = two_role();
  EnsembleConfig bad;
  bad.stall_limit = 0;
  const ProvenanceGraph* ok[] = {&t.data.graph};
  CHECK_THROWS_AS(train_on_graph_sequence(ok, bad), InvalidArgument);
  bad = {};
  bad.ratio_threshold = 0.5;
  CHECK_THROWS_AS(train_on_graph_sequence(ok, bad), InvalidArgument);
}
