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
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "provsage/error.hpp"
#include "provsage/eval.hpp"
#include "provsage/rng.hpp"
#include "provsage/synthetic.hpp"

using namespace provsage;

TEST_CASE("metrics: published counts") {
  const auto m = compute_metrics({25297, 3501561, 3765, 65});
  CHECK(m.value(Metric::kPrecision) == doctest::Approx(0.87).epsilon(0.005 / 0.87));
  CHECK(std::abs(m.value(Metric::kPrecision) - 25297.0 / 29062.0) < 1e-15);
  CHECK(m.value(Metric::kRecall) == doctest::Approx(0.997).epsilon(0.001));
  CHECK(std::abs(m.value(Metric::kFpr) - 0.001) < 0.0005);

  const auto perfect = compute_metrics({25, 125, 0, 0});
  for (auto k : {Metric::kPrecision, Metric::kRecall, Metric::kAccuracy, Metric::kFScore}) {
    CHECK(perfect.value(k) == 1.0);
  }
  CHECK(perfect.value(Metric::kFpr) == 0.0);
  CHECK(perfect.value(Metric::kFnr) == 0.0);
}

TEST_CASE("metrics: zero denominators are undefined, never 0 or 1") {
  const auto m = compute_metrics({0, 10, 0, 5});
  CHECK_FALSE(m.precision.has_value());
  CHECK_THROWS_AS(m.value(Metric::kPrecision), UndefinedMetric);
  CHECK_FALSE(m.f_score.has_value());
  CHECK(m.value(Metric::kRecall) == 0.0);
  CHECK(format_metric(m.precision) == "undefined");
  CHECK(m.to_json()["precision"].is_null());

  const auto none = compute_metrics({0, 0, 0, 0});
  CHECK_FALSE(none.accuracy.has_value());
  CHECK_FALSE(none.fpr.has_value());
  CHECK_FALSE(none.fnr.has_value());
  CHECK_THROWS_AS(compute_metrics({-1, 0, 0, 0}), InvalidArgument);
}

TEST_CASE("metrics agree with reduced-fraction formulas on random tuples") {
  Rng rng(99);
  auto frac = [](long long num, long long den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    const long long g = std::gcd(num, den);
    return static_cast<double>(num / g) / static_cast<double>(den / g);
  };
  for (int i = 0; i < 1000; ++i) {
    const long long tp = rng.below(50), tn = rng.below(5000), fp = rng.below(50), fn = rng.below(50);
    const auto m = compute_metrics({double(tp), double(tn), double(fp), double(fn)});
    auto same = [](std::optional<double> a, std::optional<double> b) {
      if (a.has_value() != b.has_value()) return false;
      return !a || std::abs(*a - *b) <= 1e-12;
    };
    CHECK(same(m.precision, frac(tp, tp + fp)));
    CHECK(same(m.recall, frac(tp, tp + fn)));
    CHECK(same(m.accuracy, frac(tp + tn, tp + tn + fp + fn)));
    CHECK(same(m.fpr, frac(fp, fp + tn)));
    CHECK(same(m.fnr, frac(fn, fn + tp)));
    // With P and R defined, 2PR / (P + R) = 2TP / (2TP + FP + FN).
    const auto f = (tp + fp == 0 || tp + fn == 0 || tp == 0) ? std::nullopt
                                                              : frac(2 * tp, 2 * tp + fp + fn);
    CHECK(same(m.f_score, f));
  }
}

TEST_CASE("StreamSpot loader: toy file, line counts, bad columns and round trip") {
  std::istringstream toy("a\tb\tc\td\te\t7\nc\td\tf\tb\tg\t7\na\tb\tf\tb\te\t7\n");
  const auto one = read_streamspot(toy);
  REQUIRE(one.size() == 1);
  CHECK(one[0].graph.edge_count() == 3);
  CHECK(one[0].graph_id == "7");

  std::ostringstream text;
  Rng rng(1);
  std::map<int, std::size_t> lines;
  for (int i = 0; i < 500; ++i) {
    const int gid = static_cast<int>(rng.below(4)) * 100 + static_cast<int>(rng.below(3));
    ++lines[gid];
    text << "n" << rng.below(30) << "\ta\tm" << rng.below(30) << "\tb\t" << char('p' + rng.below(4))
         << '\t' << gid << '\n';
  }
  std::istringstream in(text.str());
  const auto graphs = read_streamspot(in);
  CHECK(graphs.size() == lines.size());
  for (const auto& g : graphs) {
    CHECK(g.graph.edge_count() == lines[std::stoi(g.graph_id)]);
    CHECK(g.attack == (g.scene == 3));
  }

  std::ostringstream canon;
  write_streamspot(canon, graphs);
  std::istringstream back(canon.str());
  const auto again = read_streamspot(back);
  REQUIRE(again.size() == graphs.size());
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    CHECK(again[i].graph_id == graphs[i].graph_id);
    REQUIRE(again[i].graph.edge_count() == graphs[i].graph.edge_count());
    for (EdgeIndex e = 0; e < graphs[i].graph.edge_count(); ++e) {
      CHECK(again[i].graph.record(e) == graphs[i].graph.record(e));
    }
  }

  std::istringstream bad("a\tb\tc\td\t1\n");
  CHECK_THROWS_AS(read_streamspot(bad), FormatError);
}

namespace {

std::vector<LabeledGraph> shells(std::initializer_list<std::pair<int, int>> scenes) {
  std::vector<LabeledGraph> out;
  for (auto [scene, count] : scenes) {
    for (int i = 0; i < count; ++i) {
      LabeledGraph g;
      g.graph_id = std::to_string(scene * 100 + i);
      g.scene = scene;
      g.attack = scene == 3;
      out.push_back(std::move(g));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("split: 75/25 per benign scene, attacks in test") {
  const auto g = shells({{0, 100}, {3, 100}});
  const auto s = split_train_test(g, {});
  CHECK(s.train.size() == 75);
  CHECK(s.test.size() == 125);
  for (auto i : s.train) CHECK_FALSE(g[i].attack);
  CHECK(std::count_if(s.test.begin(), s.test.end(), [&](auto i) { return g[i].attack; }) == 100);
  const auto t = split_train_test(g, {});
  CHECK(s.train == t.train);
  SplitOptions other;
  other.seed = 1;
  CHECK(split_train_test(g, other).train != s.train);

  const auto small = shells({{0, 14}, {1, 14}, {3, 25}});
  const auto ss = split_train_test(small, {});
  CHECK(ss.train.size() == 20);  // floor(0.75 * 14) = 10 per scene
}

TEST_CASE("split: five benign folds with every attack in each test fold") {
  const auto g = shells({{0, 25}, {1, 25}, {2, 25}, {4, 25}, {5, 25}, {3, 100}});
  std::vector<std::size_t> seen;
  for (std::size_t f = 0; f < 5; ++f) {
    SplitOptions o;
    o.strategy = SplitStrategy::kKFold;
    o.fold = f;
    const auto s = split_train_test(g, o);
    CHECK(s.train.size() == 100);
    CHECK(s.test.size() == 125);
    for (auto i : s.test) {
      if (!g[i].attack) seen.push_back(i);
    }
  }
  std::sort(seen.begin(), seen.end());
  CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
  CHECK(seen.size() == 125);
}

TEST_CASE("split: too few graphs") {
  CHECK_THROWS_AS(split_train_test(shells({{0, 1}, {3, 2}}), {}), InsufficientGraphs);
  CHECK_THROWS_AS(split_train_test(shells({{3, 5}}), {}), InsufficientGraphs);
  SplitOptions k;
  k.strategy = SplitStrategy::kKFold;
  CHECK_THROWS_AS(split_train_test(shells({{0, 4}}), k), InsufficientGraphs);
}

TEST_CASE("drop_edges: floor arithmetic, node set and degree sums") {
  const auto g = oracle::random_graph(4, {30, 100});
  const auto same = drop_edges(g, 0.0, 1);
  REQUIRE(same.edge_count() == g.edge_count());
  for (EdgeIndex e = 0; e < g.edge_count(); ++e) CHECK(same.record(e) == g.record(e));

  const auto half = drop_edges(g, 0.5, 1);
  CHECK(half.edge_count() == 50);
  CHECK(half.node_count() == g.node_count());
  CHECK(drop_edges(g, 0.29, 1).edge_count() == 71);
  const auto half2 = drop_edges(g, 0.5, 1);
  for (EdgeIndex e = 0; e < half.edge_count(); ++e) CHECK(half2.record(e) == half.record(e));

  const auto maps = build_type_maps(g);
  const auto f = extract_features(half, maps);
  std::uint64_t sum = 0;
  for (auto c : f.counts) sum += c;
  CHECK(sum == 2 * half.edge_count());
  for (NodeIndex v = 0; v < half.node_count(); ++v) {
    const auto row = f.row(*f.position(v));
    const auto ne = maps.n_edge_types();
    CHECK(std::accumulate(row.begin(), row.begin() + ne, 0u) == half.in_edges(v).size());
    CHECK(std::accumulate(row.begin() + ne, row.end(), 0u) == half.out_edges(v).size());
  }

  const auto twice = drop_edges(drop_edges(g, 0.3, 1), 0.2, 2);
  const std::size_t e1 = 100 - 30, e2 = e1 - 14;
  CHECK(twice.edge_count() == e2);
  CHECK(drop_edges(g, double(100 - e2) / 100.0, 3).edge_count() == e2);
  CHECK_THROWS_AS(drop_edges(g, 1.0, 0), InvalidArgument);
}

namespace {

const std::vector<LabeledGraph>& tiny_corpus() {
  static const auto corpus = [] {
    synthetic::CorpusSpec spec;
    spec.graphs_per_benign_scene = 4;
    spec.attack_graphs = 3;
    spec.workers_min = 30;
    spec.workers_max = 50;
    return synthetic::make_streamspot_corpus(8, spec);
  }();
  return corpus;
}

}  // namespace

TEST_CASE("graph-level replay: training graphs stay quiet, order does not matter") {
  const auto& corpus = tiny_corpus();
  Split s = split_train_test(corpus, {});
  EnsembleConfig cfg;
  cfg.seed = 4;
  const Ensemble ens = train_on_labeled(corpus, s.train, cfg);
  ReplayOptions ro;
  const auto self = run_graph_level_eval(ens, corpus, s.train, ro);
  CHECK(self.counts.fp == 0);
  CHECK(self.counts.tn == s.train.size());

  const auto a = run_graph_level_eval(ens, corpus, s.test, ro);
  auto rev = s.test;
  std::reverse(rev.begin(), rev.end());
  const auto b = run_graph_level_eval(ens, corpus, rev, ro);
  for (std::size_t i = 0; i < a.verdicts.size(); ++i) {
    const auto& va = a.verdicts[i];
    const auto& vb = b.verdicts[a.verdicts.size() - 1 - i];
    CHECK(va.graph_id == vb.graph_id);
    CHECK(va.alert_raised == vb.alert_raised);
    CHECK(va.confirmed == vb.confirmed);
  }
  CHECK(a.counts == b.counts);

  LabeledGraph empty;
  empty.graph_id = "900";
  const auto v = replay_graph(ens, empty, ro);
  CHECK_FALSE(v.alert_raised);
  CHECK(v.flushes == 0);

  // Store-backed replay gives the same verdicts.
  const auto root = std::filesystem::temp_directory_path() / "provsage_test_eval_stores";
  std::filesystem::remove_all(root);
  ReplayOptions with_store = ro;
  with_store.store_root = root;
  const auto c = run_graph_level_eval(ens, corpus, s.test, with_store);
  CHECK(c.counts == a.counts);
  CHECK(std::filesystem::exists(root / ("graph_" + corpus[s.test[0]].graph_id) / "edges.log"));
  std::filesystem::remove_all(root);

  std::ostringstream csv;
  write_verdicts_csv(csv, a.verdicts);
  CHECK(csv.str().rfind("graph_id,scene,attack,alert_raised,confirmed,flushes\n", 0) == 0);
}

TEST_CASE("repeated evaluation reports the mean of its runs") {
  const auto& corpus = tiny_corpus();
  EvalOptions eo;
  eo.repeats = 2;
  eo.train.seed = 3;
  const auto rep = run_repeated_eval(corpus, eo);
  REQUIRE(rep.runs.size() == 2);
  ConfusionCounts sum;
  for (const auto& r : rep.runs) sum += r.result.counts;
  CHECK(rep.mean_counts == sum.scaled(0.5));
  const auto a = rep.runs[0].result.metrics.accuracy, b = rep.runs[1].result.metrics.accuracy;
  CHECK(rep.mean_metrics.accuracy.value() == doctest::Approx((*a + *b) / 2));
  CHECK(rep.runs[0].split.train != rep.runs[1].split.train);
  const auto j = rep.to_json();
  CHECK(j["runs"].size() == 2);
  CHECK(j.contains("mean_metrics"));
}

TEST_CASE("node-level replay against a ground-truth list") {
  std::vector<synthetic::TwoRoleGraph> gs;
  std::vector<const ProvenanceGraph*> ptrs;
  for (int i = 0; i < 3; ++i) gs.push_back(synthetic::make_two_role_graph(200 + i));
  for (auto& g : gs) ptrs.push_back(&g.graph);
  EnsembleConfig cfg;
  cfg.seed = 1;
  const auto ens = train_on_graph_sequence(ptrs, cfg);
  auto test = synthetic::make_two_role_graph(210);
  const auto inj = synthetic::inject_anomalies(test.graph, 3);
  std::vector<std::string> ids;
  for (auto v : inj.anomalous) ids.push_back(test.graph.node_id(v));
  const auto c = run_node_level_eval(ens, test.graph, ids, {});
  CHECK(c.tp + c.fn == ids.size());
  CHECK(c.tp + c.tn + c.fp + c.fn == test.graph.node_count());
  CHECK(c.tp == ids.size());
}

TEST_CASE("learning curve: split sizes, fraction one, and an upward trend in iterations") {
  const auto g = synthetic::make_two_role_graph(300).graph;
  const auto split = split_nodes(g, 0.2, 0);
  CHECK(std::abs(double(split.validation.size()) - 0.2 * g.node_count()) <= 1.0);
  CHECK(split.train.size() + split.validation.size() == g.node_count());

  LearningCurveOptions lo;
  lo.axis = CurveAxis::kTrainingFraction;
  lo.values = {0.25, 1.0};
  lo.train.seed = 6;
  const auto pts = learning_curve(g, lo);
  REQUIRE(pts.size() == 2);
  CHECK(pts[1].train_nodes == split.train.size());
  CHECK(pts[0].train_nodes < pts[1].train_nodes);
  // The fraction-one point is a plain run over the training nodes.
  LearningCurveOptions it = lo;
  it.axis = CurveAxis::kIterations;
  it.values = {double(lo.train.train.epochs)};
  const auto plain = learning_curve(g, it);
  CHECK(plain[0].train_accuracy == pts[1].train_accuracy);
  CHECK(plain[0].validation_accuracy == pts[1].validation_accuracy);

  // Spearman correlation between epochs and the mean train accuracy.
  const std::vector<double> epochs{1, 3, 10, 30, 60};
  std::vector<double> mean(epochs.size(), 0.0);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    LearningCurveOptions o;
    o.values = epochs;
    o.train.seed = seed;
    const auto c = learning_curve(g, o);
    for (std::size_t i = 0; i < c.size(); ++i) mean[i] += c[i].train_accuracy / 5;
  }
  std::vector<std::size_t> order(mean.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return mean[a] < mean[b]; });
  std::vector<double> rank(mean.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = double(r);
  double d2 = 0;
  for (std::size_t i = 0; i < rank.size(); ++i) d2 += (rank[i] - i) * (rank[i] - i);
  const double n = double(rank.size());
  const double rho = 1 - 6 * d2 / (n * (n * n - 1));
  CHECK(rho > 0);
  MESSAGE("mean train accuracy by epochs: " << mean[0] << " " << mean[2] << " " << mean[4]);

  std::ostringstream csv;
  write_curve_csv(csv, pts);
  CHECK(csv.str().rfind("value,train_accuracy,validation_accuracy", 0) == 0);
}
