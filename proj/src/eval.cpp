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

#include "provsage/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "provsage/error.hpp"
#include "provsage/rng.hpp"
#include "provsage/store.hpp"

namespace provsage {

std::optional<SplitStrategy> parse_split_strategy(std::string_view name) {
  if (name == "streamspot") return SplitStrategy::kStreamSpot;
  if (name == "kfold") return SplitStrategy::kKFold;
  return std::nullopt;
}

const char* split_strategy_name(SplitStrategy s) {
  return s == SplitStrategy::kStreamSpot ? "streamspot" : "kfold";
}

Split split_train_test(std::span<const LabeledGraph> graphs, const SplitOptions& options) {
  Split split;
  std::map<int, std::vector<std::size_t>> scenes;
  std::vector<std::size_t> benign;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    if (graphs[i].attack) {
      split.test.push_back(i);
    } else {
      scenes[graphs[i].scene].push_back(i);
      benign.push_back(i);
    }
  }
  if (benign.empty()) throw InsufficientGraphs("no benign graphs to train on");
  Rng rng(options.seed);
  if (options.strategy == SplitStrategy::kStreamSpot) {
    if (!(options.train_fraction > 0.0 && options.train_fraction < 1.0)) {
      throw InvalidArgument("train fraction must lie in (0, 1)");
    }
    for (auto& [scene, ids] : scenes) {
      const auto n_train = static_cast<std::size_t>(
          std::floor(options.train_fraction * static_cast<double>(ids.size())));
      if (n_train == 0 || n_train == ids.size()) {
        throw InsufficientGraphs("scene " + std::to_string(scene) + " has " +
                                 std::to_string(ids.size()) + " benign graphs, too few to split");
      }
      rng.shuffle(ids);
      split.train.insert(split.train.end(), ids.begin(), ids.begin() + n_train);
      split.test.insert(split.test.end(), ids.begin() + n_train, ids.end());
    }
  } else {
    if (options.folds < 2) throw InvalidArgument("k-fold needs at least 2 folds");
    if (options.fold >= options.folds) throw InvalidArgument("fold index out of range");
    if (benign.size() < options.folds) {
      throw InsufficientGraphs(std::to_string(benign.size()) + " benign graphs for " +
                               std::to_string(options.folds) + " folds");
    }
    rng.shuffle(benign);
    // Fold f takes positions [f * n / k, (f + 1) * n / k).
    const std::size_t n = benign.size(), k = options.folds;
    const std::size_t lo = options.fold * n / k, hi = (options.fold + 1) * n / k;
    for (std::size_t i = 0; i < n; ++i) {
      (i >= lo && i < hi ? split.test : split.train).push_back(benign[i]);
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

ProvenanceGraph drop_edges(const ProvenanceGraph& graph, double delta, std::uint64_t seed) {
  if (!(delta >= 0.0 && delta < 1.0)) throw InvalidArgument("drop rate must lie in [0, 1)");
  const std::size_t e = graph.edge_count();
  const auto n_drop = static_cast<std::size_t>(std::floor(delta * static_cast<double>(e) + 1e-9));
  std::vector<EdgeIndex> ids(e);
  for (EdgeIndex i = 0; i < e; ++i) ids[i] = i;
  Rng rng(seed);
  // Partial Fisher-Yates: the first n_drop slots end up a uniform sample.
  for (std::size_t i = 0; i < n_drop; ++i) {
    std::swap(ids[i], ids[i + rng.below(e - i)]);
  }
  std::vector<EdgeIndex> keep(ids.begin() + n_drop, ids.end());
  std::sort(keep.begin(), keep.end());
  ProvenanceGraph out = graph.with_edges(keep);
  return out;
}

Ensemble train_on_labeled(std::span<const LabeledGraph> graphs, std::span<const std::size_t> which,
                          const EnsembleConfig& config, TrainingReport* report) {
  std::vector<const ProvenanceGraph*> ptrs;
  for (auto i : which) ptrs.push_back(&graphs[i].graph);
  return train_on_graph_sequence(ptrs, config, report);
}

GraphVerdict replay_graph(const Ensemble& ensemble, const LabeledGraph& graph,
                          const ReplayOptions& options, std::vector<ConfirmedNode>* confirmed) {
  std::optional<GraphStore> store;
  if (options.store_root) {
    const auto dir = *options.store_root / ("graph_" + graph.graph_id);
    std::filesystem::remove_all(dir);
    store.emplace(GraphStore::open(dir, StoreOptions{false}));
  }
  StreamingDetector det(ensemble, options.stream, store ? &*store : nullptr);
  const auto& g = graph.graph;
  for (EdgeIndex e = 0; e < g.edge_count(); ++e) det.push(g.record(e));
  det.finish();
  GraphVerdict v;
  v.graph_id = graph.graph_id;
  v.scene = graph.scene;
  v.attack = graph.attack;
  v.alert_raised = det.alerts().alert_raised();
  v.confirmed = det.alerts().confirmed_nodes().size();
  v.flushes = det.stats().flushes;
  if (confirmed) *confirmed = det.alerts().confirmed_nodes();
  return v;
}

GraphLevelResult run_graph_level_eval(const Ensemble& ensemble,
                                      std::span<const LabeledGraph> graphs,
                                      std::span<const std::size_t> test,
                                      const ReplayOptions& options) {
  GraphLevelResult r;
  for (auto i : test) {
    const GraphVerdict v = replay_graph(ensemble, graphs[i], options);
    if (v.attack) ++(v.alert_raised ? r.counts.tp : r.counts.fn);
    else ++(v.alert_raised ? r.counts.fp : r.counts.tn);
    r.verdicts.push_back(v);
  }
  r.metrics = compute_metrics(r.counts);
  return r;
}

ConfusionCounts run_node_level_eval(const Ensemble& ensemble, const ProvenanceGraph& graph,
                                    const std::vector<std::string>& anomalous_ids,
                                    const ReplayOptions& options) {
  LabeledGraph lg;
  lg.graph_id = "node-level";
  lg.graph = graph;
  std::vector<ConfirmedNode> confirmed;
  replay_graph(ensemble, lg, options, &confirmed);
  std::unordered_set<NodeIndex> anomalous, flagged;
  for (const auto& id : anomalous_ids) {
    if (auto v = graph.find(id)) anomalous.insert(*v);
  }
  for (const auto& c : confirmed) flagged.insert(graph.index_of(c.node.node_id));
  return score_node_level(graph, anomalous, flagged);
}

RepeatedEval run_repeated_eval(std::span<const LabeledGraph> graphs, const EvalOptions& options) {
  if (options.repeats == 0) throw InvalidArgument("at least one repetition is needed");
  RepeatedEval out;
  for (std::size_t r = 0; r < options.repeats; ++r) {
    RunResult run;
    run.seed = derive_seed(options.split.seed, r);
    SplitOptions so = options.split;
    so.seed = run.seed;
    if (so.strategy == SplitStrategy::kKFold) {
      so.seed = options.split.seed;  // one partition, folds in turn
      so.fold = r % so.folds;
    }
    run.split = split_train_test(graphs, so);
    EnsembleConfig tc = options.train;
    tc.seed = derive_seed(options.train.seed, r);
    const Ensemble ens = train_on_labeled(graphs, run.split.train, tc);
    run.submodels = ens.count();
    run.result = run_graph_level_eval(ens, graphs, run.split.test, options.replay);
    out.mean_counts += run.result.counts;
    out.runs.push_back(std::move(run));
  }
  out.mean_counts = out.mean_counts.scaled(1.0 / static_cast<double>(options.repeats));
  for (auto m : {Metric::kPrecision, Metric::kRecall, Metric::kAccuracy, Metric::kFScore,
                 Metric::kFpr, Metric::kFnr}) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& run : out.runs) {
      if (auto v = run.result.metrics.get(m)) {
        sum += *v;
        ++n;
      }
    }
    std::optional<double> mean;
    if (n > 0) mean = sum / static_cast<double>(n);
    switch (m) {
      case Metric::kPrecision: out.mean_metrics.precision = mean; break;
      case Metric::kRecall: out.mean_metrics.recall = mean; break;
      case Metric::kAccuracy: out.mean_metrics.accuracy = mean; break;
      case Metric::kFScore: out.mean_metrics.f_score = mean; break;
      case Metric::kFpr: out.mean_metrics.fpr = mean; break;
      case Metric::kFnr: out.mean_metrics.fnr = mean; break;
    }
  }
  return out;
}

nlohmann::json RepeatedEval::to_json() const {
  nlohmann::json j;
  auto counts = [](const ConfusionCounts& c) {
    return nlohmann::json{{"tp", c.tp}, {"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}};
  };
  auto& runs_j = j["runs"] = nlohmann::json::array();
  for (const auto& r : runs) {
    nlohmann::json v = nlohmann::json::array();
    for (const auto& g : r.result.verdicts) {
      v.push_back({{"graph_id", g.graph_id},
                   {"attack", g.attack},
                   {"alert_raised", g.alert_raised},
                   {"confirmed", g.confirmed}});
    }
    runs_j.push_back({{"seed", r.seed},
                      {"submodels", r.submodels},
                      {"train_graphs", r.split.train.size()},
                      {"test_graphs", r.split.test.size()},
                      {"counts", counts(r.result.counts)},
                      {"metrics", r.result.metrics.to_json()},
                      {"verdicts", std::move(v)}});
  }
  j["mean_counts"] = counts(mean_counts);
  j["mean_metrics"] = mean_metrics.to_json();
  return j;
}

void write_metrics_csv_header(std::ostream& out) {
  out << "label,precision,recall,accuracy,f_score,fpr,fnr\n";
}

void write_metrics_csv_row(std::ostream& out, const std::string& label, const Metrics& m) {
  out << label << ',' << format_metric(m.precision) << ',' << format_metric(m.recall) << ','
      << format_metric(m.accuracy) << ',' << format_metric(m.f_score) << ','
      << format_metric(m.fpr) << ',' << format_metric(m.fnr) << '\n';
}

void write_verdicts_csv(std::ostream& out, std::span<const GraphVerdict> verdicts) {
  out << "graph_id,scene,attack,alert_raised,confirmed,flushes\n";
  for (const auto& v : verdicts) {
    out << v.graph_id << ',' << v.scene << ',' << (v.attack ? 1 : 0) << ','
        << (v.alert_raised ? 1 : 0) << ',' << v.confirmed << ',' << v.flushes << '\n';
  }
}

double acceptance_rate(const ProvenanceGraph& graph, std::span<const NodeIndex> nodes,
                       const Ensemble& ensemble, const FeatureOptions& options) {
  if (nodes.empty()) throw InvalidArgument("acceptance rate over no nodes");
  const Subgraph sub = make_subgraph(graph, {nodes.begin(), nodes.end()});
  const DetectionResult r = detect(graph, sub, nodes, ensemble, options);
  std::size_t mapped = r.benign.size();
  for (const auto& d : r.diagnostics) mapped += d.unknown_type ? 0 : 1;
  if (mapped == 0) throw InvalidArgument("no node with a mapped type");
  return static_cast<double>(r.benign.size()) / static_cast<double>(mapped);
}

NodeSplit split_nodes(const ProvenanceGraph& graph, double validation_fraction,
                      std::uint64_t seed) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw InvalidArgument("validation fraction must lie in (0, 1)");
  }
  std::vector<NodeIndex> all(graph.node_count());
  for (NodeIndex v = 0; v < all.size(); ++v) all[v] = v;
  Rng rng(seed);
  rng.shuffle(all);
  const auto n_val = static_cast<std::size_t>(
      std::llround(validation_fraction * static_cast<double>(all.size())));
  NodeSplit s;
  s.validation.assign(all.begin(), all.begin() + n_val);
  s.train.assign(all.begin() + n_val, all.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

std::vector<CurvePoint> learning_curve(const ProvenanceGraph& graph,
                                       const LearningCurveOptions& options) {
  const TypeMaps maps = build_type_maps(graph);
  const NodeSplit split = split_nodes(graph, options.validation_fraction, options.train.seed);
  if (split.train.empty() || split.validation.empty()) {
    throw InvalidArgument("graph too small for a train/validation split");
  }
  std::vector<CurvePoint> out;
  for (double value : options.values) {
    EnsembleConfig cfg = options.train;
    std::vector<NodeIndex> train = split.train;
    if (options.axis == CurveAxis::kIterations) {
      if (!(value >= 1.0)) throw InvalidArgument("iteration counts must be >= 1");
      cfg.train.epochs = static_cast<int>(value);
    } else {
      if (!(value > 0.0 && value <= 1.0)) throw InvalidArgument("fractions must lie in (0, 1]");
      Rng rng(derive_seed(options.train.seed, 0x1c));
      rng.shuffle(train);
      const auto n = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(value * static_cast<double>(train.size()))));
      train.resize(n);
      std::sort(train.begin(), train.end());
    }
    const Subgraph sub = make_subgraph(graph, train);
    Ensemble ens(maps, cfg.ratio_threshold);
    if (options.full_ensemble) {
      ens = train_ensemble(graph, sub, std::move(ens), cfg);
    } else {
      const PreparedGraph pg = prepare_graph(graph, sub, maps, cfg.features);
      std::vector<std::uint32_t> targets;
      std::vector<int> labels;
      for (NodeIndex v : train) {
        const auto l = *pg.local(v);
        targets.push_back(l);
        labels.push_back(pg.labels[l]);
      }
      TrainConfig tc = cfg.train;
      tc.seed = derive_seed(cfg.seed, 0);
      ens.append(train_submodel(pg.tensor, targets, labels, static_cast<int>(maps.n_node_types()),
                                tc, maps.fingerprint()));
    }
    CurvePoint p;
    p.value = value;
    p.train_nodes = train.size();
    p.validation_nodes = split.validation.size();
    p.train_accuracy = acceptance_rate(graph, train, ens, cfg.features);
    p.validation_accuracy = acceptance_rate(graph, split.validation, ens, cfg.features);
    out.push_back(p);
  }
  return out;
}

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> points) {
  out << "value,train_accuracy,validation_accuracy,train_nodes,validation_nodes\n";
  char buf[128];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%g,%.6f,%.6f,%zu,%zu\n", p.value, p.train_accuracy,
                  p.validation_accuracy, p.train_nodes, p.validation_nodes);
    out << buf;
  }
}

}  // namespace provsage
