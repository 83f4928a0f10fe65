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
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "provsage/dataset.hpp"
#include "provsage/ensemble.hpp"
#include "provsage/metrics.hpp"
#include "provsage/streaming.hpp"

namespace provsage {

enum class SplitStrategy {
  kStreamSpot,  // per benign scene, a random train fraction; all attacks in test
  kKFold,       // benign k-fold; every test fold also holds all attack graphs
};

std::optional<SplitStrategy> parse_split_strategy(std::string_view name);  // streamspot, kfold
const char* split_strategy_name(SplitStrategy s);

struct SplitOptions {
  SplitStrategy strategy = SplitStrategy::kStreamSpot;
  double train_fraction = 0.75;  // kStreamSpot: floor(fraction * scene size) train graphs
  std::size_t folds = 5;         // kKFold
  std::size_t fold = 0;          // kKFold: which fold is the test fold
  std::uint64_t seed = 0;
};

// Indices into the input sequence, each list ascending.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Throws InsufficientGraphs when a benign scene cannot give both sides at
// least one graph (kStreamSpot) or there are fewer benign graphs than folds.
Split split_train_test(std::span<const LabeledGraph> graphs, const SplitOptions& options);

// Removes floor(delta * |E|) edges chosen uniformly; the node set and the
// order of the surviving edges are kept.
ProvenanceGraph drop_edges(const ProvenanceGraph& graph, double delta, std::uint64_t seed);

// Trains on the listed graphs (maps built over all of them).
Ensemble train_on_labeled(std::span<const LabeledGraph> graphs, std::span<const std::size_t> which,
                          const EnsembleConfig& config, TrainingReport* report = nullptr);

struct GraphVerdict {
  std::string graph_id;
  int scene = -1;
  bool attack = false;
  bool alert_raised = false;
  std::size_t confirmed = 0;
  std::size_t flushes = 0;
};

struct GraphLevelResult {
  std::vector<GraphVerdict> verdicts;
  ConfusionCounts counts;  // positive = attack graph
  Metrics metrics;
};

struct ReplayOptions {
  StreamConfig stream;
  // When set, every graph replays into its own store under this directory.
  std::optional<std::filesystem::path> store_root;
};

// Replays one graph edge by edge; the verdict is alert_raised at the end.
GraphVerdict replay_graph(const Ensemble& ensemble, const LabeledGraph& graph,
                          const ReplayOptions& options,
                          std::vector<ConfirmedNode>* confirmed = nullptr);

GraphLevelResult run_graph_level_eval(const Ensemble& ensemble,
                                      std::span<const LabeledGraph> graphs,
                                      std::span<const std::size_t> test,
                                      const ReplayOptions& options);

// Node-level counts for one replay: flagged = nodes confirmed by the stream.
ConfusionCounts run_node_level_eval(const Ensemble& ensemble, const ProvenanceGraph& graph,
                                    const std::vector<std::string>& anomalous_ids,
                                    const ReplayOptions& options);

struct RunResult {
  std::uint64_t seed = 0;
  Split split;
  GraphLevelResult result;
  std::size_t submodels = 0;
};

struct RepeatedEval {
  std::vector<RunResult> runs;
  ConfusionCounts mean_counts;
  Metrics mean_metrics;  // per metric, the mean over runs where it is defined

  nlohmann::json to_json() const;
};

struct EvalOptions {
  SplitOptions split;
  EnsembleConfig train;
  ReplayOptions replay;
  std::size_t repeats = 5;
};

// Repetition r reseeds the split and the training from derive_seed(root, r).
// Under kKFold the repetitions walk the folds instead.
RepeatedEval run_repeated_eval(std::span<const LabeledGraph> graphs, const EvalOptions& options);

// label,precision,recall,accuracy,f_score,fpr,fnr
void write_metrics_csv_header(std::ostream& out);
void write_metrics_csv_row(std::ostream& out, const std::string& label, const Metrics& m);
// graph_id,scene,attack,alert_raised,confirmed,flushes
void write_verdicts_csv(std::ostream& out, std::span<const GraphVerdict> verdicts);

// Confident-classification rate: the fraction of mapped nodes in `nodes`
// accepted by some submodel, with features over make_subgraph(nodes).
double acceptance_rate(const ProvenanceGraph& graph, std::span<const NodeIndex> nodes,
                       const Ensemble& ensemble, const FeatureOptions& options = {});

enum class CurveAxis { kIterations, kTrainingFraction };

struct LearningCurveOptions {
  CurveAxis axis = CurveAxis::kIterations;
  std::vector<double> values;  // epochs, or fractions in (0, 1]
  double validation_fraction = 0.2;
  EnsembleConfig train;
  // Train the stacked ensemble instead of one submodel per point.
  bool full_ensemble = false;
};

struct CurvePoint {
  double value = 0.0;
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
  std::size_t train_nodes = 0;
  std::size_t validation_nodes = 0;
};

struct NodeSplit {
  std::vector<NodeIndex> train;
  std::vector<NodeIndex> validation;
};

// Random 8:2 (by default) split of one graph's nodes.
NodeSplit split_nodes(const ProvenanceGraph& graph, double validation_fraction,
                      std::uint64_t seed);

std::vector<CurvePoint> learning_curve(const ProvenanceGraph& graph,
                                       const LearningCurveOptions& options);

// value,train_accuracy,validation_accuracy,train_nodes,validation_nodes
void write_curve_csv(std::ostream& out, std::span<const CurvePoint> points);

}  // namespace provsage
