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

#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "provsage/features.hpp"
#include "provsage/gnn.hpp"
#include "provsage/graph.hpp"

namespace provsage {

enum class FeatureSource {
  kSubgraphLocal,  // count only the subgraph's induced edges
  kWholeHistory,   // the store's running per-node counters
};

struct FeatureOptions {
  FeatureSource source = FeatureSource::kSubgraphLocal;
  UnknownTypePolicy unknown = UnknownTypePolicy::kFlagAnomalous;
};

// A subgraph turned into model input: local indices are positions in `nodes`
// (sorted global indices), with labels, unknown-type flags and local edges.
struct PreparedGraph {
  std::vector<NodeIndex> nodes;
  std::vector<int> labels;
  std::vector<std::uint8_t> unknown;
  std::vector<LocalEdge> edges;
  FeatureSet features;
  GraphTensor tensor;

  std::optional<std::uint32_t> local(NodeIndex v) const;
};

PreparedGraph prepare_graph(const ProvenanceGraph& graph, const Subgraph& subgraph,
                            const TypeMaps& maps, const FeatureOptions& options = {});

// Sub-view over `keep` (local indices of `source`), keeping features as they
// were computed for the source and the edges induced among `keep`.
PreparedGraph restrict_graph(const PreparedGraph& source,
                             std::span<const std::uint32_t> keep);

// Local indices within `hops` in-hops of `seeds`, seeds included, sorted.
std::vector<std::uint32_t> local_in_closure(const PreparedGraph& graph,
                                            std::span<const std::uint32_t> seeds,
                                            int hops);

class Ensemble {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  Ensemble() = default;
  Ensemble(TypeMaps maps, double ratio_threshold)
      : maps_(std::move(maps)), ratio_threshold_(ratio_threshold) {}

  const TypeMaps& maps() const { return maps_; }
  double ratio_threshold() const { return ratio_threshold_; }
  void set_ratio_threshold(double r) { ratio_threshold_ = r; }
  const std::vector<Submodel>& submodels() const { return submodels_; }
  std::size_t count() const { return submodels_.size(); }

  // Throws ShapeMismatch if the submodel does not fit the maps.
  void append(Submodel model);
  void reorder(std::span<const std::size_t> order);

  void write(std::ostream& out) const;
  static Ensemble read(std::istream& in);
  void save(const std::string& path) const;
  static Ensemble load(const std::string& path);

 private:
  TypeMaps maps_;
  double ratio_threshold_ = 1.5;
  std::vector<Submodel> submodels_;
};

struct EnsembleConfig {
  double ratio_threshold = 1.5;
  TrainConfig train;
  // Consecutive submodels allowed to make no progress before the remaining
  // nodes are declared unlearnable.
  int stall_limit = 3;
  // Covered nodes per class added to the training targets of every
  // submodel after the first one in a subgraph; 0 trains on the residual
  // alone.
  std::size_t contrast_per_class = 16;
  std::size_t split_size = 150000;
  std::uint64_t seed = 0;
  FeatureOptions features{FeatureSource::kSubgraphLocal, UnknownTypePolicy::kError};
};

struct UnlearnableNode {
  NodeIndex node;
  std::string node_id;
  int label;
  std::string cause;
};

struct SubgraphTrainingReport {
  std::size_t graph_index = 0;
  std::size_t active = 0;
  std::size_t uncovered_after_prefilter = 0;
  std::vector<std::size_t> remaining_after_submodel;  // |X| trajectory
  std::size_t submodels_added = 0;
  std::vector<UnlearnableNode> unlearnable;
};

struct TrainingReport {
  std::vector<SubgraphTrainingReport> subgraphs;
  std::vector<std::size_t> graphs_trained;
  std::vector<std::size_t> graphs_skipped;
  std::size_t submodel_count = 0;

  nlohmann::json to_json() const;
};

// Extends `ensemble` until every active node of the subgraph is accepted by
// some submodel or has been declared unlearnable.
Ensemble train_ensemble(const ProvenanceGraph& graph, const Subgraph& subgraph,
                        Ensemble ensemble, const EnsembleConfig& config,
                        TrainingReport* report = nullptr, std::size_t graph_index = 0,
                        std::size_t subgraph_index = 0);

// Builds maps over every graph, then trains incrementally graph by graph.
Ensemble train_on_graph_sequence(std::span<const ProvenanceGraph* const> graphs,
                                 const EnsembleConfig& config,
                                 TrainingReport* report = nullptr);

// Continues an existing ensemble (maps frozen) over more graphs.
Ensemble extend_on_graph_sequence(Ensemble ensemble,
                                  std::span<const ProvenanceGraph* const> graphs,
                                  const EnsembleConfig& config,
                                  TrainingReport* report = nullptr);

struct SubmodelVerdict {
  Confidence confidence;
  std::vector<double> probabilities;
  double margin = 0.0;  // log p[label] - log max_{j != label} p[j]
};

struct NodeDiagnostics {
  NodeIndex node;
  bool unknown_type = false;
  int label = -1;
  int best_class = -1;        // argmax of the most favorable submodel
  double best_ratio = 0.0;
  std::vector<SubmodelVerdict> per_submodel;
};

struct DetectionResult {
  std::vector<NodeIndex> anomalous;  // sorted
  std::vector<NodeIndex> benign;     // sorted; accepted by some submodel
  std::vector<NodeDiagnostics> diagnostics;  // aligned with `anomalous`

  const NodeDiagnostics* diagnostics_for(NodeIndex v) const;
};

// Candidates surviving every submodel are anomalous. Candidates outside the
// subgraph are ignored.
DetectionResult detect(const ProvenanceGraph& graph, const Subgraph& subgraph,
                       std::span<const NodeIndex> candidates, const Ensemble& ensemble,
                       const FeatureOptions& options = {});

DetectionResult detect_prepared(const PreparedGraph& prepared,
                                std::span<const NodeIndex> candidates,
                                const Ensemble& ensemble);

// For each of `nodes` (local indices): the first accepting submodel, or -1.
std::vector<int> first_accepting_submodel(const PreparedGraph& prepared,
                                          std::span<const std::uint32_t> nodes,
                                          const Ensemble& ensemble);

}  // namespace provsage
