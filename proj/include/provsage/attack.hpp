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
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "provsage/ensemble.hpp"
#include "provsage/features.hpp"
#include "provsage/graph.hpp"
#include "provsage/metrics.hpp"

namespace provsage {

// Relative L2 budget: a crafted x-hat must satisfy |x-hat - x| < delta_a |x|.
struct AttackBudget {
  double delta_a = 0.1;
};

enum class AttackStatus {
  kOk,
  kInfeasibleBudget,  // no integer point other than x lies inside the ball
  kNoImprovement,     // the search ended back at x
};

const char* attack_status_name(AttackStatus status);

struct AttackResult {
  std::vector<std::uint32_t> x;
  std::vector<std::uint32_t> x_hat;
  AttackStatus status = AttackStatus::kOk;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  // Largest |x_t - x| / (delta_a |x|) over the continuous iterates.
  double max_step_ratio = 0.0;
  std::optional<std::size_t> nearest_row;  // training-data attack only
};

// Nearest same-label row of `training` (ties to the lowest row), then the
// integer point closest to it inside the ball. Throws EmptyClass.
AttackResult attack_with_training_data(std::span<const std::uint32_t> x, int label,
                                       const FeatureSet& training, AttackBudget budget);

// A benign neighbor whose feature moves with the attacked node's edits:
// a change d on the attacked node's coordinate c shifts the neighbor's
// mirrored coordinate (in-slot <-> out-slot of the same edge type) by
// coupling[c] * d.
struct AttackNeighbor {
  std::uint32_t local = 0;
  std::vector<double> coupling;
};

// The attacked node inside a small prepared graph holding its receptive
// field (and its neighbors', if any).
struct AttackTarget {
  PreparedGraph graph;
  std::uint32_t local = 0;
  std::vector<AttackNeighbor> neighbors;

  std::span<const std::uint32_t> x() const { return graph.features.row(local); }
  int label() const { return graph.labels[local]; }
};

// Cuts the receptive field of `v` out of `snapshot` (prepared from `graph`).
// Neighbors are the nodes adjacent to v that are in `benign`; each
// coordinate's delta is shared equally among the neighbors joined to v by an
// edge of that type and direction.
AttackTarget make_attack_target(const ProvenanceGraph& graph, const PreparedGraph& snapshot,
                                const TypeMaps& maps, NodeIndex v, int hops,
                                const std::unordered_set<NodeIndex>& benign = {});

struct PgdOptions {
  int steps = 100;
  // Rounds of +-1 integer moves after rounding; pair moves are tried when
  // the feature width is at most `pair_move_width`.
  int polish_rounds = 8;
  std::size_t pair_move_width = 16;
};

// Projected gradient descent on the submodel's cross-entropy toward the
// node's own label, step delta_a |x| / steps, then integer rounding.
AttackResult attack_with_model(const AttackTarget& target, const Submodel& model,
                               AttackBudget budget, const PgdOptions& options = {});

// Same search over the joint loss of the node and its coupled neighbors.
AttackResult attack_with_neighbors(const AttackTarget& target, const Submodel& model,
                                   AttackBudget budget, const PgdOptions& options = {});

// Sum of cross-entropies of the target (feature x-hat) and its neighbors
// (features shifted by the coupling), as minimized by the attacks.
double attack_objective(const AttackTarget& target, const Submodel& model,
                        std::span<const std::uint32_t> x_hat, bool with_neighbors);

// Node types for attacker-controlled peers, by edge type: out_peer_type[t]
// receives the attacked node's new out-edges of type t, in_peer_type[t]
// sends its new in-edges.
struct PeerRules {
  std::map<std::string, std::string> out_peer_type;
  std::map<std::string, std::string> in_peer_type;
  std::size_t pool_size = 4;
  std::string prefix = "peer";

  // Most frequent endpoint type per edge type (ties to the smaller name).
  static PeerRules infer(std::span<const ProvenanceGraph* const> graphs);
};

class PeerPool {
 public:
  PeerPool(PeerRules rules, const ProvenanceGraph& graph);

  struct Peer {
    std::string id;
    std::string type;
  };
  // Next peer, round robin, for a new edge of `edge_type`. Throws
  // InvalidArgument when the rules do not cover the edge type.
  Peer next(const std::string& edge_type, bool out_slot);

 private:
  PeerRules rules_;
  std::unordered_set<std::string> taken_ids_;
  std::map<std::pair<std::string, bool>, std::size_t> cursor_;
  std::map<std::tuple<std::string, bool, std::size_t>, std::string> ids_;
};

struct EdgeEdit {
  enum class Kind { kAdd, kRemove };
  Kind kind = Kind::kAdd;
  EdgeIndex removed = 0;  // kRemove
  EdgeRecord added;       // kAdd
};

// Edits turning `node`'s feature (whole-graph counts) from x into x_hat.
// Removals take the node's latest non-loop edges of the slot's type that are
// not in `reserved`, which receives them. Throws NegativeCount.
std::vector<EdgeEdit> realize_perturbation(const ProvenanceGraph& graph, NodeIndex node,
                                           std::span<const std::uint32_t> x,
                                           std::span<const std::uint32_t> x_hat,
                                           const TypeMaps& maps, PeerPool& peers,
                                           std::unordered_set<EdgeIndex>* reserved = nullptr);

// Copy without the removed edges (dense node indices kept) and with the
// added edges appended.
ProvenanceGraph apply_edits(const ProvenanceGraph& graph, std::span<const EdgeEdit> edits);

enum class AttackKind { kTrainingData, kModel, kModelNeighbors };

const char* attack_kind_name(AttackKind kind);  // train-data, model, model+neighbors
std::optional<AttackKind> parse_attack_kind(std::string_view name);

// Whole-graph features of every node of the graphs, stacked.
FeatureSet training_feature_bank(std::span<const ProvenanceGraph* const> graphs,
                                 const TypeMaps& maps);

// Everything in the graph is one snapshot and every node a candidate.
DetectionResult detect_whole_graph(const ProvenanceGraph& graph, const Ensemble& ensemble,
                                   PreparedGraph* prepared = nullptr);

struct EvasionCase {
  std::string name;
  ProvenanceGraph graph;
  std::unordered_set<NodeIndex> anomalous;
};

struct EvasionConfig {
  std::vector<double> deltas{0.0, 0.05, 0.1, 0.2};
  std::vector<AttackKind> kinds{AttackKind::kTrainingData, AttackKind::kModel,
                                AttackKind::kModelNeighbors};
  PgdOptions pgd;
  std::size_t submodel = 0;
  PeerRules peers;
};

struct NodeAttackTrace {
  std::string graph;
  std::string node_id;
  AttackKind kind = AttackKind::kModel;
  double delta_a = 0.0;
  AttackResult result;
  std::size_t edits = 0;
  bool evaded = false;

  nlohmann::json to_json() const;
};

struct EvasionRow {
  double delta_a = 0.0;
  AttackKind kind = AttackKind::kModel;
  ConfusionCounts counts;
  Metrics metrics;
  std::size_t attacked = 0;
  std::size_t evaded = 0;
  std::size_t infeasible = 0;
  std::size_t no_improvement = 0;
};

struct EvasionReport {
  ConfusionCounts baseline;
  Metrics baseline_metrics;
  std::vector<EvasionRow> rows;
  std::vector<NodeAttackTrace> traces;

  // delta_a,attack_kind,FNR,FPR,precision,recall
  void write_csv(std::ostream& out) const;
  nlohmann::json traces_json() const;
};

// Scores are per node over the original nodes of each case (peers excluded):
// an anomalous node is a TP iff it is flagged itself. Every baseline TP is
// attacked independently on the unmodified graph; the edits of all attacked
// nodes are then applied together and detection reruns.
EvasionReport evaluate_evasion(const Ensemble& ensemble, std::span<const EvasionCase> cases,
                               const FeatureSet& training, const EvasionConfig& config);

}  // namespace provsage
