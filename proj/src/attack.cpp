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

#include "provsage/attack.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string_view>

#include "provsage/error.hpp"

namespace provsage {

namespace {

using Point = std::vector<std::uint32_t>;

double norm2(std::span<const std::uint32_t> x) {
  double s = 0.0;
  for (auto v : x) s += static_cast<double>(v) * v;
  return s;
}

double dist2(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

// Squared radius of the open ball, or nullopt when only x itself fits.
std::optional<double> feasible_radius2(std::span<const std::uint32_t> x, AttackBudget budget) {
  if (budget.delta_a < 0.0 || !std::isfinite(budget.delta_a)) {
    throw InvalidArgument("delta_a must be a finite value >= 0");
  }
  const double r2 = budget.delta_a * budget.delta_a * norm2(x);
  // The nearest other integer point is at distance exactly 1.
  if (!(r2 > 1.0)) return std::nullopt;
  return r2;
}

bool inside(std::span<const std::uint32_t> y, std::span<const std::uint32_t> x, double r2) {
  return dist2(y, x) < r2;
}

// Round half up, clip at zero, then walk the largest deltas back toward x
// until the point is strictly inside the ball.
Point round_into_ball(const std::vector<double>& p, std::span<const std::uint32_t> x,
                      double r2) {
  Point y(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double v = std::floor(p[i] + 0.5);
    y[i] = v <= 0.0 ? 0u : static_cast<std::uint32_t>(std::min(v, 4294967295.0));
  }
  while (!inside(y, x, r2)) {
    std::size_t worst = 0;
    std::int64_t worst_d = -1;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const std::int64_t d = std::llabs(static_cast<std::int64_t>(y[i]) - x[i]);
      if (d > worst_d) {
        worst_d = d;
        worst = i;
      }
    }
    if (y[worst] > x[worst]) --y[worst]; else ++y[worst];
  }
  return y;
}

// Greedy +-1 moves (and pair moves on narrow features) that lower f while
// staying strictly inside the ball.
void polish(Point& y, double& fy, std::span<const std::uint32_t> x, double r2,
            const std::function<double(const Point&)>& f, const PgdOptions& opt) {
  const std::size_t w = y.size();
  const bool pairs = w <= opt.pair_move_width;
  for (int round = 0; round < opt.polish_rounds; ++round) {
    Point best = y;
    double best_f = fy;
    Point trial = y;
    auto consider = [&] {
      if (!inside(trial, x, r2)) return;
      const double ft = f(trial);
      if (ft < best_f) {
        best_f = ft;
        best = trial;
      }
    };
    for (std::size_t i = 0; i < w; ++i) {
      for (int si : {1, -1}) {
        if (si < 0 && y[i] == 0) continue;
        trial[i] = y[i] + si;
        consider();
        if (pairs) {
          for (std::size_t j = i + 1; j < w; ++j) {
            for (int sj : {1, -1}) {
              if (sj < 0 && y[j] == 0) continue;
              trial[j] = y[j] + sj;
              consider();
              trial[j] = y[j];
            }
          }
        }
        trial[i] = y[i];
      }
    }
    if (!(best_f < fy)) break;
    y = std::move(best);
    fy = best_f;
  }
}

std::size_t mirror(std::size_t c, std::size_t w) { return c < w / 2 ? c + w / 2 : c - w / 2; }

// The attacks' objective over a private copy of the target graph's features.
class Objective {
 public:
  Objective(const AttackTarget& t, const Submodel& model, bool with_neighbors)
      : t_(t), model_(model), tensor_(t.graph.tensor) {
    if (t.label() < 0) throw InvalidArgument("attacked node has an unmapped type");
    if (static_cast<std::size_t>(model.input_width()) != t.graph.features.width) {
      throw ShapeMismatch("submodel does not fit the target's features");
    }
    targets_.push_back(t.local);
    labels_.push_back(t.label());
    if (with_neighbors) {
      for (const auto& nb : t.neighbors) {
        if (t.graph.labels[nb.local] < 0 || nb.local == t.local) continue;
        neighbors_.push_back(&nb);
        targets_.push_back(nb.local);
        labels_.push_back(t.graph.labels[nb.local]);
      }
    }
  }

  double value(std::span<const double> y) {
    load(y);
    return mean_loss(tensor_, model_, targets_, labels_) * targets_.size();
  }
  double value(const Point& y) {
    std::vector<double> d(y.begin(), y.end());
    return value(d);
  }

  // Loss and gradient with respect to the attacked node's feature.
  double gradient(std::span<const double> y, std::vector<double>& g) {
    load(y);
    const LossGradient lg = loss_and_gradient(tensor_, model_, targets_, labels_, true);
    const double scale = static_cast<double>(targets_.size());
    const std::size_t w = y.size();
    g.assign(w, 0.0);
    for (std::size_t c = 0; c < w; ++c) g[c] = lg.input(t_.local, c) * scale;
    for (std::size_t i = 0; i < neighbors_.size(); ++i) {
      const auto& nb = *neighbors_[i];
      for (std::size_t c = 0; c < w; ++c) {
        if (nb.coupling[c] == 0.0 || clipped_[i][c]) continue;
        g[c] += nb.coupling[c] * lg.input(nb.local, mirror(c, w)) * scale;
      }
    }
    return lg.loss * scale;
  }

 private:
  void load(std::span<const double> y) {
    const auto x = t_.x();
    const std::size_t w = y.size();
    for (std::size_t c = 0; c < w; ++c) tensor_.features(t_.local, c) = y[c];
    clipped_.assign(neighbors_.size(), std::vector<std::uint8_t>(w, 0));
    for (std::size_t i = 0; i < neighbors_.size(); ++i) {
      const auto& nb = *neighbors_[i];
      const auto base = t_.graph.features.row(nb.local);
      for (std::size_t c = 0; c < w; ++c) {
        const std::size_t m = mirror(c, w);
        tensor_.features(nb.local, m) = base[m];
      }
      for (std::size_t c = 0; c < w; ++c) {
        if (nb.coupling[c] == 0.0) continue;
        const std::size_t m = mirror(c, w);
        tensor_.features(nb.local, m) += nb.coupling[c] * (y[c] - static_cast<double>(x[c]));
      }
      for (std::size_t c = 0; c < w; ++c) {
        const std::size_t m = mirror(c, w);
        if (nb.coupling[c] != 0.0 && tensor_.features(nb.local, m) < 0.0) {
          tensor_.features(nb.local, m) = 0.0;
          clipped_[i][c] = 1;
        }
      }
    }
  }

  const AttackTarget& t_;
  const Submodel& model_;
  GraphTensor tensor_;
  std::vector<std::uint32_t> targets_;
  std::vector<int> labels_;
  std::vector<const AttackNeighbor*> neighbors_;
  std::vector<std::vector<std::uint8_t>> clipped_;
};

AttackResult pgd_attack(const AttackTarget& target, const Submodel& model, AttackBudget budget,
                        const PgdOptions& opt, bool with_neighbors) {
  if (opt.steps <= 0) throw InvalidArgument("PGD needs at least one step");
  for (const auto& nb : target.neighbors) {
    if (nb.coupling.size() != target.graph.features.width || nb.local >= target.graph.nodes.size()) {
      throw ShapeMismatch("neighbor coupling does not fit the target graph");
    }
  }
  Objective obj(target, model, with_neighbors);
  const auto xs = target.x();
  AttackResult res;
  res.x.assign(xs.begin(), xs.end());
  res.x_hat = res.x;
  res.initial_objective = res.final_objective = obj.value(res.x);
  const auto r2 = feasible_radius2(xs, budget);
  if (!r2) {
    res.status = AttackStatus::kInfeasibleBudget;
    return res;
  }
  const double r = std::sqrt(*r2);
  const double rho = r * (1.0 - 1e-9);
  const double eta = r / opt.steps;
  const std::size_t w = xs.size();

  std::vector<double> cur(res.x.begin(), res.x.end());
  std::vector<double> best = cur;
  double best_f = res.initial_objective;
  std::vector<double> g;
  for (int s = 0; s < opt.steps; ++s) {
    const double f = obj.gradient(cur, g);
    if (f < best_f) {
      best_f = f;
      best = cur;
    }
    double gn = 0.0;
    for (double v : g) gn += v * v;
    gn = std::sqrt(gn);
    if (!(gn > 0.0) || !std::isfinite(gn)) break;
    double dn = 0.0;
    for (std::size_t c = 0; c < w; ++c) {
      cur[c] -= eta * g[c] / gn;
      const double d = cur[c] - xs[c];
      dn += d * d;
    }
    dn = std::sqrt(dn);
    if (dn > rho) {
      for (std::size_t c = 0; c < w; ++c) cur[c] = xs[c] + (cur[c] - xs[c]) * rho / dn;
    }
    // Clipping moves a coordinate toward x (x >= 0), so the ball still holds.
    dn = 0.0;
    for (std::size_t c = 0; c < w; ++c) {
      cur[c] = std::max(cur[c], 0.0);
      const double d = cur[c] - xs[c];
      dn += d * d;
    }
    res.max_step_ratio = std::max(res.max_step_ratio, std::sqrt(dn) / r);
  }
  const double f_last = obj.value(cur);
  if (f_last < best_f) {
    best_f = f_last;
    best = cur;
  }

  Point y = round_into_ball(best, xs, *r2);
  double fy = obj.value(y);
  if (fy > res.initial_objective) {
    y = res.x;
    fy = res.initial_objective;
  }
  polish(y, fy, xs, *r2, [&](const Point& p) { return obj.value(p); }, opt);
  res.x_hat = std::move(y);
  res.final_objective = fy;
  if (res.x_hat == res.x) res.status = AttackStatus::kNoImprovement;
  return res;
}

}  // namespace

const char* attack_status_name(AttackStatus s) {
  switch (s) {
    case AttackStatus::kOk: return "ok";
    case AttackStatus::kInfeasibleBudget: return "infeasible-budget";
    case AttackStatus::kNoImprovement: return "no-improvement";
  }
  return "?";
}

AttackResult attack_with_training_data(std::span<const std::uint32_t> x, int label,
                                       const FeatureSet& training, AttackBudget budget) {
  if (training.width != x.size()) throw ShapeMismatch("training features have another width");
  std::optional<std::size_t> nearest;
  double nearest_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < training.size(); ++i) {
    if (training.labels[i] != label) continue;
    const double d = dist2(training.row(i), x);
    if (d < nearest_d) {
      nearest_d = d;
      nearest = i;
    }
  }
  if (!nearest) throw EmptyClass("no benign training sample with label " + std::to_string(label));
  const auto b = training.row(*nearest);

  AttackResult res;
  res.x.assign(x.begin(), x.end());
  res.x_hat = res.x;
  res.nearest_row = nearest;
  res.initial_objective = res.final_objective = nearest_d;
  const auto r2 = feasible_radius2(x, budget);
  if (!r2) {
    res.status = AttackStatus::kInfeasibleBudget;
    return res;
  }
  if (nearest_d < *r2) {
    res.x_hat.assign(b.begin(), b.end());
    res.final_objective = 0.0;
    return res;
  }
  // Continuous optimum: the ball's boundary point on the segment x -> x_b.
  const double t = std::sqrt(*r2 / nearest_d);
  std::vector<double> p(x.size());
  for (std::size_t c = 0; c < x.size(); ++c) p[c] = x[c] + (static_cast<double>(b[c]) - x[c]) * t;
  Point y = round_into_ball(p, x, *r2);
  double fy = dist2(y, b);
  polish(y, fy, x, *r2, [&](const Point& q) { return dist2(q, b); }, PgdOptions{});
  res.x_hat = std::move(y);
  res.final_objective = fy;
  if (res.x_hat == res.x) res.status = AttackStatus::kNoImprovement;
  return res;
}

AttackTarget make_attack_target(const ProvenanceGraph& graph, const PreparedGraph& snapshot,
                                const TypeMaps& maps, NodeIndex v, int hops,
                                const std::unordered_set<NodeIndex>& benign) {
  const auto lv = snapshot.local(v);
  if (!lv) throw UnknownNode("#" + std::to_string(v) + " is not in the snapshot");
  const std::size_t w = snapshot.features.width;
  const std::size_t ne = w / 2;

  std::map<std::uint32_t, std::vector<double>> coupling;
  auto join = [&](NodeIndex u, EdgeIndex e, std::size_t offset) {
    if (u == v || !benign.count(u)) return;
    const auto lu = snapshot.local(u);
    const auto t = maps.edge_type(graph.edge_type(e));
    if (!lu || !t) return;
    auto& c = coupling[*lu];
    c.resize(w, 0.0);
    c[offset + *t] = 1.0;
  };
  for (EdgeIndex e : graph.in_edges(v)) join(graph.edge(e).src, e, 0);
  for (EdgeIndex e : graph.out_edges(v)) join(graph.edge(e).dst, e, ne);
  std::vector<std::size_t> sharers(w, 0);
  for (auto& [u, c] : coupling) {
    for (std::size_t s = 0; s < w; ++s) sharers[s] += c[s] > 0.0;
  }
  std::vector<std::uint32_t> seeds{*lv};
  for (auto& [u, c] : coupling) {
    for (std::size_t s = 0; s < w; ++s) {
      if (c[s] > 0.0) c[s] = 1.0 / static_cast<double>(sharers[s]);
    }
    seeds.push_back(u);
  }
  std::sort(seeds.begin(), seeds.end());
  const auto keep = local_in_closure(snapshot, seeds, hops);

  AttackTarget t;
  t.graph = restrict_graph(snapshot, keep);
  auto pos = [&](std::uint32_t l) {
    return static_cast<std::uint32_t>(std::lower_bound(keep.begin(), keep.end(), l) - keep.begin());
  };
  t.local = pos(*lv);
  for (auto& [u, c] : coupling) t.neighbors.push_back(AttackNeighbor{pos(u), std::move(c)});
  return t;
}

AttackResult attack_with_model(const AttackTarget& target, const Submodel& model,
                               AttackBudget budget, const PgdOptions& options) {
  return pgd_attack(target, model, budget, options, false);
}

AttackResult attack_with_neighbors(const AttackTarget& target, const Submodel& model,
                                   AttackBudget budget, const PgdOptions& options) {
  AttackResult joint = pgd_attack(target, model, budget, options, true);
  if (target.neighbors.empty() || joint.status == AttackStatus::kInfeasibleBudget) return joint;
  // Second start from the node-only optimum; keep whichever joint loss is lower.
  const AttackResult alone = pgd_attack(target, model, budget, options, false);
  const double f = attack_objective(target, model, alone.x_hat, true);
  if (f < joint.final_objective) {
    joint.x_hat = alone.x_hat;
    joint.final_objective = f;
    joint.max_step_ratio = std::max(joint.max_step_ratio, alone.max_step_ratio);
    joint.status = joint.x_hat == joint.x ? AttackStatus::kNoImprovement : AttackStatus::kOk;
  }
  return joint;
}

double attack_objective(const AttackTarget& target, const Submodel& model,
                        std::span<const std::uint32_t> x_hat, bool with_neighbors) {
  Objective obj(target, model, with_neighbors);
  return obj.value(Point(x_hat.begin(), x_hat.end()));
}

PeerRules PeerRules::infer(std::span<const ProvenanceGraph* const> graphs) {
  std::map<std::string, std::map<std::string, std::size_t>> dst_hist, src_hist;
  for (const auto* g : graphs) {
    for (EdgeIndex e = 0; e < g->edge_count(); ++e) {
      const Edge& ed = g->edge(e);
      ++dst_hist[g->edge_type(e)][g->node_type(ed.dst)];
      ++src_hist[g->edge_type(e)][g->node_type(ed.src)];
    }
  }
  auto top = [](const std::map<std::string, std::size_t>& h) {
    std::string best;
    std::size_t n = 0;
    for (const auto& [k, c] : h) {
      if (c > n) {
        n = c;
        best = k;
      }
    }
    return best;
  };
  PeerRules rules;
  for (const auto& [t, h] : dst_hist) rules.out_peer_type[t] = top(h);
  for (const auto& [t, h] : src_hist) rules.in_peer_type[t] = top(h);
  return rules;
}

PeerPool::PeerPool(PeerRules rules, const ProvenanceGraph& graph) : rules_(std::move(rules)) {
  if (rules_.pool_size == 0) throw InvalidArgument("peer pool must not be empty");
  for (NodeIndex v = 0; v < graph.node_count(); ++v) taken_ids_.insert(graph.node_id(v));
}

PeerPool::Peer PeerPool::next(const std::string& edge_type, bool out_slot) {
  const auto& table = out_slot ? rules_.out_peer_type : rules_.in_peer_type;
  auto it = table.find(edge_type);
  if (it == table.end()) {
    throw InvalidArgument("no peer type rule for edge type '" + edge_type + "'");
  }
  const std::string& type = it->second;
  const std::size_t k = cursor_[{type, out_slot}]++ % rules_.pool_size;
  auto key = std::make_tuple(type, out_slot, k);
  auto found = ids_.find(key);
  if (found == ids_.end()) {
    std::string id = rules_.prefix + ":" + type + ":" + (out_slot ? "o" : "i") + std::to_string(k);
    while (taken_ids_.count(id)) id += "'";
    taken_ids_.insert(id);
    found = ids_.emplace(key, id).first;
  }
  return Peer{found->second, type};
}

std::vector<EdgeEdit> realize_perturbation(const ProvenanceGraph& graph, NodeIndex node,
                                           std::span<const std::uint32_t> x,
                                           std::span<const std::uint32_t> x_hat,
                                           const TypeMaps& maps, PeerPool& peers,
                                           std::unordered_set<EdgeIndex>* reserved) {
  const std::size_t w = maps.feature_width();
  const std::size_t ne = maps.n_edge_types();
  if (x.size() != w || x_hat.size() != w) throw ShapeMismatch("feature width does not match the maps");
  if (node >= graph.node_count()) throw UnknownNode("#" + std::to_string(node));
  std::int64_t ts = 0;
  for (const auto& e : graph.edges()) ts = std::max(ts, e.timestamp + 1);

  std::vector<EdgeEdit> edits;
  std::unordered_set<EdgeIndex> local_reserved;
  auto& taken = reserved ? *reserved : local_reserved;
  for (std::size_t c = 0; c < w; ++c) {
    const bool out_slot = c >= ne;
    const std::string& type = maps.edge_types()[out_slot ? c - ne : c];
    if (x_hat[c] > x[c]) {
      for (std::uint32_t k = 0; k < x_hat[c] - x[c]; ++k) {
        const auto peer = peers.next(type, out_slot);
        EdgeEdit ed;
        ed.kind = EdgeEdit::Kind::kAdd;
        ed.added = out_slot ? EdgeRecord{graph.node_id(node), graph.node_type(node), peer.id,
                                         peer.type, type, ts}
                            : EdgeRecord{peer.id, peer.type, graph.node_id(node),
                                         graph.node_type(node), type, ts};
        edits.push_back(std::move(ed));
      }
    } else if (x_hat[c] < x[c]) {
      const std::uint32_t need = x[c] - x_hat[c];
      const auto list = out_slot ? graph.out_edges(node) : graph.in_edges(node);
      std::uint32_t got = 0;
      for (auto it = list.rbegin(); it != list.rend() && got < need; ++it) {
        const Edge& e = graph.edge(*it);
        if (e.src == e.dst || taken.count(*it) || graph.edge_type(*it) != type) continue;
        taken.insert(*it);
        EdgeEdit ed;
        ed.kind = EdgeEdit::Kind::kRemove;
        ed.removed = *it;
        edits.push_back(std::move(ed));
        ++got;
      }
      if (got < need) {
        throw NegativeCount("node " + graph.node_id(node) + " has " + std::to_string(got) +
                            " removable " + (out_slot ? "out" : "in") + "-edges of type '" +
                            type + "', " + std::to_string(need) + " requested");
      }
    }
  }
  return edits;
}

ProvenanceGraph apply_edits(const ProvenanceGraph& graph, std::span<const EdgeEdit> edits) {
  std::unordered_set<EdgeIndex> removed;
  for (const auto& e : edits) {
    if (e.kind == EdgeEdit::Kind::kRemove) removed.insert(e.removed);
  }
  std::vector<EdgeIndex> keep;
  keep.reserve(graph.edge_count());
  for (EdgeIndex e = 0; e < graph.edge_count(); ++e) {
    if (!removed.count(e)) keep.push_back(e);
  }
  ProvenanceGraph out = graph.with_edges(keep);
  for (const auto& e : edits) {
    if (e.kind == EdgeEdit::Kind::kAdd) out.add_edge(e.added);
  }
  return out;
}

const char* attack_kind_name(AttackKind k) {
  switch (k) {
    case AttackKind::kTrainingData: return "train-data";
    case AttackKind::kModel: return "model";
    case AttackKind::kModelNeighbors: return "model+neighbors";
  }
  return "?";
}

std::optional<AttackKind> parse_attack_kind(std::string_view name) {
  for (auto k : {AttackKind::kTrainingData, AttackKind::kModel, AttackKind::kModelNeighbors}) {
    if (name == attack_kind_name(k)) return k;
  }
  return std::nullopt;
}

FeatureSet training_feature_bank(std::span<const ProvenanceGraph* const> graphs,
                                 const TypeMaps& maps) {
  FeatureSet bank;
  bank.width = maps.feature_width();
  for (const auto* g : graphs) {
    const FeatureSet f = extract_features(*g, maps, UnknownTypePolicy::kFlagAnomalous);
    bank.nodes.insert(bank.nodes.end(), f.nodes.begin(), f.nodes.end());
    bank.labels.insert(bank.labels.end(), f.labels.begin(), f.labels.end());
    bank.counts.insert(bank.counts.end(), f.counts.begin(), f.counts.end());
    bank.unknown.insert(bank.unknown.end(), f.unknown.begin(), f.unknown.end());
  }
  return bank;
}

DetectionResult detect_whole_graph(const ProvenanceGraph& graph, const Ensemble& ensemble,
                                   PreparedGraph* prepared) {
  std::vector<NodeIndex> all(graph.node_count());
  for (NodeIndex v = 0; v < all.size(); ++v) all[v] = v;
  const Subgraph sub = make_subgraph(graph, all, 0);
  PreparedGraph pg = prepare_graph(graph, sub, ensemble.maps());
  DetectionResult r = detect_prepared(pg, all, ensemble);
  if (prepared) *prepared = std::move(pg);
  return r;
}

nlohmann::json NodeAttackTrace::to_json() const {
  nlohmann::json j{{"graph", graph},
                   {"node_id", node_id},
                   {"attack_kind", attack_kind_name(kind)},
                   {"delta_a", delta_a},
                   {"status", attack_status_name(result.status)},
                   {"x", result.x},
                   {"x_hat", result.x_hat},
                   {"initial_objective", result.initial_objective},
                   {"final_objective", result.final_objective},
                   {"edits", edits},
                   {"evaded", evaded}};
  return j;
}

void EvasionReport::write_csv(std::ostream& out) const {
  out << "delta_a,attack_kind,FNR,FPR,precision,recall\n";
  char buf[32];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%g", r.delta_a);
    out << buf << ',' << attack_kind_name(r.kind) << ',' << format_metric(r.metrics.fnr) << ','
        << format_metric(r.metrics.fpr) << ',' << format_metric(r.metrics.precision) << ','
        << format_metric(r.metrics.recall) << '\n';
  }
}

nlohmann::json EvasionReport::traces_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& t : traces) j.push_back(t.to_json());
  return j;
}

namespace {

ConfusionCounts strict_counts(std::size_t n_original, const std::unordered_set<NodeIndex>& anomalous,
                              const DetectionResult& det) {
  std::vector<std::uint8_t> flagged(n_original, 0);
  for (NodeIndex v : det.anomalous) {
    if (v < n_original) flagged[v] = 1;
  }
  ConfusionCounts c;
  for (NodeIndex v = 0; v < n_original; ++v) {
    const bool a = anomalous.count(v) > 0;
    if (a) ++(flagged[v] ? c.tp : c.fn);
    else ++(flagged[v] ? c.fp : c.tn);
  }
  return c;
}

struct CaseState {
  PreparedGraph prepared;
  DetectionResult baseline;
  std::vector<NodeIndex> targets;
  std::unordered_set<NodeIndex> benign;
};

}  // namespace

EvasionReport evaluate_evasion(const Ensemble& ensemble, std::span<const EvasionCase> cases,
                               const FeatureSet& training, const EvasionConfig& config) {
  if (ensemble.count() == 0) throw InvalidArgument("evasion needs a trained ensemble");
  if (config.submodel >= ensemble.count()) throw InvalidArgument("submodel index out of range");
  const Submodel& model = ensemble.submodels()[config.submodel];
  EvasionReport report;

  std::vector<CaseState> states(cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) {
    auto& st = states[i];
    st.baseline = detect_whole_graph(cases[i].graph, ensemble, &st.prepared);
    report.baseline += strict_counts(cases[i].graph.node_count(), cases[i].anomalous, st.baseline);
    st.benign.insert(st.baseline.benign.begin(), st.baseline.benign.end());
    for (NodeIndex v : st.baseline.anomalous) {
      const auto l = st.prepared.local(v);
      if (cases[i].anomalous.count(v) && l && st.prepared.labels[*l] >= 0) st.targets.push_back(v);
    }
  }
  report.baseline_metrics = compute_metrics(report.baseline);

  for (AttackKind kind : config.kinds) {
    for (double delta : config.deltas) {
      EvasionRow row;
      row.delta_a = delta;
      row.kind = kind;
      for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& cs = cases[i];
        const auto& st = states[i];
        PeerPool peers(config.peers, cs.graph);
        std::unordered_set<EdgeIndex> reserved;
        std::vector<EdgeEdit> edits;
        const std::size_t first_trace = report.traces.size();
        for (NodeIndex v : st.targets) {
          const auto l = *st.prepared.local(v);
          NodeAttackTrace tr;
          tr.graph = cs.name;
          tr.node_id = cs.graph.node_id(v);
          tr.kind = kind;
          tr.delta_a = delta;
          if (kind == AttackKind::kTrainingData) {
            tr.result = attack_with_training_data(st.prepared.features.row(l), st.prepared.labels[l],
                                                  training, AttackBudget{delta});
          } else {
            const auto target = make_attack_target(
                cs.graph, st.prepared, ensemble.maps(), v, model.hops(),
                kind == AttackKind::kModelNeighbors ? st.benign : std::unordered_set<NodeIndex>{});
            tr.result = kind == AttackKind::kModel
                            ? attack_with_model(target, model, AttackBudget{delta}, config.pgd)
                            : attack_with_neighbors(target, model, AttackBudget{delta}, config.pgd);
          }
          auto e = realize_perturbation(cs.graph, v, tr.result.x, tr.result.x_hat, ensemble.maps(),
                                        peers, &reserved);
          tr.edits = e.size();
          edits.insert(edits.end(), std::make_move_iterator(e.begin()),
                       std::make_move_iterator(e.end()));
          ++row.attacked;
          row.infeasible += tr.result.status == AttackStatus::kInfeasibleBudget;
          row.no_improvement += tr.result.status == AttackStatus::kNoImprovement;
          report.traces.push_back(std::move(tr));
        }
        const DetectionResult after =
            edits.empty() ? st.baseline : detect_whole_graph(apply_edits(cs.graph, edits), ensemble);
        row.counts += strict_counts(cs.graph.node_count(), cs.anomalous, after);
        std::unordered_set<NodeIndex> flagged(after.anomalous.begin(), after.anomalous.end());
        for (std::size_t t = first_trace; t < report.traces.size(); ++t) {
          auto& tr = report.traces[t];
          tr.evaded = !flagged.count(cs.graph.index_of(tr.node_id));
          row.evaded += tr.evaded;
        }
      }
      row.metrics = compute_metrics(row.counts);
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

}  // namespace provsage
