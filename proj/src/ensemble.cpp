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

#include "provsage/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

#include "provsage/binary_io.hpp"
#include "provsage/error.hpp"
#include "provsage/rng.hpp"

namespace provsage {

namespace {

constexpr char kMagic[5] = "PSEN";

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  return derive_seed(h, v);
}

// Weisfeiler-Lehman style colors that are blind to exactly what the model
// cannot see. The mean aggregator loses neighbor multiplicities, so multisets
// are compared after dividing by their gcd ({a, a, b, b} == {a, b}). With more
// than one hop the first layer is bias-free and row-normalized, so its input
// [x_v, mean x_u] only matters up to positive scale.
std::vector<std::uint64_t> mean_blind_signatures(const PreparedGraph& g, int hops) {
  const std::size_t n = g.nodes.size();
  const std::size_t w = g.features.width;
  std::vector<std::vector<std::uint32_t>> in(n);
  for (const auto& e : g.edges) in[e.dst].push_back(e.src);

  std::vector<std::uint64_t> sig(n);
  std::vector<std::uint64_t> c(2 * w + 1);
  for (std::size_t v = 0; v < n; ++v) {
    const std::uint64_t d = std::max<std::size_t>(in[v].size(), 1);
    std::fill(c.begin(), c.end(), 0);
    const auto xv = g.features.row(v);
    for (std::size_t j = 0; j < w; ++j) c[j] = d * xv[j];
    for (auto u : in[v]) {
      const auto xu = g.features.row(u);
      for (std::size_t j = 0; j < w; ++j) c[w + j] += xu[j];
    }
    // Single hop: raw scores, scale matters; keep the degree to pin the mean.
    c[2 * w] = hops > 1 ? 0 : d;
    std::uint64_t gc = 0;
    for (auto a : c) gc = std::gcd(gc, a);
    std::uint64_t h = 0x51;
    for (auto a : c) h = mix(h, gc ? a / gc : 0);
    sig[v] = h;
  }

  std::vector<std::uint64_t> next(n);
  std::vector<std::uint64_t> neigh;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> runs;
  for (int k = 1; k < hops; ++k) {
    for (std::size_t v = 0; v < n; ++v) {
      neigh.clear();
      for (auto u : in[v]) neigh.push_back(sig[u]);
      std::sort(neigh.begin(), neigh.end());
      runs.clear();
      for (auto s : neigh) {
        if (!runs.empty() && runs.back().first == s) {
          ++runs.back().second;
        } else {
          runs.emplace_back(s, 1);
        }
      }
      std::uint64_t g_all = 0;
      for (const auto& r : runs) g_all = std::gcd(g_all, r.second);
      std::uint64_t h = mix(sig[v], 0xa6);
      for (const auto& r : runs) h = mix(mix(h, r.first), r.second / g_all);
      next[v] = h;
    }
    sig.swap(next);
  }
  return sig;
}

void check_fits(const TypeMaps& maps, const Submodel& m) {
  if (m.maps_fingerprint() != maps.fingerprint()) {
    throw ShapeMismatch("submodel was trained against different type maps");
  }
  if (static_cast<std::size_t>(m.input_width()) != maps.feature_width() ||
      static_cast<std::size_t>(m.n_classes()) != maps.n_node_types()) {
    throw ShapeMismatch("submodel shape does not match the type maps");
  }
}

Eigen::MatrixXd probabilities(const PreparedGraph& g, const Submodel& m) {
  return softmax_rows(forward_propagate(g.tensor, m));
}

Confidence confidence_of(const Eigen::MatrixXd& p, std::uint32_t row, int label,
                         double r) {
  const Eigen::VectorXd v = p.row(row).transpose();
  return assess_confidence(std::span<const double>(v.data(), v.size()), label, r);
}

}  // namespace

std::optional<std::uint32_t> PreparedGraph::local(NodeIndex v) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), v);
  if (it == nodes.end() || *it != v) return std::nullopt;
  return static_cast<std::uint32_t>(it - nodes.begin());
}

PreparedGraph prepare_graph(const ProvenanceGraph& graph, const Subgraph& subgraph,
                            const TypeMaps& maps, const FeatureOptions& options) {
  PreparedGraph pg;
  const auto members = subgraph.members();
  pg.features = options.source == FeatureSource::kSubgraphLocal
                    ? extract_features(graph, members, subgraph.edges, maps, options.unknown)
                    : whole_history_features(graph, members, maps, options.unknown);
  pg.nodes = pg.features.nodes;
  pg.labels = pg.features.labels;
  pg.unknown = pg.features.unknown;
  pg.edges.reserve(subgraph.edges.size());
  for (EdgeIndex e : subgraph.edges) {
    const Edge& ed = graph.edge(e);
    auto s = pg.local(ed.src);
    auto d = pg.local(ed.dst);
    if (s && d) pg.edges.push_back(LocalEdge{*s, *d});
  }
  const std::size_t n = pg.nodes.size();
  const std::size_t w = pg.features.width;
  Eigen::MatrixXd x(n, w);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = pg.features.row(i);
    for (std::size_t j = 0; j < w; ++j) x(i, j) = row[j];
  }
  pg.tensor = make_graph_tensor(n, pg.edges, std::move(x));
  return pg;
}

PreparedGraph restrict_graph(const PreparedGraph& source,
                             std::span<const std::uint32_t> keep) {
  constexpr std::uint32_t kOut = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> remap(source.nodes.size(), kOut);
  PreparedGraph pg;
  const std::size_t w = source.features.width;
  pg.features.width = w;
  std::vector<std::uint32_t> kept;
  for (std::uint32_t l : keep) {
    if (remap[l] != kOut) continue;
    kept.push_back(l);
    remap[l] = static_cast<std::uint32_t>(pg.nodes.size());
    pg.nodes.push_back(source.nodes[l]);
    pg.labels.push_back(source.labels[l]);
    pg.unknown.push_back(source.unknown[l]);
    const auto row = source.features.row(l);
    pg.features.counts.insert(pg.features.counts.end(), row.begin(), row.end());
  }
  if (!std::is_sorted(pg.nodes.begin(), pg.nodes.end())) {
    throw InvalidArgument("restriction indices must be ascending");
  }
  pg.features.nodes = pg.nodes;
  pg.features.labels = pg.labels;
  pg.features.unknown = pg.unknown;
  for (const auto& e : source.edges) {
    if (remap[e.src] != kOut && remap[e.dst] != kOut) {
      pg.edges.push_back(LocalEdge{remap[e.src], remap[e.dst]});
    }
  }
  const std::size_t n = pg.nodes.size();
  Eigen::MatrixXd x(n, w);
  for (std::size_t i = 0; i < n; ++i) x.row(i) = source.tensor.features.row(kept[i]);
  pg.tensor = make_graph_tensor(n, pg.edges, std::move(x));
  return pg;
}

std::vector<std::uint32_t> local_in_closure(const PreparedGraph& graph,
                                            std::span<const std::uint32_t> seeds,
                                            int hops) {
  const std::size_t n = graph.nodes.size();
  std::vector<std::vector<std::uint32_t>> in(n);
  for (const auto& e : graph.edges) in[e.dst].push_back(e.src);
  std::vector<std::uint8_t> seen(n, 0);
  std::vector<std::uint32_t> frontier;
  for (auto s : seeds) {
    if (!seen[s]) {
      seen[s] = 1;
      frontier.push_back(s);
    }
  }
  std::vector<std::uint32_t> next;
  for (int h = 0; h < hops && !frontier.empty(); ++h) {
    next.clear();
    for (auto v : frontier) {
      for (auto u : in[v]) {
        if (!seen[u]) {
          seen[u] = 1;
          next.push_back(u);
        }
      }
    }
    frontier.swap(next);
  }
  std::vector<std::uint32_t> out;
  for (std::uint32_t v = 0; v < n; ++v) {
    if (seen[v]) out.push_back(v);
  }
  return out;
}

void Ensemble::append(Submodel model) {
  check_fits(maps_, model);
  submodels_.push_back(std::move(model));
}

void Ensemble::reorder(std::span<const std::size_t> order) {
  if (order.size() != submodels_.size()) throw InvalidArgument("order is not a permutation");
  std::vector<std::uint8_t> used(order.size(), 0);
  std::vector<Submodel> out;
  out.reserve(order.size());
  for (std::size_t i : order) {
    if (i >= order.size() || used[i]) throw InvalidArgument("order is not a permutation");
    used[i] = 1;
    out.push_back(submodels_[i]);
  }
  submodels_ = std::move(out);
}

void Ensemble::write(std::ostream& out) const {
  using namespace binary;
  put_magic(out, kMagic);
  put_u32(out, kFormatVersion);
  put_f64(out, ratio_threshold_);
  put_u32(out, static_cast<std::uint32_t>(maps_.n_node_types()));
  for (const auto& t : maps_.node_types()) put_string(out, t);
  put_u32(out, static_cast<std::uint32_t>(maps_.n_edge_types()));
  for (const auto& t : maps_.edge_types()) put_string(out, t);
  put_u32(out, static_cast<std::uint32_t>(submodels_.size()));
  for (const auto& m : submodels_) m.write(out);
}

Ensemble Ensemble::read(std::istream& in) {
  using namespace binary;
  expect_magic(in, kMagic);
  if (get_u32(in) != kFormatVersion) throw FormatError("unsupported ensemble version");
  const double r = get_f64(in);
  if (!(r >= 1.0) || !std::isfinite(r)) throw FormatError("bad ratio threshold in model");
  auto read_names = [&in] {
    const std::uint32_t n = get_u32(in);
    if (n > (1u << 20)) throw FormatError("bad type map size");
    std::vector<std::string> names;
    for (std::uint32_t i = 0; i < n; ++i) names.push_back(get_string(in));
    return names;
  };
  auto node_types = read_names();
  auto edge_types = read_names();
  TypeMaps maps;
  try {
    maps = TypeMaps(std::move(node_types), std::move(edge_types));
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what());
  }
  Ensemble ens(std::move(maps), r);
  const std::uint32_t count = get_u32(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    Submodel m = Submodel::read(in);
    try {
      ens.append(std::move(m));
    } catch (const ShapeMismatch& e) {
      throw FormatError(std::string("submodel ") + std::to_string(i) + ": " + e.what());
    }
  }
  return ens;
}

void Ensemble::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write model file " + path);
  write(out);
  out.flush();
  if (!out) throw IoError("failed writing model file " + path);
}

Ensemble Ensemble::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file " + path);
  return read(in);
}

nlohmann::json TrainingReport::to_json() const {
  nlohmann::json j;
  j["submodel_count"] = submodel_count;
  j["graphs_trained"] = graphs_trained;
  j["graphs_skipped"] = graphs_skipped;
  auto& subs = j["subgraphs"] = nlohmann::json::array();
  for (const auto& s : subgraphs) {
    nlohmann::json o;
    o["graph_index"] = s.graph_index;
    o["active"] = s.active;
    o["uncovered_after_prefilter"] = s.uncovered_after_prefilter;
    o["remaining_after_submodel"] = s.remaining_after_submodel;
    o["submodels_added"] = s.submodels_added;
    auto& un = o["unlearnable"] = nlohmann::json::array();
    for (const auto& u : s.unlearnable) {
      un.push_back({{"node", u.node_id}, {"label", u.label}, {"cause", u.cause}});
    }
    subs.push_back(std::move(o));
  }
  return j;
}

std::vector<int> first_accepting_submodel(const PreparedGraph& prepared,
                                          std::span<const std::uint32_t> nodes,
                                          const Ensemble& ensemble) {
  std::vector<int> first(nodes.size(), -1);
  std::vector<std::size_t> pending(nodes.size());
  std::iota(pending.begin(), pending.end(), std::size_t{0});
  const double r = ensemble.ratio_threshold();
  for (std::size_t k = 0; k < ensemble.count() && !pending.empty(); ++k) {
    const Eigen::MatrixXd p = probabilities(prepared, ensemble.submodels()[k]);
    std::vector<std::size_t> still;
    for (std::size_t i : pending) {
      const auto v = nodes[i];
      const int label = prepared.labels[v];
      if (label >= 0 && !prepared.unknown[v] && confidence_of(p, v, label, r).accepted) {
        first[i] = static_cast<int>(k);
      } else {
        still.push_back(i);
      }
    }
    pending.swap(still);
  }
  return first;
}

Ensemble train_ensemble(const ProvenanceGraph& graph, const Subgraph& subgraph,
                        Ensemble ensemble, const EnsembleConfig& config,
                        TrainingReport* report, std::size_t graph_index,
                        std::size_t subgraph_index) {
  const TypeMaps& maps = ensemble.maps();
  if (maps.n_edge_types() == 0) {
    throw InvalidArgument("no edge types to build features from");
  }
  if (config.stall_limit < 1) throw InvalidArgument("stall limit must be >= 1");
  SubgraphTrainingReport rep;
  rep.graph_index = graph_index;
  rep.active = subgraph.active.size();

  const PreparedGraph pg = prepare_graph(graph, subgraph, maps, config.features);
  std::vector<std::uint32_t> x;
  for (NodeIndex v : subgraph.active) {
    const auto l = *pg.local(v);
    if (pg.labels[l] >= 0 && !pg.unknown[l]) x.push_back(l);
  }
  if (ensemble.count() > 0 && !x.empty()) {
    const auto first = first_accepting_submodel(pg, x, ensemble);
    std::vector<std::uint32_t> kept;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (first[i] < 0) kept.push_back(x[i]);
    }
    x.swap(kept);
  }
  rep.uncovered_after_prefilter = x.size();

  const int n_classes = static_cast<int>(maps.n_node_types());
  const std::uint64_t base = derive_seed(config.seed, (graph_index << 24) ^ subgraph_index);
  int stalls = 0;
  std::uint64_t attempt = 0;
  // Labeled active nodes, for drawing contrast samples.
  std::vector<std::vector<std::uint32_t>> by_class(n_classes);
  for (NodeIndex v : subgraph.active) {
    const auto l = *pg.local(v);
    if (pg.labels[l] >= 0 && !pg.unknown[l]) by_class[pg.labels[l]].push_back(l);
  }
  while (!x.empty()) {
    TrainConfig tc = config.train;
    tc.seed = derive_seed(base, attempt++);
    // A retry after a stall also gets twice the epochs of the one before.
    tc.epochs = config.train.epochs << std::min(stalls, 8);
    std::vector<std::uint32_t> fit = x;
    if (config.contrast_per_class > 0 && x.size() < rep.active) {
      // Already covered nodes of every class keep the residual model from
      // collapsing onto the residual's own labels.
      std::vector<std::uint8_t> in_x(pg.nodes.size(), 0);
      for (auto l : x) in_x[l] = 1;
      Rng rng(derive_seed(tc.seed, 0xc0));
      for (const auto& members : by_class) {
        std::vector<std::uint32_t> covered;
        for (auto l : members) {
          if (!in_x[l]) covered.push_back(l);
        }
        rng.shuffle(covered);
        if (covered.size() > config.contrast_per_class) covered.resize(config.contrast_per_class);
        fit.insert(fit.end(), covered.begin(), covered.end());
      }
    }
    // Only the K-hop in-neighborhood of the fitted nodes affects their outputs.
    const auto keep = local_in_closure(pg, fit, config.train.hops);
    const PreparedGraph sub = restrict_graph(pg, keep);
    std::vector<std::uint32_t> targets;
    std::vector<int> labels;
    targets.reserve(fit.size());
    for (auto l : fit) {
      const auto t = static_cast<std::uint32_t>(
          std::lower_bound(keep.begin(), keep.end(), l) - keep.begin());
      targets.push_back(t);
      labels.push_back(pg.labels[l]);
    }
    Submodel model = train_submodel(sub.tensor, targets, labels, n_classes, tc,
                                    maps.fingerprint());
    const Eigen::MatrixXd p = probabilities(sub, model);
    std::vector<std::uint32_t> rest;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!confidence_of(p, targets[i], labels[i], config.ratio_threshold).accepted) {
        rest.push_back(x[i]);
      }
    }
    if (rest.size() < x.size()) {
      ensemble.append(std::move(model));
      ++rep.submodels_added;
      stalls = 0;
    } else {
      ++stalls;
    }
    x.swap(rest);
    rep.remaining_after_submodel.push_back(x.size());
    if (!x.empty() && stalls >= config.stall_limit) {
      const auto sig = mean_blind_signatures(pg, config.train.hops);
      std::unordered_map<std::uint64_t, std::vector<int>> labels_by_sig;
      for (NodeIndex v : subgraph.active) {
        const auto l = *pg.local(v);
        if (pg.labels[l] >= 0) labels_by_sig[sig[l]].push_back(pg.labels[l]);
      }
      for (auto l : x) {
        const auto& seen = labels_by_sig[sig[l]];
        const bool collision = std::any_of(seen.begin(), seen.end(),
                                           [&](int c) { return c != pg.labels[l]; });
        rep.unlearnable.push_back(UnlearnableNode{
            pg.nodes[l], graph.node_id(pg.nodes[l]), pg.labels[l],
            collision ? "feature-collision" : "not separable within stall limit"});
      }
      break;
    }
  }
  if (report) {
    report->subgraphs.push_back(std::move(rep));
    report->submodel_count = ensemble.count();
  }
  return ensemble;
}

Ensemble extend_on_graph_sequence(Ensemble ensemble,
                                  std::span<const ProvenanceGraph* const> graphs,
                                  const EnsembleConfig& config, TrainingReport* report) {
  ensemble.set_ratio_threshold(config.ratio_threshold);
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const ProvenanceGraph& g = *graphs[gi];
    const std::size_t before = ensemble.count();
    if (g.node_count() > 0) {
      const auto subs = build_training_subgraphs(g, config.split_size,
                                                 derive_seed(config.seed, 0x5b17 + gi));
      for (std::size_t si = 0; si < subs.size(); ++si) {
        ensemble = train_ensemble(g, subs[si], std::move(ensemble), config, report, gi, si);
      }
    }
    if (report) {
      (ensemble.count() > before ? report->graphs_trained : report->graphs_skipped)
          .push_back(gi);
      report->submodel_count = ensemble.count();
    }
  }
  return ensemble;
}

Ensemble train_on_graph_sequence(std::span<const ProvenanceGraph* const> graphs,
                                 const EnsembleConfig& config, TrainingReport* report) {
  if (config.ratio_threshold < 1.0) throw InvalidArgument("ratio threshold must be >= 1");
  Ensemble ensemble(build_type_maps(graphs), config.ratio_threshold);
  return extend_on_graph_sequence(std::move(ensemble), graphs, config, report);
}

const NodeDiagnostics* DetectionResult::diagnostics_for(NodeIndex v) const {
  auto it = std::lower_bound(anomalous.begin(), anomalous.end(), v);
  if (it == anomalous.end() || *it != v) return nullptr;
  return &diagnostics[it - anomalous.begin()];
}

DetectionResult detect_prepared(const PreparedGraph& prepared,
                                std::span<const NodeIndex> candidates,
                                const Ensemble& ensemble) {
  std::vector<NodeIndex> cand(candidates.begin(), candidates.end());
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

  std::map<NodeIndex, NodeDiagnostics> rejected;
  std::vector<std::uint32_t> pending;  // local indices still unaccepted
  DetectionResult result;
  for (NodeIndex v : cand) {
    const auto l = prepared.local(v);
    if (!l) continue;
    NodeDiagnostics d;
    d.node = v;
    d.label = prepared.labels[*l];
    d.unknown_type = prepared.unknown[*l] || d.label < 0;
    rejected.emplace(v, std::move(d));
    if (!prepared.unknown[*l] && prepared.labels[*l] >= 0) pending.push_back(*l);
  }
  const double r = ensemble.ratio_threshold();
  for (std::size_t k = 0; k < ensemble.count() && !pending.empty(); ++k) {
    const Eigen::MatrixXd p = probabilities(prepared, ensemble.submodels()[k]);
    std::vector<std::uint32_t> still;
    for (auto l : pending) {
      const NodeIndex v = prepared.nodes[l];
      const Eigen::VectorXd row = p.row(l).transpose();
      const std::span<const double> probs(row.data(), row.size());
      const Confidence c = assess_confidence(probs, prepared.labels[l], r);
      if (c.accepted) {
        rejected.erase(v);
        result.benign.push_back(v);
      } else {
        const int label = prepared.labels[l];
        double other = 0.0;
        for (std::size_t j = 0; j < probs.size(); ++j) {
          if (static_cast<int>(j) != label) other = std::max(other, probs[j]);
        }
        const double margin = other > 0 ? std::log(probs[label]) - std::log(other)
                                        : std::numeric_limits<double>::infinity();
        rejected[v].per_submodel.push_back(SubmodelVerdict{
            c, std::vector<double>(probs.begin(), probs.end()), margin});
        still.push_back(l);
      }
    }
    pending.swap(still);
  }
  std::sort(result.benign.begin(), result.benign.end());
  for (auto& [v, d] : rejected) {
    double best_score = -std::numeric_limits<double>::infinity();
    for (const auto& s : d.per_submodel) {
      if (s.margin > best_score) {
        best_score = s.margin;
        d.best_class = s.confidence.best;
        d.best_ratio = s.confidence.ratio;
      }
    }
    result.anomalous.push_back(v);
    result.diagnostics.push_back(std::move(d));
  }
  return result;
}

DetectionResult detect(const ProvenanceGraph& graph, const Subgraph& subgraph,
                       std::span<const NodeIndex> candidates, const Ensemble& ensemble,
                       const FeatureOptions& options) {
  const PreparedGraph pg = prepare_graph(graph, subgraph, ensemble.maps(), options);
  return detect_prepared(pg, candidates, ensemble);
}

}  // namespace provsage
