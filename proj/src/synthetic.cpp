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

#include "provsage/synthetic.hpp"

#include <algorithm>
#include <optional>

#include "provsage/error.hpp"
#include "provsage/rng.hpp"

namespace provsage::synthetic {

namespace {

class Builder {
 public:
  Builder(ProvenanceGraph& g, std::string prefix) : g_(g), prefix_(std::move(prefix)) {}

  NodeIndex node(const std::string& type) {
    return g_.add_node(prefix_ + std::to_string(next_id_++), type);
  }
  NodeIndex named(const std::string& name, const std::string& type) {
    return g_.add_node(prefix_ + name, type);
  }
  void edge(NodeIndex s, NodeIndex d, const std::string& type, std::uint32_t times = 1) {
    for (std::uint32_t i = 0; i < times; ++i) {
      g_.add_edge(s, d, type, static_cast<std::int64_t>(g_.edge_count()));
    }
  }

 private:
  ProvenanceGraph& g_;
  std::string prefix_;
  std::size_t next_id_ = 0;
};

std::uint32_t between(Rng& rng, std::uint32_t lo, std::uint32_t hi) {
  return lo + static_cast<std::uint32_t>(rng.below(hi - lo + 1));
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[rng.below(v.size())];
}

}  // namespace

TwoRoleGraph make_two_role_graph(std::uint64_t seed, const TwoRoleSpec& spec,
                                 const std::string& prefix) {
  if (spec.shells == 0 || spec.file_workers == 0 || spec.net_workers == 0 ||
      spec.data_files == 0 || spec.socket_files == 0 || spec.sockets == 0 ||
      spec.binaries < 2) {
    throw InvalidArgument("two-role spec needs every population to be non-empty");
  }
  Rng rng(seed);
  TwoRoleGraph out;
  Builder b(out.graph, prefix);
  std::vector<NodeIndex> shells, files, sock_files, sockets, binaries, filers, net;
  for (std::size_t i = 0; i < spec.binaries; ++i) {
    binaries.push_back(b.named("bin" + std::to_string(i), "file"));
  }
  for (std::size_t i = 0; i < spec.data_files; ++i) {
    files.push_back(b.named("f" + std::to_string(i), "file"));
  }
  for (std::size_t i = 0; i < spec.socket_files; ++i) {
    sock_files.push_back(b.named("u" + std::to_string(i), "file"));
  }
  for (std::size_t i = 0; i < spec.sockets; ++i) {
    sockets.push_back(b.named("s" + std::to_string(i), "socket"));
  }
  for (std::size_t i = 0; i < spec.shells; ++i) {
    const NodeIndex s = b.named("sh" + std::to_string(i), "process");
    b.edge(binaries[0], s, "exec");
    shells.push_back(s);
  }

  // Socket-style conversation: connect once, then a few sends and recvs.
  auto converse = [&](NodeIndex p, NodeIndex peer) {
    b.edge(p, peer, "connect");
    b.edge(p, peer, "send", between(rng, 1, 5));
    b.edge(peer, p, "recv", between(rng, 1, 5));
  };
  const std::size_t half = spec.binaries / 2;
  std::vector<std::uint8_t> kinds;
  kinds.insert(kinds.end(), spec.file_workers, 0);
  kinds.insert(kinds.end(), spec.net_workers, 1);
  rng.shuffle(kinds);
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    const NodeIndex p = b.named("p" + std::to_string(i), "process");
    b.edge(pick(rng, shells), p, "fork");
    if (kinds[i] == 0) {
      filers.push_back(p);
      b.edge(binaries[1 + rng.below(std::max<std::size_t>(half, 2) - 1)], p, "exec");
      for (std::uint32_t k = between(rng, 1, 4); k > 0; --k) b.edge(pick(rng, files), p, "read");
      for (std::uint32_t k = between(rng, 1, 3); k > 0; --k) b.edge(p, pick(rng, files), "write");
    } else {
      net.push_back(p);
      b.edge(binaries[half + rng.below(spec.binaries - half)], p, "exec");
      converse(p, pick(rng, sockets));
    }
  }
  // Local IPC: some file workers also talk to UNIX-domain socket files, which
  // look like network endpoints one hop out but serve a different clientele.
  for (NodeIndex u : sock_files) {
    for (std::uint32_t k = between(rng, 1, 2); k > 0; --k) converse(pick(rng, filers), u);
  }
  // Broadcast endpoints: opened once by a shell, then fan recv out to many
  // network clients.
  for (std::size_t i = 0; i < spec.broadcasts; ++i) {
    const NodeIndex s = b.named("bc" + std::to_string(i), "socket");
    b.edge(pick(rng, shells), s, "connect");
    for (std::uint32_t k = between(rng, 15, 40); k > 0; --k) b.edge(s, pick(rng, net), "recv");
  }
  // No isolated nodes: an all-zero receptive field carries no signal.
  for (NodeIndex f : files) {
    if (out.graph.in_edges(f).empty() && out.graph.out_edges(f).empty()) {
      b.edge(f, pick(rng, filers), "read");
    }
  }
  for (NodeIndex s : sockets) {
    if (out.graph.in_edges(s).empty() && out.graph.out_edges(s).empty()) {
      converse(pick(rng, net), s);
    }
  }
  for (NodeIndex bin : binaries) {
    if (out.graph.out_edges(bin).empty()) b.edge(bin, pick(rng, shells), "exec");
  }
  out.role.assign(out.graph.node_count(), kSupport);
  for (NodeIndex f : files) out.role[f] = kRoleA;
  for (NodeIndex u : sock_files) out.role[u] = kRoleB;
  return out;
}

Injection inject_anomalies(ProvenanceGraph& graph, std::uint64_t seed, const AnomalySpec& spec) {
  Rng rng(seed);
  std::vector<NodeIndex> processes;
  for (NodeIndex v = 0; v < graph.node_count(); ++v) {
    if (graph.node_type(v) == "process") processes.push_back(v);
  }
  if (spec.forked && processes.empty()) {
    throw InvalidArgument("no process to fork anomalies from");
  }
  Injection inj;
  auto ts = [&graph] { return static_cast<std::int64_t>(graph.edge_count()); };
  for (std::size_t i = 0; i < spec.count; ++i) {
    const std::string base = spec.prefix + std::to_string(i);
    const NodeIndex a = graph.add_node(base, "process");
    inj.anomalous.push_back(a);
    if (spec.forked) {
      const NodeIndex parent = pick(rng, processes);
      graph.add_edge(parent, a, "fork", ts());
      inj.parents.push_back(parent);
    }
    const NodeIndex f = graph.add_node(base + "-file", "file");
    const NodeIndex s = graph.add_node(base + "-sock", "socket");
    inj.peers.push_back(f);
    inj.peers.push_back(s);
    graph.add_edge(a, f, "read", ts());
    graph.add_edge(a, f, "write", ts());
    graph.add_edge(a, s, "connect", ts());
    graph.add_edge(a, s, "send", ts());
    std::vector<NodeIndex> burst;
    for (std::size_t k = 0; k < std::max<std::size_t>(spec.burst_peers, 1); ++k) {
      const NodeIndex p = graph.add_node(base + "-peer" + std::to_string(k), "socket");
      burst.push_back(p);
      inj.peers.push_back(p);
    }
    for (std::uint32_t k = 0; k < spec.burst; ++k) {
      graph.add_edge(a, burst[k % burst.size()], "recv", ts());
    }
  }
  std::sort(inj.parents.begin(), inj.parents.end());
  inj.parents.erase(std::unique(inj.parents.begin(), inj.parents.end()), inj.parents.end());
  return inj;
}

namespace {

// StreamSpot-style single-letter vocabulary.
constexpr const char* kProc = "a";
constexpr const char* kThread = "b";
constexpr const char* kFile = "c";
constexpr const char* kMem = "d";
constexpr const char* kSock = "e";

constexpr const char* kClone = "m";
constexpr const char* kExec = "p";
constexpr const char* kMmap = "t";
constexpr const char* kRead = "v";
constexpr const char* kWrite = "G";
constexpr const char* kConnect = "o";
constexpr const char* kRecv = "w";
constexpr const char* kSend = "z";
constexpr const char* kStat = "C";

enum Pool { kFiles, kLibs, kSocks, kMems, kCache };

struct Action {
  const char* edge;
  bool inbound;  // peer -> worker
  Pool pool;
  std::uint32_t lo, hi;
};

struct Template {
  const char* type;
  double weight;
  std::vector<Action> actions;
};

struct Scene {
  std::vector<Template> templates;
  std::size_t files, libs, socks, mems, cache;
};

Scene scene_profile(int scene) {
  const Template cache{kThread, 1.0, {{kWrite, false, kCache, 1, 3}, {kRead, true, kCache, 1, 2}}};
  const Template render{kThread, 1.0, {{kRead, true, kMems, 2, 5}, {kWrite, false, kMems, 1, 2}}};
  switch (scene) {
    case 0:  // video streaming
      return {{{kThread, 3.0, {{kRecv, true, kSocks, 3, 9}, {kSend, false, kSocks, 1, 2},
                               {kWrite, false, kMems, 2, 6}}},
               render, cache},
              20, 6, 30, 40, 20};
    case 1:  // webmail
      return {{{kThread, 2.0, {{kConnect, false, kSocks, 1, 1}, {kSend, false, kSocks, 2, 5},
                               {kRecv, true, kSocks, 2, 5}}},
               {kThread, 1.0, {{kRead, true, kMems, 1, 3}, {kStat, false, kCache, 1, 2}}},
               cache},
              20, 6, 25, 30, 40};
    case 2:  // game
      return {{{kThread, 3.0, {{kRead, true, kFiles, 3, 10}, {kMmap, true, kLibs, 1, 3}}},
               render,
               {kProc, 0.5, {{kRead, true, kFiles, 1, 2}, {kWrite, false, kFiles, 1, 2}}}},
              120, 10, 5, 40, 10};
    case 4:  // download
      return {{{kThread, 2.0, {{kRecv, true, kSocks, 5, 15}, {kWrite, false, kFiles, 5, 15}}},
               cache,
               {kThread, 0.5, {{kStat, false, kFiles, 1, 3}}}},
              60, 6, 15, 10, 20};
    default:  // news browsing; also the backdrop of the attack scene
      return {{{kThread, 3.0, {{kConnect, false, kSocks, 1, 1}, {kRecv, true, kSocks, 1, 4},
                               {kSend, false, kSocks, 1, 1}}},
               cache, render},
              20, 6, 60, 30, 40};
  }
}

// Pool of peers that only enter the graph once something touches them, so
// the generator never leaves isolated entities behind.
class LazyPool {
 public:
  LazyPool(Builder& b, const char* type, std::size_t n) : b_(&b), type_(type), slots_(n) {}

  NodeIndex pick(Rng& rng) {
    auto& slot = slots_[rng.below(slots_.size())];
    if (!slot) slot = b_->node(type_);
    return *slot;
  }
  std::vector<NodeIndex> materialize_all() {
    std::vector<NodeIndex> out;
    for (auto& slot : slots_) {
      if (!slot) slot = b_->node(type_);
      out.push_back(*slot);
    }
    return out;
  }

 private:
  Builder* b_;
  const char* type_;
  std::vector<std::optional<NodeIndex>> slots_;
};

void drive_by(Builder& b, Rng& rng, NodeIndex browser, LazyPool& files, NodeIndex shell_bin) {
  const NodeIndex evil = b.node(kSock);
  const NodeIndex dropper = b.node(kProc);
  b.edge(browser, dropper, kClone);
  b.edge(dropper, evil, kConnect);
  b.edge(evil, dropper, kRecv, between(rng, 150, 300));
  const NodeIndex dropped = b.node(kFile);
  b.edge(dropper, dropped, kWrite);
  const NodeIndex payload = b.node(kProc);
  b.edge(dropper, payload, kClone);
  b.edge(dropped, payload, kExec);
  const NodeIndex c2 = b.node(kSock);
  b.edge(payload, c2, kConnect);
  b.edge(payload, c2, kSend, between(rng, 30, 80));
  const std::uint32_t victims = between(rng, 10, 30);
  for (std::uint32_t i = 0; i < victims; ++i) {
    b.edge(payload, files.pick(rng), kWrite, between(rng, 3, 6));
  }
  const NodeIndex secret = b.node(kFile);
  for (std::uint32_t i = between(rng, 4, 8); i > 0; --i) {
    const NodeIndex sh = b.node(kProc);
    b.edge(payload, sh, kClone);
    b.edge(shell_bin, sh, kExec);
    b.edge(secret, sh, kRead, between(rng, 1, 3));
    b.edge(sh, c2, kSend, between(rng, 1, 3));
  }
}

}  // namespace

LabeledGraph make_scene_graph(std::uint64_t seed, int scene, std::size_t index,
                              const CorpusSpec& spec) {
  if (spec.workers_min == 0 || spec.workers_max < spec.workers_min) {
    throw InvalidArgument("bad worker range");
  }
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(scene) * 100003 + index));
  const bool attack = scene == spec.attack_scene;
  const Scene profile = scene_profile(attack ? 5 : scene);

  LabeledGraph lg;
  lg.graph_id = std::to_string(scene * 100 + static_cast<long>(index));
  lg.scene = scene;
  lg.attack = attack;
  Builder b(lg.graph, "");

  const NodeIndex browser_bin = b.node(kFile);
  const NodeIndex browser = b.node(kProc);
  b.edge(browser_bin, browser, kExec);
  LazyPool files(b, kFile, profile.files), lib_pool(b, kFile, profile.libs),
      socks(b, kSock, profile.socks), mems(b, kMem, profile.mems), cache(b, kFile, profile.cache);
  const auto libs = lib_pool.materialize_all();
  for (NodeIndex l : libs) b.edge(l, browser, kMmap);
  auto pool_of = [&](Pool p) -> LazyPool& {
    switch (p) {
      case kFiles: return files;
      case kLibs: return lib_pool;
      case kSocks: return socks;
      case kMems: return mems;
      default: return cache;
    }
  };

  double total = 0.0;
  for (const auto& t : profile.templates) total += t.weight;
  const std::size_t n_workers = between(rng, static_cast<std::uint32_t>(spec.workers_min),
                                        static_cast<std::uint32_t>(spec.workers_max));
  for (std::size_t w = 0; w < n_workers; ++w) {
    double u = rng.uniform() * total;
    std::size_t ti = 0;
    while (ti + 1 < profile.templates.size() && u >= profile.templates[ti].weight) {
      u -= profile.templates[ti].weight;
      ++ti;
    }
    const Template& t = profile.templates[ti];
    const NodeIndex v = b.node(t.type);
    b.edge(browser, v, kClone);
    b.edge(pick(rng, libs), v, kMmap);
    for (const auto& a : t.actions) {
      auto& pool = pool_of(a.pool);
      const std::uint32_t n = between(rng, a.lo, a.hi);
      // Repeated interactions mostly go to the same peer, as with a socket
      // or file handle held open.
      const NodeIndex peer = pool.pick(rng);
      for (std::uint32_t k = 0; k < n; ++k) {
        const NodeIndex p = k == 0 || rng.uniform() < 0.7 ? peer : pool.pick(rng);
        if (a.inbound) {
          b.edge(p, v, a.edge);
        } else {
          b.edge(v, p, a.edge);
        }
      }
    }
  }
  if (attack) drive_by(b, rng, browser, files, b.node(kFile));
  return lg;
}

std::vector<LabeledGraph> make_streamspot_corpus(std::uint64_t seed, const CorpusSpec& spec) {
  std::vector<LabeledGraph> out;
  for (int scene = 0; scene < 6; ++scene) {
    const std::size_t n = scene == spec.attack_scene ? spec.attack_graphs
                                                     : spec.graphs_per_benign_scene;
    for (std::size_t i = 0; i < n; ++i) out.push_back(make_scene_graph(seed, scene, i, spec));
  }
  return out;
}

}  // namespace provsage::synthetic
