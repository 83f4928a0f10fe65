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

#include "provsage/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "provsage/alert.hpp"
#include "provsage/attack.hpp"
#include "provsage/config.hpp"
#include "provsage/dataset.hpp"
#include "provsage/ensemble.hpp"
#include "provsage/error.hpp"
#include "provsage/eval.hpp"
#include "provsage/rng.hpp"
#include "provsage/store.hpp"
#include "provsage/streaming.hpp"
#include "provsage/synthetic.hpp"

namespace provsage::cli {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const std::vector<std::string> kConfigKeys = {
    "BS",        "SS",           "split_size",          "R",
    "T",         "T_hat",        "K",                   "hidden_width",
    "epoch",     "learning_rate", "seed",               "unknown_type_policy",
    "ss_semantics", "feature_source", "contrast_per_class", "stall_limit",
    "repeats"};

// Config flags shared by every subcommand: defaults < --config file < flags.
struct ConfigFlags {
  std::string file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "key = value config file")->check(CLI::ExistingFile);
    for (const auto& key : kConfigKeys) {
      options[key] = app->add_option("--" + key, values[key], "config override")
                         ->group("Config overrides");
    }
  }

  Config resolve(std::vector<std::string>* explicit_keys = nullptr) const {
    Config c;
    std::vector<std::string> keys;
    try {
      if (!file.empty()) apply_config_file(c, file, &keys);
      for (const auto& key : kConfigKeys) {
        if (options.at(key)->count() == 0) continue;
        c.set(key, values.at(key));
        keys.push_back(key);
      }
      c.validate();
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
    if (explicit_keys) *explicit_keys = std::move(keys);
    return c;
  }
};

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

ProvenanceGraph load_input(const std::string& path, std::istream& in) {
  if (path == "-") return read_edge_stream(in);
  return load_edge_stream(path);
}

// Either the named file or `fallback` when the name is empty or "-".
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : out_(&fallback) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw IoError("cannot write " + path);
      out_ = &file_;
    }
  }
  std::ostream& get() { return *out_; }

 private:
  std::ofstream file_;
  std::ostream* out_;
};

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << j.dump(2) << '\n';
}

std::string file_safe(const std::string& id) {
  std::string s = id;
  for (char& c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '.';
    if (!ok) c = '_';
  }
  return s;
}

std::unordered_set<NodeIndex> resolve_ids(const ProvenanceGraph& graph,
                                          const std::vector<std::string>& ids) {
  std::unordered_set<NodeIndex> out;
  for (const auto& id : ids) out.insert(graph.index_of(id));
  return out;
}

SceneMapping scene_mapping(long scene_size, const std::vector<int>& attack_scenes) {
  SceneMapping m;
  m.scene_size = scene_size;
  m.attack_scenes = attack_scenes;
  return m;
}

// ---- train ----

struct TrainArgs {
  ConfigFlags config;
  std::vector<std::string> inputs;
  std::string format = "canonical";
  std::string model;
  std::string report;
  long scene_size = 100;
  std::vector<int> attack_scenes{3};
};

int run_train(const TrainArgs& a, std::ostream& err) {
  const Config cfg = a.config.resolve();
  std::vector<ProvenanceGraph> graphs;
  for (const auto& path : a.inputs) {
    if (a.format == "canonical") {
      graphs.push_back(load_edge_stream(path));
      continue;
    }
    for (auto& g : load_streamspot(path, scene_mapping(a.scene_size, a.attack_scenes))) {
      if (!g.attack) graphs.push_back(std::move(g.graph));
    }
  }
  if (graphs.empty()) throw UsageError("no benign graphs to train on");
  std::vector<const ProvenanceGraph*> ptrs;
  for (const auto& g : graphs) ptrs.push_back(&g);

  TrainingReport report;
  const Ensemble ens = train_on_graph_sequence(ptrs, cfg.ensemble_config(), &report);
  ens.save(a.model);
  err << "trained " << ens.count() << " submodels on " << graphs.size() << " graphs\n";
  if (!a.report.empty()) {
    nlohmann::json j;
    j["graphs"] = graphs.size();
    j["submodels"] = ens.count();
    j["config"] = cfg.to_text();
    j["training"] = report.to_json();
    write_json(a.report, j);
  }
  return kExitOk;
}

// ---- detect ----

struct DetectArgs {
  ConfigFlags config;
  std::string model;
  std::string input = "-";
  std::string alerts;
  std::string trace_dir;
  std::string store;
  std::string whitelist;
  bool inline_detection = false;
};

int run_detect(const DetectArgs& a, std::istream& in, std::ostream& out, std::ostream& err) {
  std::vector<std::string> keys;
  const Config cfg = a.config.resolve(&keys);
  Ensemble ens = Ensemble::load(a.model);
  if (contains(keys, "R")) ens.set_ratio_threshold(cfg.r);

  StreamConfig sc = cfg.stream_config();
  sc.pipelined = !a.inline_detection;
  if (!a.whitelist.empty()) sc.whitelist = load_id_list(a.whitelist);

  std::ifstream file;
  std::istream* src = &in;
  if (a.input != "-") {
    file.open(a.input);
    if (!file) throw IoError("cannot open " + a.input);
    src = &file;
  }
  if (!a.trace_dir.empty()) fs::create_directories(a.trace_dir);

  std::optional<GraphStore> store;
  if (!a.store.empty()) store.emplace(GraphStore::open(a.store, StoreOptions{false}));

  Sink alerts(a.alerts, out);
  std::unordered_set<NodeIndex> confirmed;
  std::size_t traced = 0;
  StreamingDetector det(ens, sc, store ? &*store : nullptr);
  det.on_confirm([&](const ProvenanceGraph& g, const ConfirmedNode& c) {
    alerts.get() << format_alert_line(c) << '\n';
    if (a.trace_dir.empty()) return;
    const NodeIndex v = g.index_of(c.node.node_id);
    confirmed.insert(v);
    const auto path = fs::path(a.trace_dir) /
                      (std::to_string(traced++) + "_" + file_safe(c.node.node_id) + ".dot");
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    write_trace_dot(f, g, trace(g, v, confirmed));
  });

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(*src, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const EdgeRecord rec = parse_edge_line(line, line_no);
    try {
      det.push(rec);
    } catch (const TypeConflict& e) {
      throw TypeConflict("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  det.finish();
  if (store) store->flush();

  const auto& st = det.stats();
  err << "ingested " << st.edges << " edges, snapshot high water " << st.snapshot_high_water
      << " nodes\n";
  out << "flushes=" << st.flushes << " confirmed=" << det.alerts().confirmed_nodes().size()
      << " alert_raised=" << (det.alerts().alert_raised() ? "true" : "false") << '\n';
  return kExitOk;
}

// ---- evaluate ----

struct EvaluateArgs {
  ConfigFlags config;
  std::string level = "graph";
  std::string dataset;
  std::string strategy = "streamspot";
  double train_fraction = 0.75;
  std::size_t folds = 5;
  long scene_size = 100;
  std::vector<int> attack_scenes{3};
  std::string store_root;
  std::string model;
  std::string input;
  std::string ground_truth;
  bool batch = false;
  std::string metrics;
  std::string summary;
};

nlohmann::json counts_json(const ConfusionCounts& c) {
  return {{"tp", c.tp}, {"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}};
}

int run_evaluate_graph(const EvaluateArgs& a, const Config& cfg, std::ostream& out,
                       std::ostream& err) {
  if (a.dataset.empty()) throw UsageError("graph-level evaluation needs --dataset");
  const auto graphs = load_streamspot(a.dataset, scene_mapping(a.scene_size, a.attack_scenes));
  EvalOptions eo;
  eo.split.strategy = *parse_split_strategy(a.strategy);
  eo.split.train_fraction = a.train_fraction;
  eo.split.folds = a.folds;
  eo.split.seed = cfg.seed;
  eo.train = cfg.ensemble_config();
  eo.replay.stream = cfg.stream_config();
  if (!a.store_root.empty()) eo.replay.store_root = a.store_root;
  eo.repeats = cfg.repeats;

  const RepeatedEval rep = run_repeated_eval(graphs, eo);
  Sink sink(a.metrics, out);
  write_metrics_csv_header(sink.get());
  for (std::size_t r = 0; r < rep.runs.size(); ++r) {
    write_metrics_csv_row(sink.get(), "run" + std::to_string(r), rep.runs[r].result.metrics);
  }
  write_metrics_csv_row(sink.get(), "mean", rep.mean_metrics);
  err << "evaluated " << rep.runs.size() << " runs over " << graphs.size() << " graphs\n";
  if (!a.summary.empty()) {
    nlohmann::json j = rep.to_json();
    j["level"] = "graph";
    j["strategy"] = a.strategy;
    j["config"] = cfg.to_text();
    write_json(a.summary, j);
  }
  return kExitOk;
}

int run_evaluate_node(const EvaluateArgs& a, const Config& cfg, std::istream& in,
                      std::ostream& out) {
  if (a.ground_truth.empty()) throw UsageError("node-level evaluation needs --ground-truth");
  if (a.model.empty() || a.input.empty()) {
    throw UsageError("node-level evaluation needs --model and --input");
  }
  const auto ids = load_id_list(a.ground_truth);
  Ensemble ens = Ensemble::load(a.model);
  ProvenanceGraph graph = load_input(a.input, in);

  ConfusionCounts counts;
  if (a.batch) {
    // Same whole-graph detection and strict scoring as the attack baseline.
    std::vector<EvasionCase> cases(1);
    cases[0].name = a.input;
    cases[0].anomalous = resolve_ids(graph, ids);
    cases[0].graph = std::move(graph);
    EvasionConfig ec;
    ec.kinds.clear();
    counts = evaluate_evasion(ens, cases, FeatureSet{}, ec).baseline;
  } else {
    ReplayOptions ro;
    ro.stream = cfg.stream_config();
    counts = run_node_level_eval(ens, graph, ids, ro);
  }
  const Metrics m = compute_metrics(counts);
  Sink sink(a.metrics, out);
  write_metrics_csv_header(sink.get());
  write_metrics_csv_row(sink.get(), "node", m);
  if (!a.summary.empty()) {
    write_json(a.summary, {{"level", "node"},
                           {"batch", a.batch},
                           {"counts", counts_json(counts)},
                           {"metrics", m.to_json()},
                           {"config", cfg.to_text()}});
  }
  return kExitOk;
}

int run_evaluate(const EvaluateArgs& a, std::istream& in, std::ostream& out, std::ostream& err) {
  const Config cfg = a.config.resolve();
  if (a.level == "node") return run_evaluate_node(a, cfg, in, out);
  return run_evaluate_graph(a, cfg, out, err);
}

// ---- attack ----

struct AttackArgs {
  ConfigFlags config;
  std::string model;
  std::string input;
  std::string ground_truth;
  std::vector<std::string> train;
  std::vector<std::string> kinds;
  std::vector<double> deltas{0.0, 0.05, 0.1, 0.2};
  std::size_t submodel = 0;
  int steps = 100;
  std::string out;
  std::string traces;
};

int run_attack(const AttackArgs& a, std::istream& in, std::ostream& out, std::ostream& err) {
  a.config.resolve();
  EvasionConfig ec;
  if (!a.kinds.empty()) {
    ec.kinds.clear();
    for (const auto& k : a.kinds) {
      const auto kind = parse_attack_kind(k);
      if (!kind) throw UsageError("unknown attack kind '" + k + "'");
      ec.kinds.push_back(*kind);
    }
  }
  for (double d : a.deltas) {
    if (d < 0.0) throw UsageError("attack budget must be >= 0");
  }
  ec.deltas = a.deltas;
  ec.submodel = a.submodel;
  ec.pgd.steps = a.steps;

  const Ensemble ens = Ensemble::load(a.model);
  std::vector<ProvenanceGraph> train;
  for (const auto& p : a.train) train.push_back(load_edge_stream(p));
  std::vector<EvasionCase> cases(1);
  cases[0].name = a.input;
  cases[0].graph = load_input(a.input, in);
  cases[0].anomalous = resolve_ids(cases[0].graph, load_id_list(a.ground_truth));

  std::vector<const ProvenanceGraph*> train_ptrs;
  for (const auto& g : train) train_ptrs.push_back(&g);
  std::vector<const ProvenanceGraph*> all = train_ptrs;
  all.push_back(&cases[0].graph);
  ec.peers = PeerRules::infer(all);

  const FeatureSet bank = training_feature_bank(train_ptrs, ens.maps());
  const EvasionReport report = evaluate_evasion(ens, cases, bank, ec);
  Sink sink(a.out, out);
  report.write_csv(sink.get());
  err << "baseline FNR " << format_metric(report.baseline_metrics.fnr) << ", "
      << report.traces.size() << " node attacks\n";
  if (!a.traces.empty()) write_json(a.traces, report.traces_json());
  return kExitOk;
}

// ---- synth ----

struct SynthArgs {
  std::string kind = "two-role";
  std::uint64_t seed = 0;
  std::string out;
  std::string prefix;
  std::size_t anomalies = 0;
  std::uint32_t burst = 25301;
  std::string ground_truth;
  std::size_t graphs_per_scene = 14;
  std::size_t attack_graphs = 25;
};

int run_synth(const SynthArgs& a, std::ostream& err) {
  if (a.kind == "streamspot") {
    synthetic::CorpusSpec spec;
    spec.graphs_per_benign_scene = a.graphs_per_scene;
    spec.attack_graphs = a.attack_graphs;
    const auto graphs = synthetic::make_streamspot_corpus(a.seed, spec);
    std::ofstream f(a.out);
    if (!f) throw IoError("cannot write " + a.out);
    write_streamspot(f, graphs);
    err << "wrote " << graphs.size() << " graphs\n";
    return kExitOk;
  }
  auto g = synthetic::make_two_role_graph(a.seed, {}, a.prefix);
  std::vector<NodeIndex> anomalous;
  if (a.anomalies > 0) {
    synthetic::AnomalySpec spec;
    spec.count = a.anomalies;
    spec.burst = a.burst;
    spec.prefix = a.prefix + "anom";
    anomalous = synthetic::inject_anomalies(g.graph, derive_seed(a.seed, 1), spec).anomalous;
  }
  save_edge_stream(a.out, g.graph);
  if (!a.ground_truth.empty()) {
    std::ofstream f(a.ground_truth);
    if (!f) throw IoError("cannot write " + a.ground_truth);
    for (NodeIndex v : anomalous) f << g.graph.node_id(v) << '\n';
  }
  err << "wrote " << g.graph.edge_count() << " edges, " << anomalous.size() << " anomalies\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Streaming provenance-graph intrusion detection"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train an ensemble on benign graphs");
  train.config.attach(t);
  t->add_option("inputs", train.inputs, "benign edge streams")->required()->check(CLI::ExistingFile);
  t->add_option("--format", train.format, "input format")
      ->check(CLI::IsMember({"canonical", "streamspot"}));
  t->add_option("-o,--out", train.model, "model file")->required();
  t->add_option("--report", train.report, "training report JSON");
  t->add_option("--scene-size", train.scene_size, "graphs per StreamSpot scene");
  t->add_option("--attack-scenes", train.attack_scenes, "StreamSpot attack scenes")->delimiter(',');

  DetectArgs detect;
  auto* d = app.add_subcommand("detect", "Run streaming detection over an edge stream");
  detect.config.attach(d);
  d->add_option("-m,--model", detect.model, "model file")->required()->check(CLI::ExistingFile);
  d->add_option("-i,--input", detect.input, "edge stream, '-' for stdin")
      ->check(CLI::ExistingFile | CLI::IsMember({"-"}));
  d->add_option("--alerts", detect.alerts, "alert log file (default stdout)");
  d->add_option("--trace-dir", detect.trace_dir, "DOT trace per confirmed node");
  d->add_option("--store", detect.store, "persistent graph store directory");
  d->add_option("--whitelist", detect.whitelist, "node ids never confirmed")
      ->check(CLI::ExistingFile);
  d->add_flag("--inline", detect.inline_detection, "detect on the ingesting thread");

  EvaluateArgs eval;
  auto* e = app.add_subcommand("evaluate", "Graph-level or node-level evaluation");
  eval.config.attach(e);
  e->add_option("--level", eval.level, "graph or node")->check(CLI::IsMember({"graph", "node"}));
  e->add_option("--dataset", eval.dataset, "StreamSpot TSV")->check(CLI::ExistingFile);
  e->add_option("--strategy", eval.strategy, "split strategy")
      ->check(CLI::IsMember({"streamspot", "kfold"}));
  e->add_option("--train-fraction", eval.train_fraction, "benign train share per scene")
      ->check(CLI::Range(0.0, 1.0));
  e->add_option("--folds", eval.folds, "k for kfold")->check(CLI::PositiveNumber);
  e->add_option("--scene-size", eval.scene_size, "graphs per StreamSpot scene");
  e->add_option("--attack-scenes", eval.attack_scenes, "StreamSpot attack scenes")->delimiter(',');
  e->add_option("--store-root", eval.store_root, "replay through stores under this directory");
  e->add_option("-m,--model", eval.model, "model file (node level)")->check(CLI::ExistingFile);
  e->add_option("-i,--input", eval.input, "edge stream (node level)")
      ->check(CLI::ExistingFile | CLI::IsMember({"-"}));
  e->add_option("--ground-truth", eval.ground_truth, "anomalous node ids (node level)")
      ->check(CLI::ExistingFile);
  e->add_flag("--batch", eval.batch, "whole-graph detection instead of a replay (node level)");
  e->add_option("--metrics", eval.metrics, "metrics CSV (default stdout)");
  e->add_option("--summary", eval.summary, "JSON summary");

  AttackArgs attack;
  auto* k = app.add_subcommand("attack", "Evasion sweep against a trained ensemble");
  attack.config.attach(k);
  k->add_option("-m,--model", attack.model, "model file")->required()->check(CLI::ExistingFile);
  k->add_option("-i,--input", attack.input, "attacked edge stream")
      ->required()
      ->check(CLI::ExistingFile | CLI::IsMember({"-"}));
  k->add_option("--ground-truth", attack.ground_truth, "anomalous node ids")
      ->required()
      ->check(CLI::ExistingFile);
  k->add_option("--train", attack.train, "benign training streams")
      ->required()
      ->check(CLI::ExistingFile);
  k->add_option("--kind", attack.kinds, "train-data, model or model+neighbors");
  k->add_option("--deltas", attack.deltas, "relative budgets")->delimiter(',');
  k->add_option("--submodel", attack.submodel, "submodel attacked by the model kinds");
  k->add_option("--steps", attack.steps, "projected gradient steps")->check(CLI::PositiveNumber);
  k->add_option("-o,--out", attack.out, "sweep CSV (default stdout)");
  k->add_option("--traces", attack.traces, "per-node attack JSON");

  SynthArgs synth;
  auto* y = app.add_subcommand("synth", "Write a synthetic edge stream or StreamSpot corpus");
  y->add_option("kind", synth.kind, "two-role or streamspot")
      ->check(CLI::IsMember({"two-role", "streamspot"}));
  y->add_option("--seed", synth.seed, "generator seed");
  y->add_option("-o,--out", synth.out, "output file")->required();
  y->add_option("--prefix", synth.prefix, "node id prefix (two-role)");
  y->add_option("--anomalies", synth.anomalies, "injected anomalous processes (two-role)");
  y->add_option("--burst", synth.burst, "recv burst per anomaly (two-role)");
  y->add_option("--ground-truth", synth.ground_truth, "write the anomalous ids here (two-role)");
  y->add_option("--graphs-per-scene", synth.graphs_per_scene, "benign graphs per scene");
  y->add_option("--attack-graphs", synth.attack_graphs, "attack graphs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& pe) {
    err << "error: " << pe.what() << '\n';
    return kExitUsage;
  }

  try {
    if (t->parsed()) return run_train(train, err);
    if (d->parsed()) return run_detect(detect, in, out, err);
    if (e->parsed()) return run_evaluate(eval, in, out, err);
    if (k->parsed()) return run_attack(attack, in, out, err);
    return run_synth(synth, err);
  } catch (const UsageError& ue) {
    err << "error: " << ue.what() << '\n';
    return kExitUsage;
  } catch (const Error& le) {
    err << "error: " << error_code_name(le.code()) << ": " << le.what() << '\n';
    return le.code() == ErrorCode::kInvalidArgument ? kExitUsage : kExitFailure;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace provsage::cli
