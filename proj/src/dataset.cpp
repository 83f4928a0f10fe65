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

#include "provsage/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>

#include "provsage/error.hpp"

namespace provsage {

namespace {

std::vector<std::string_view> split_on(std::string_view line, char sep) {
  std::vector<std::string_view> cols;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      cols.push_back(line.substr(start));
      return cols;
    }
    cols.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

}  // namespace

bool SceneMapping::is_attack(int scene) const {
  return std::find(attack_scenes.begin(), attack_scenes.end(), scene) != attack_scenes.end();
}

std::vector<LabeledGraph> read_streamspot(std::istream& in, const SceneMapping& mapping) {
  if (mapping.scene_size <= 0) throw InvalidArgument("scene size must be positive");
  std::map<long, LabeledGraph> graphs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (view.empty()) continue;
    const auto cols = split_on(view, '\t');
    if (cols.size() != 6) {
      throw FormatError("expected 6 tab-separated columns, got " + std::to_string(cols.size()),
                        line_no);
    }
    for (const auto& c : cols) {
      if (c.empty()) throw FormatError("empty column", line_no);
    }
    long gid = 0;
    const auto g = cols[5];
    const auto [ptr, ec] = std::from_chars(g.data(), g.data() + g.size(), gid);
    if (ec != std::errc() || ptr != g.data() + g.size() || gid < 0) {
      throw FormatError("bad graph_id '" + std::string(g) + "'", line_no);
    }
    auto [it, fresh] = graphs.try_emplace(gid);
    LabeledGraph& lg = it->second;
    if (fresh) {
      lg.graph_id = std::to_string(gid);
      lg.scene = static_cast<int>(gid / mapping.scene_size);
      lg.attack = mapping.is_attack(lg.scene);
    }
    EdgeRecord r{std::string(cols[0]), std::string(cols[1]), std::string(cols[2]),
                 std::string(cols[3]), std::string(cols[4]),
                 static_cast<std::int64_t>(lg.graph.edge_count())};
    try {
      lg.graph.add_edge(r);
    } catch (const TypeConflict& e) {
      throw FormatError(e.what(), line_no);
    }
  }
  std::vector<LabeledGraph> out;
  out.reserve(graphs.size());
  for (auto& [gid, lg] : graphs) out.push_back(std::move(lg));
  return out;
}

std::vector<LabeledGraph> load_streamspot(const std::string& path, const SceneMapping& mapping) {
  auto in = open_input(path);
  return read_streamspot(in, mapping);
}

void write_streamspot(std::ostream& out, const std::vector<LabeledGraph>& graphs) {
  for (const auto& lg : graphs) {
    const auto& g = lg.graph;
    for (EdgeIndex e = 0; e < g.edge_count(); ++e) {
      const Edge& ed = g.edge(e);
      out << g.node_id(ed.src) << '\t' << g.node_type(ed.src) << '\t' << g.node_id(ed.dst)
          << '\t' << g.node_type(ed.dst) << '\t' << g.edge_type(e) << '\t' << lg.graph_id
          << '\n';
    }
  }
}

ProvenanceGraph read_edge_stream(std::istream& in) {
  ProvenanceGraph g;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const EdgeRecord r = parse_edge_line(line, line_no);
    try {
      g.add_edge(r);
    } catch (const TypeConflict& e) {
      throw TypeConflict("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return g;
}

ProvenanceGraph load_edge_stream(const std::string& path) {
  auto in = open_input(path);
  return read_edge_stream(in);
}

void write_edge_stream(std::ostream& out, const ProvenanceGraph& graph) {
  for (EdgeIndex e = 0; e < graph.edge_count(); ++e) {
    out << format_edge_line(graph.record(e)) << '\n';
  }
}

void save_edge_stream(const std::string& path, const ProvenanceGraph& graph) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  write_edge_stream(out, graph);
  if (!out) throw IoError("failed writing " + path);
}

std::vector<std::string> load_id_list(const std::string& path) {
  auto in = open_input(path);
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    ids.push_back(line);
  }
  return ids;
}

}  // namespace provsage
