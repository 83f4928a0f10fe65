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

#include "provsage/store.hpp"

#include <charconv>
#include "json.hpp"
#include <sstream>

#include "provsage/error.hpp"

namespace provsage {

namespace fs = std::filesystem;

namespace {

constexpr const char* kEdgesFile = "edges.log";
constexpr const char* kNodesFile = "nodes.idx";
constexpr const char* kMetaFile = "meta.json";

// Reads complete lines; returns the byte length of the valid prefix so a torn
// tail can be truncated.
std::vector<std::string> read_complete_lines(const fs::path& path,
                                             std::uintmax_t& valid_bytes) {
  std::vector<std::string> lines;
  valid_bytes = 0;
  std::ifstream in(path, std::ios::binary);
  if (!in) return lines;
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string data = buffer.str();
  std::size_t start = 0;
  while (start < data.size()) {
    const auto nl = data.find('\n', start);
    if (nl == std::string::npos) break;
    lines.emplace_back(data, start, nl - start);
    start = nl + 1;
  }
  valid_bytes = start;
  return lines;
}

void truncate_to(const fs::path& path, std::uintmax_t size) {
  if (fs::exists(path) && fs::file_size(path) != size) fs::resize_file(path, size);
}

std::uint64_t parse_u64(std::string_view s, std::size_t line, const char* what) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError(std::string("bad ") + what, line);
  }
  return v;
}

}  // namespace

GraphStore GraphStore::open(const fs::path& dir, StoreOptions options) {
  GraphStore store;
  store.dir_ = dir;
  store.options_ = options;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create store directory " + dir.string());

  const fs::path meta_path = dir / kMetaFile;
  std::uint64_t meta_edges = 0;
  if (fs::exists(meta_path)) {
    std::ifstream in(meta_path);
    nlohmann::json meta;
    try {
      in >> meta;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("meta.json: ") + e.what());
    }
    if (meta.value("version", 0) != kVersion) {
      throw FormatError("meta.json: unsupported store version");
    }
    meta_edges = meta.value("edge_count", std::uint64_t{0});
  }

  // Registry first so dense indices survive exactly; edges may introduce
  // nodes the registry missed if the process died between the two writes.
  std::uintmax_t valid = 0;
  const auto node_lines = read_complete_lines(dir / kNodesFile, valid);
  truncate_to(dir / kNodesFile, valid);
  for (std::size_t i = 0; i < node_lines.size(); ++i) {
    const std::string& line = node_lines[i];
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) {
      throw FormatError("nodes.idx: malformed entry", i + 1);
    }
    const auto index = parse_u64(std::string_view(line).substr(0, t1), i + 1,
                                 "node index");
    if (index != store.graph_.node_count()) {
      throw FormatError("nodes.idx: non-dense index", i + 1);
    }
    store.graph_.add_node(line.substr(t1 + 1, t2 - t1 - 1), line.substr(t2 + 1));
  }
  const std::size_t registered = store.graph_.node_count();

  const auto edge_lines = read_complete_lines(dir / kEdgesFile, valid);
  truncate_to(dir / kEdgesFile, valid);
  for (std::size_t i = 0; i < edge_lines.size(); ++i) {
    const std::string& line = edge_lines[i];
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError("edges.log: malformed", i + 1);
    const auto id = parse_u64(std::string_view(line).substr(0, tab), i + 1, "edge id");
    if (id != store.graph_.edge_count()) {
      throw FormatError("edges.log: edge ids not consecutive", i + 1);
    }
    store.graph_.add_edge(parse_edge_line(std::string_view(line).substr(tab + 1), i + 1));
  }
  if (store.graph_.edge_count() < meta_edges) {
    throw IoError("edges.log holds fewer edges than meta.json records");
  }

  store.edge_log_ = std::make_unique<std::ofstream>(
      dir / kEdgesFile, std::ios::binary | std::ios::app);
  store.node_log_ = std::make_unique<std::ofstream>(
      dir / kNodesFile, std::ios::binary | std::ios::app);
  if (!*store.edge_log_ || !*store.node_log_) {
    throw IoError("cannot open store logs in " + dir.string());
  }
  store.log_new_nodes(registered);
  store.write_meta();
  return store;
}

GraphStore::GraphStore(GraphStore&&) noexcept = default;
GraphStore& GraphStore::operator=(GraphStore&&) noexcept = default;

GraphStore::~GraphStore() {
  if (!edge_log_) return;
  try {
    flush();
  } catch (...) {
  }
}

void GraphStore::log_new_nodes(std::size_t first) {
  for (std::size_t v = first; v < graph_.node_count(); ++v) {
    const auto n = static_cast<NodeIndex>(v);
    *node_log_ << v << '\t' << graph_.node_id(n) << '\t' << graph_.node_type(n)
               << '\n';
  }
}

EdgeIndex GraphStore::append_edge(const EdgeRecord& record) {
  const std::size_t before = graph_.node_count();
  const EdgeIndex e = graph_.add_edge(record);
  log_new_nodes(before);
  *edge_log_ << e << '\t' << format_edge_line(record) << '\n';
  if (options_.flush_each_append) {
    node_log_->flush();
    edge_log_->flush();
  }
  if (!*edge_log_) throw IoError("write to edges.log failed");
  return e;
}

NodeIndex GraphStore::declare_node(std::string_view id, std::string_view type) {
  const std::size_t before = graph_.node_count();
  const NodeIndex v = graph_.add_node(id, type);
  log_new_nodes(before);
  if (options_.flush_each_append) node_log_->flush();
  return v;
}

void GraphStore::flush() {
  node_log_->flush();
  edge_log_->flush();
  write_meta();
}

void GraphStore::write_meta() {
  nlohmann::json meta = {{"format", "provsage-store"},
                         {"version", kVersion},
                         {"edge_count", graph_.edge_count()},
                         {"node_count", graph_.node_count()}};
  const fs::path tmp = dir_ / "meta.json.tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << meta.dump(2) << '\n';
    if (!out) throw IoError("cannot write meta.json");
  }
  fs::rename(tmp, dir_ / kMetaFile);
}

std::vector<EdgeRecord> GraphStore::read_edge_log() const {
  edge_log_->flush();
  std::uintmax_t valid = 0;
  const auto lines = read_complete_lines(dir_ / kEdgesFile, valid);
  std::vector<EdgeRecord> out;
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto tab = lines[i].find('\t');
    out.push_back(parse_edge_line(std::string_view(lines[i]).substr(tab + 1), i + 1));
  }
  return out;
}

}  // namespace provsage
