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

#include <filesystem>
#include <fstream>
#include <memory>
#include <vector>

#include "provsage/graph.hpp"

namespace provsage {

struct StoreOptions {
  // Flush the OS stream after every append. Off for bulk replays that call
  // flush() themselves.
  bool flush_each_append = true;
};

// Append-only on-disk provenance graph.
//
// Directory layout:
//   edges.log  one edge per line: edge_id \t <canonical edge line>
//   nodes.idx  node registry, one `dense_index \t node_id \t node_type` line
//              per node in registration order
//   meta.json  {"format", "version", "edge_count", "node_count"}
//
// Reopening replays edges.log into the in-memory index; a torn final line
// (no trailing newline) is discarded and truncated away.
class GraphStore {
 public:
  static constexpr int kVersion = 1;

  static GraphStore open(const std::filesystem::path& dir,
                         StoreOptions options = {});

  GraphStore(GraphStore&&) noexcept;
  GraphStore& operator=(GraphStore&&) noexcept;
  ~GraphStore();

  // Throws TypeConflict before anything is written.
  EdgeIndex append_edge(const EdgeRecord& record);
  NodeIndex declare_node(std::string_view id, std::string_view type);

  void flush();

  const ProvenanceGraph& graph() const { return graph_; }
  const std::filesystem::path& dir() const { return dir_; }

  // Reads edges.log straight from disk, independent of the in-memory index.
  std::vector<EdgeRecord> read_edge_log() const;

 private:
  GraphStore() = default;
  void log_new_nodes(std::size_t first);
  void write_meta();

  std::filesystem::path dir_;
  StoreOptions options_;
  ProvenanceGraph graph_;
  std::unique_ptr<std::ofstream> edge_log_;
  std::unique_ptr<std::ofstream> node_log_;
};

}  // namespace provsage
