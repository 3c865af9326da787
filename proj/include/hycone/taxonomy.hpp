#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "hycone/common.hpp"

namespace hycone::hiereval {

// Rooted taxonomy: labeled nodes and weighted parent->child edges. Path
// queries treat edges as undirected; ancestor queries follow edges backward.
// The structure may be a DAG; validate() rejects cycles, non-positive
// weights, and nodes unreachable from the root.
class TaxonomyGraph {
 public:
  using NodeIdx = std::uint32_t;

  struct Adj {
    NodeIdx to;
    double weight;
  };

  explicit TaxonomyGraph(const std::string& root_label);

  // Interns the label: returns the existing index when already present.
  NodeIdx add_node(const std::string& label);
  // Interns both endpoints. Weight must be > 0.
  void add_edge(const std::string& parent, const std::string& child, double weight = 1.0);

  bool contains(const std::string& label) const;
  NodeIdx index_of(const std::string& label) const;  // data_error on unknown
  const std::string& label(NodeIdx n) const;
  std::size_t node_count() const { return labels_.size(); }
  NodeIdx root() const { return 0; }

  const std::vector<Adj>& children(NodeIdx n) const;
  const std::vector<Adj>& parents(NodeIdx n) const;

  void validate() const;

  // Sum of edge weights on the shortest undirected path.
  double path_distance(NodeIdx a, NodeIdx b) const;

  // Every node reachable by following edges backward, the node included.
  std::vector<NodeIdx> ancestors(NodeIdx n) const;

  // Weighted depth from the root along directed edges (the longest such
  // path, which for a tree is the only one).
  double depth(NodeIdx n) const;

  // Common ancestor with the greatest weighted depth; ties by lower index.
  NodeIdx lowest_common_ancestor(NodeIdx a, NodeIdx b) const;

  // Text form: first line is the root label, then one edge per line as
  // "parent<TAB>child[<TAB>weight]" (weight defaults to 1).
  static TaxonomyGraph load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, NodeIdx> index_;
  std::vector<std::vector<Adj>> children_;
  std::vector<std::vector<Adj>> parents_;

  void check_index(NodeIdx n) const;
};

}  // namespace hycone::hiereval
