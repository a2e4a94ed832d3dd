#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hgnet/dense.hpp"

namespace hgnet {

/// Immutable undirected graph over dense node ids [0, num_nodes).
///
/// Edges are stored as canonical (min, max) pairs in the order given at
/// construction; that order defines edge ids. Duplicate edges and self-loops
/// are rejected. Edge weights are optional (default 1), as are per-node
/// feature rows.
class Graph {
 public:
  struct Adj {
    int node;
    int edge;
  };

  Graph() = default;
  Graph(int num_nodes, std::vector<std::pair<int, int>> edges,
        std::vector<double> edge_weights = {}, DMat node_features = {});

  int num_nodes() const { return num_nodes_; }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::pair<int, int>& edge(int e) const { return edges_[static_cast<size_t>(e)]; }

  bool weighted() const { return !edge_weights_.empty(); }
  double edge_weight(int e) const { return weighted() ? edge_weights_[static_cast<size_t>(e)] : 1.0; }
  const std::vector<double>& edge_weights() const { return edge_weights_; }

  bool has_features() const { return node_features_.rows > 0; }
  const DMat& node_features() const { return node_features_; }

  /// Neighbors of u sorted by node id, each with the id of the joining edge.
  std::span<const Adj> neighbors(int u) const;
  int degree(int u) const;

  /// FNV-1a over node count, edge list and weights. Cache key material, not
  /// cryptographic.
  uint64_t content_hash() const;

 private:
  int num_nodes_ = 0;
  std::vector<std::pair<int, int>> edges_;
  std::vector<double> edge_weights_;
  DMat node_features_;
  std::vector<int> adj_offsets_;
  std::vector<Adj> adj_;
};

/// labels[v] is the component id of v, or -1 for nodes outside the queried
/// subset. Component ids form a contiguous range [0, num_components) assigned
/// in order of the lowest node id they contain.
struct ComponentLabeling {
  std::vector<int> labels;
  int num_components = 0;
};

ComponentLabeling connected_components(const Graph& g);

/// Components of the subgraph induced by `subset` (edges with both endpoints
/// inside). Duplicate or out-of-range subset entries are an input error.
ComponentLabeling connected_components(const Graph& g, std::span<const int> subset);

/// Hop count of a shortest path, or nullopt if disconnected.
std::optional<int> shortest_path_hops(const Graph& g, int u, int v);

/// BFS hop distances from source; -1 marks unreachable nodes.
std::vector<int> bfs_distances(const Graph& g, int source);

/// Two random walkers start at distinct nodes start_a and start_b (both marked
/// immediately) and take strictly alternating steps, a then b. Each step moves
/// to a uniformly random neighbor and marks it; revisits mark nothing new. A
/// walker on an isolated node forfeits its turns. Stops once `target` distinct
/// nodes are marked. Returns the sorted marked set.
///
/// Throws GenerationError when the union of the two walkers' components has
/// fewer than `target` nodes, since the walk could never finish.
std::vector<int> random_walk_color(const Graph& g, int start_a, int start_b, int target,
                                   uint64_t seed);

/// Whitespace-separated "u v" pairs, one edge per line. Lines starting with
/// '#' or '%' and blank lines are skipped. Node ids may be arbitrary tokens
/// and are densely renumbered in order of first appearance. Self-loops are
/// dropped; duplicate edges (in either orientation) are collapsed.
struct EdgeListGraph {
  Graph graph;
  std::vector<std::string> original_ids;
  int dropped_self_loops = 0;
  int dropped_duplicates = 0;
};

EdgeListGraph read_edge_list(std::istream& in);
EdgeListGraph read_edge_list_file(const std::string& path);

/// Subgraph on the largest connected component (ties broken by smallest
/// member id), with nodes renumbered densely in ascending original order.
struct ComponentExtract {
  Graph graph;
  std::vector<int> original_nodes;
};

ComponentExtract largest_component(const Graph& g);

}
