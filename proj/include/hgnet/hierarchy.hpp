#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hgnet/coarsen.hpp"
#include "hgnet/graph.hpp"

namespace hgnet {

enum class CoarsenMethod { kEdgePool, kLouvain };

const char* to_string(CoarsenMethod m);

/// Directed structural link from a fine node at `level` to its coarse
/// representative at level + 1.
struct InterLevelEdge {
  int level;
  int fine;
  int coarse;
};

/// A coarsening tower: levels[0] is the input graph, steps[l] maps
/// levels[l] to levels[l+1]. depth() == number of coarsening steps, so a
/// hierarchy that could not coarsen at all has depth 0.
struct Hierarchy {
  CoarsenMethod method = CoarsenMethod::kEdgePool;
  std::vector<Graph> levels;
  std::vector<CoarseningStep> steps;
  std::vector<InterLevelEdge> inter_edges;

  int depth() const { return static_cast<int>(steps.size()); }
};

struct EdgePoolHierarchy {
  Hierarchy hierarchy;
  std::vector<DMat> level_features;  // one per level, including the input
};

/// Score-and-contract repeatedly, up to `levels` times, stopping early when
/// the current level has one node or no edges. params must provide scoring
/// weights for at least `levels` rounds; feature width is preserved by
/// contraction so all rounds share the input width.
EdgePoolHierarchy build_hierarchy_edgepool(const Graph& g, const DMat& features,
                                           std::span<const EdgeScoreParams> params, int levels);

/// Louvain-and-pool repeatedly, stopping early when a round fails to shrink
/// the graph. Level l uses the seed derived from (seed, l).
Hierarchy build_hierarchy_louvain(const Graph& g, uint64_t seed, int levels);

struct HierarchyStats {
  int64_t total_nodes = 0;
  int64_t total_intra_edges = 0;
  int64_t total_inter_edges = 0;
  /// Longest shortest path in the union graph (intra edges of every level
  /// plus inter-level edges, all undirected) between two level-0 nodes in
  /// the same level-0 component. 0 when there are no such pairs.
  int max_routed_hops = 0;
  std::vector<std::pair<int, int>> level_sizes;  // (nodes, edges) per level
};

/// sample_sources == 0 routes from every level-0 node; otherwise that many
/// distinct sources are sampled (all targets are still scanned).
HierarchyStats hierarchy_stats(const Hierarchy& h, int sample_sources = 0, uint64_t seed = 0);

/// Bound checks for an EdgePool hierarchy against an assumed per-round
/// shrink constant m (each round must match at least N/m nodes' worth of
/// pairs, i.e. matching size >= N/m).
struct BoundsReport {
  double m = 0.0;
  /// First level whose matching was smaller than N_l / m, or -1.
  int matching_violation_level = -1;

  int64_t total_nodes = 0;
  double node_bound = 0.0;  // m * N_0
  bool nodes_ok = false;

  int depth = 0;
  int depth_bound = 0;  // ceil(log_{m/(m-1)} N_0) + 1
  bool depth_ok = false;

  int64_t total_intra_edges = 0;
  double intra_edge_bound = 0.0;  // m^2/(2m-1) * E_0; expectation-level, informational
  bool intra_edges_ok = false;

  int max_routed_hops = 0;
  int routing_bound = 0;  // 2 * depth
  bool routing_ok = false;

  /// The guaranteed bounds (nodes, depth, routing) with a valid matching
  /// precondition. The intra-edge bound is reported but excluded: it holds
  /// in expectation, not per instance.
  bool ok() const {
    return matching_violation_level == -1 && nodes_ok && depth_ok && routing_ok;
  }
};

BoundsReport verify_bounds(const Hierarchy& h, double m, int sample_sources = 0,
                           uint64_t seed = 0);

}
