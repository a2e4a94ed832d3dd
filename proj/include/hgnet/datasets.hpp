#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hgnet/graph.hpp"

namespace hgnet {

/// One color-connectivity example: the sorted red node ids over the shared
/// topology, the connectivity label, and the seed that produced it.
struct DatasetSample {
  std::vector<int> red;
  int label = 0;
  uint64_t seed = 0;
};

/// A family of samples over one shared topology.
struct GraphDataset {
  std::string topology_id;
  std::shared_ptr<const Graph> topology;
  std::vector<DatasetSample> samples;
};

/// Binary color vector (1 = red) for a sample.
std::vector<uint8_t> sample_colors(const Graph& topology, const DatasetSample& s);

/// Label a coloring: 1 if the red-induced subgraph has exactly one connected
/// component, 0 if exactly two, nullopt otherwise (rejected).
std::optional<int> verify_label(const Graph& g, std::span<const uint8_t> colors);

/// Rejection-sample a balanced color-connectivity dataset: per attempt, two
/// distinct uniform start nodes, a two-walker coloring of floor(N/2) nodes,
/// then the component count decides the bucket (1 island -> label 1, 2
/// islands -> label 0, otherwise rejected). Attempts derive independent seeds
/// from (seed, attempt index), so results are deterministic. Stops when both
/// buckets hold n_samples/2.
///
/// Throws GenerationError naming the starved label if the attempt cap
/// (attempt_cap_factor * n_samples draws) is hit first, and InputError if the
/// topology is disconnected or n_samples is odd.
GraphDataset generate_color_connectivity(std::shared_ptr<const Graph> topology,
                                         std::string topology_id, int n_samples, uint64_t seed,
                                         int64_t attempt_cap_factor = 1000);

/// 4-neighbor lattice with rows*cols nodes and rows*(cols-1) + cols*(rows-1)
/// edges. Node (r, c) has id r*cols + c.
Graph make_grid(int rows, int cols);

/// Edge-list road network reduced to its largest connected component.
struct RoadNetwork {
  Graph graph;           // largest component, renumbered
  int raw_nodes = 0;     // counts before extraction
  int raw_edges = 0;
  int raw_components = 0;
  int dropped_self_loops = 0;
  int dropped_duplicates = 0;
};

RoadNetwork load_road_network(const std::string& path);

/// Transductive split with the sanitization guarantee: across all three sets,
/// every pair of selected nodes is more than k hops apart.
struct SplitSpec {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
  int k = 0;
  uint64_t seed = 0;
};

struct SplitCounts {
  int train_per_class = 20;
  int val = 500;
  int test = 1000;
};

/// Iterative rejection sampling in order train -> val -> test. A blocked set
/// accumulates the closed k-ball of every selected node; each draw is uniform
/// over the unblocked candidates (train draws are restricted to one class at
/// a time, classes filled in label order). k = 0 degenerates to disjoint
/// uniform sampling.
///
/// Throws GenerationError reporting the shortfall if a quota cannot be met.
SplitSpec sanitized_resample(const Graph& g, std::span<const int> labels, int k,
                             const SplitCounts& counts, uint64_t seed);

/// Stochastic block model with classes*n_per_class nodes, within-class edge
/// probability p_in, cross-class p_out, and node features = one-hot class
/// indicator plus Gaussian noise (sigma 0.1). Features live on the graph.
struct NodeDataset {
  Graph graph;
  std::vector<int> labels;
};

NodeDataset make_homophilous_sbm(int n_per_class, int classes, double p_in, double p_out,
                                 uint64_t seed);

/// JSON Lines round trip. First line holds the shared topology:
///   {"topology":{"edges":[[u,v],...],"id":...,"n":N}}
/// then one line per sample: {"label":0|1,"red":[...],"seed":S,"topology_id":...}.
/// Keys are sorted and all values are integers, so equal datasets serialize
/// byte-identically.
void save_dataset(const std::string& path, const GraphDataset& ds);
GraphDataset load_dataset(const std::string& path);

/// Citation-style node-classification ingest: nodes.csv rows "id,label,f1..fd"
/// (string ids and labels allowed, both densely renumbered by first
/// appearance) and edges.csv rows "src,dst". A first line starting with
/// "id," or "src," is treated as a header. Self-loops and duplicate edges are
/// dropped. Files without feature columns get a constant 1 feature.
NodeDataset load_node_csv(const std::string& nodes_path, const std::string& edges_path);

}
