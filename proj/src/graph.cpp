#include "hgnet/graph.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <istream>
#include <queue>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "hgnet/error.hpp"
#include "hgnet/rng.hpp"

namespace hgnet {

Graph::Graph(int num_nodes, std::vector<std::pair<int, int>> edges,
             std::vector<double> edge_weights, DMat node_features)
    : num_nodes_(num_nodes),
      edges_(std::move(edges)),
      edge_weights_(std::move(edge_weights)),
      node_features_(std::move(node_features)) {
  if (num_nodes_ < 0) throw InputError("Graph: negative node count");
  if (!edge_weights_.empty() && edge_weights_.size() != edges_.size())
    throw InputError("Graph: edge weight count does not match edge count");
  if (node_features_.rows > 0 && node_features_.rows != num_nodes_)
    throw InputError("Graph: feature row count does not match node count");

  std::unordered_set<uint64_t> seen;
  seen.reserve(edges_.size() * 2);
  for (auto& [u, v] : edges_) {
    if (u < 0 || u >= num_nodes_ || v < 0 || v >= num_nodes_)
      throw InputError("Graph: edge endpoint out of range");
    if (u == v) throw InputError("Graph: self-loop");
    if (u > v) std::swap(u, v);
    uint64_t key = static_cast<uint64_t>(u) * static_cast<uint64_t>(num_nodes_) + v;
    if (!seen.insert(key).second) throw InputError("Graph: duplicate edge");
  }
  for (double w : edge_weights_)
    if (!(w >= 0.0)) throw InputError("Graph: edge weights must be non-negative");

  adj_offsets_.assign(static_cast<size_t>(num_nodes_) + 1, 0);
  for (const auto& [u, v] : edges_) {
    ++adj_offsets_[static_cast<size_t>(u) + 1];
    ++adj_offsets_[static_cast<size_t>(v) + 1];
  }
  for (int i = 0; i < num_nodes_; ++i) adj_offsets_[i + 1] += adj_offsets_[i];
  adj_.resize(edges_.size() * 2);
  std::vector<int> cursor(adj_offsets_.begin(), adj_offsets_.end() - 1);
  for (int e = 0; e < num_edges(); ++e) {
    const auto& [u, v] = edges_[e];
    adj_[cursor[u]++] = Adj{v, e};
    adj_[cursor[v]++] = Adj{u, e};
  }
  for (int u = 0; u < num_nodes_; ++u) {
    std::sort(adj_.begin() + adj_offsets_[u], adj_.begin() + adj_offsets_[u + 1],
              [](const Adj& a, const Adj& b) { return a.node < b.node; });
  }
}

std::span<const Graph::Adj> Graph::neighbors(int u) const {
  if (u < 0 || u >= num_nodes_) throw InputError("Graph::neighbors: node out of range");
  return {adj_.data() + adj_offsets_[u],
          static_cast<size_t>(adj_offsets_[u + 1] - adj_offsets_[u])};
}

int Graph::degree(int u) const {
  if (u < 0 || u >= num_nodes_) throw InputError("Graph::degree: node out of range");
  return adj_offsets_[u + 1] - adj_offsets_[u];
}

uint64_t Graph::content_hash() const {
  uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](uint64_t x) {
    for (int i = 0; i < 8; ++i) {
      h ^= (x >> (8 * i)) & 0xffULL;
      h *= 1099511628211ULL;
    }
  };
  mix(static_cast<uint64_t>(num_nodes_));
  mix(static_cast<uint64_t>(edges_.size()));
  for (const auto& [u, v] : edges_) {
    mix(static_cast<uint64_t>(u));
    mix(static_cast<uint64_t>(v));
  }
  for (double w : edge_weights_) {
    uint64_t bits;
    static_assert(sizeof(bits) == sizeof(w));
    std::memcpy(&bits, &w, sizeof(bits));
    mix(bits);
  }
  return h;
}

namespace {

ComponentLabeling components_impl(const Graph& g, const std::vector<char>& in_set) {
  ComponentLabeling out;
  out.labels.assign(static_cast<size_t>(g.num_nodes()), -1);
  int next = 0;
  std::vector<int> stack;
  for (int s = 0; s < g.num_nodes(); ++s) {
    if (!in_set[s] || out.labels[s] != -1) continue;
    out.labels[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (const auto& a : g.neighbors(u)) {
        if (in_set[a.node] && out.labels[a.node] == -1) {
          out.labels[a.node] = next;
          stack.push_back(a.node);
        }
      }
    }
    ++next;
  }
  out.num_components = next;
  return out;
}

}  // namespace

ComponentLabeling connected_components(const Graph& g) {
  std::vector<char> all(static_cast<size_t>(g.num_nodes()), 1);
  return components_impl(g, all);
}

ComponentLabeling connected_components(const Graph& g, std::span<const int> subset) {
  std::vector<char> in_set(static_cast<size_t>(g.num_nodes()), 0);
  for (int v : subset) {
    if (v < 0 || v >= g.num_nodes())
      throw InputError("connected_components: subset node out of range");
    if (in_set[v]) throw InputError("connected_components: duplicate subset node");
    in_set[v] = 1;
  }
  return components_impl(g, in_set);
}

std::vector<int> bfs_distances(const Graph& g, int source) {
  if (source < 0 || source >= g.num_nodes())
    throw InputError("bfs_distances: source out of range");
  std::vector<int> dist(static_cast<size_t>(g.num_nodes()), -1);
  std::queue<int> q;
  dist[source] = 0;
  q.push(source);
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (const auto& a : g.neighbors(u)) {
      if (dist[a.node] == -1) {
        dist[a.node] = dist[u] + 1;
        q.push(a.node);
      }
    }
  }
  return dist;
}

std::optional<int> shortest_path_hops(const Graph& g, int u, int v) {
  if (u < 0 || u >= g.num_nodes() || v < 0 || v >= g.num_nodes())
    throw InputError("shortest_path_hops: node out of range");
  if (u == v) return 0;
  std::vector<int> dist = bfs_distances(g, u);
  if (dist[v] == -1) return std::nullopt;
  return dist[v];
}

std::vector<int> random_walk_color(const Graph& g, int start_a, int start_b, int target,
                                   uint64_t seed) {
  if (start_a < 0 || start_a >= g.num_nodes() || start_b < 0 || start_b >= g.num_nodes())
    throw InputError("random_walk_color: start node out of range");
  if (start_a == start_b) throw InputError("random_walk_color: start nodes must be distinct");
  if (target < 2) throw InputError("random_walk_color: target below 2");
  if (target > g.num_nodes()) throw InputError("random_walk_color: target exceeds node count");

  ComponentLabeling comps = connected_components(g);
  int64_t reachable = 0;
  int ca = comps.labels[start_a];
  int cb = comps.labels[start_b];
  for (int v = 0; v < g.num_nodes(); ++v)
    if (comps.labels[v] == ca || comps.labels[v] == cb) ++reachable;
  if (reachable < target)
    throw GenerationError("random_walk_color: walkers can reach only " +
                          std::to_string(reachable) + " nodes, target " + std::to_string(target));

  std::vector<char> marked(static_cast<size_t>(g.num_nodes()), 0);
  marked[start_a] = marked[start_b] = 1;
  int count = 2;
  int pos[2] = {start_a, start_b};
  Rng rng(seed);
  int turn = 0;
  while (count < target) {
    int w = turn & 1;
    ++turn;
    int u = pos[w];
    auto nbrs = g.neighbors(u);
    if (nbrs.empty()) continue;
    int v = nbrs[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(nbrs.size()) - 1))].node;
    pos[w] = v;
    if (!marked[v]) {
      marked[v] = 1;
      ++count;
    }
  }
  std::vector<int> out;
  out.reserve(static_cast<size_t>(target));
  for (int v = 0; v < g.num_nodes(); ++v)
    if (marked[v]) out.push_back(v);
  return out;
}

EdgeListGraph read_edge_list(std::istream& in) {
  EdgeListGraph out;
  std::unordered_map<std::string, int> id_of;
  std::vector<std::string> names;
  std::vector<std::pair<int, int>> edges;
  std::unordered_set<uint64_t> seen;
  std::string line;
  int line_no = 0;
  auto intern = [&](const std::string& tok) {
    auto [it, inserted] = id_of.emplace(tok, static_cast<int>(names.size()));
    if (inserted) names.push_back(tok);
    return it->second;
  };
  while (std::getline(in, line)) {
    ++line_no;
    size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '#' || line[first] == '%') continue;
    std::istringstream ls(line);
    std::string a, b, extra;
    if (!(ls >> a >> b))
      throw IngestError("edge list line " + std::to_string(line_no) + ": expected two tokens");
    if (ls >> extra)
      throw IngestError("edge list line " + std::to_string(line_no) + ": trailing tokens");
    int u = intern(a);
    int v = intern(b);
    if (u == v) {
      ++out.dropped_self_loops;
      continue;
    }
    int lo = std::min(u, v), hi = std::max(u, v);
    uint64_t key = (static_cast<uint64_t>(lo) << 32) | static_cast<uint64_t>(hi);
    if (!seen.insert(key).second) {
      ++out.dropped_duplicates;
      continue;
    }
    edges.emplace_back(lo, hi);
  }
  out.graph = Graph(static_cast<int>(names.size()), std::move(edges));
  out.original_ids = std::move(names);
  return out;
}

EdgeListGraph read_edge_list_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IngestError("cannot open edge list file: " + path);
  return read_edge_list(f);
}

ComponentExtract largest_component(const Graph& g) {
  ComponentLabeling comps = connected_components(g);
  if (comps.num_components == 0) throw InputError("largest_component: empty graph");
  std::vector<int> size(static_cast<size_t>(comps.num_components), 0);
  for (int v = 0; v < g.num_nodes(); ++v) ++size[comps.labels[v]];
  int best = 0;
  for (int c = 1; c < comps.num_components; ++c)
    if (size[c] > size[best]) best = c;  // ties keep the lower id, which holds the smallest node

  ComponentExtract out;
  std::vector<int> new_id(static_cast<size_t>(g.num_nodes()), -1);
  for (int v = 0; v < g.num_nodes(); ++v) {
    if (comps.labels[v] == best) {
      new_id[v] = static_cast<int>(out.original_nodes.size());
      out.original_nodes.push_back(v);
    }
  }
  std::vector<std::pair<int, int>> edges;
  std::vector<double> weights;
  for (int e = 0; e < g.num_edges(); ++e) {
    const auto& [u, v] = g.edge(e);
    if (new_id[u] != -1 && new_id[v] != -1) {
      edges.emplace_back(new_id[u], new_id[v]);
      if (g.weighted()) weights.push_back(g.edge_weight(e));
    }
  }
  DMat feats;
  if (g.has_features()) {
    feats = DMat(static_cast<int>(out.original_nodes.size()), g.node_features().cols);
    for (size_t i = 0; i < out.original_nodes.size(); ++i)
      for (int c = 0; c < feats.cols; ++c)
        feats(static_cast<int>(i), c) = g.node_features()(out.original_nodes[i], c);
  }
  out.graph = Graph(static_cast<int>(out.original_nodes.size()), std::move(edges),
                    std::move(weights), std::move(feats));
  return out;
}

}
