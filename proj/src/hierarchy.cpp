#include "hgnet/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hgnet/error.hpp"
#include "hgnet/rng.hpp"
#include "hgnet/tape.hpp"

namespace hgnet {

const char* to_string(CoarsenMethod m) {
  return m == CoarsenMethod::kEdgePool ? "edgepool" : "louvain";
}

namespace {

void append_inter_edges(Hierarchy& h, int level, const CoarseningStep& step) {
  for (int v = 0; v < static_cast<int>(step.fine_to_coarse.size()); ++v)
    h.inter_edges.push_back(InterLevelEdge{level, v, step.fine_to_coarse[static_cast<size_t>(v)]});
}

}  // namespace

EdgePoolHierarchy build_hierarchy_edgepool(const Graph& g, const DMat& features,
                                           std::span<const EdgeScoreParams> params, int levels) {
  if (g.num_nodes() == 0) throw InputError("build_hierarchy: empty graph");
  if (levels < 1) throw InputError("build_hierarchy: levels must be at least 1");
  if (features.rows != g.num_nodes())
    throw InputError("build_hierarchy: feature rows must match node count");
  if (static_cast<int>(params.size()) < levels)
    throw InputError("build_hierarchy: need scoring parameters for every level");

  EdgePoolHierarchy out;
  out.hierarchy.method = CoarsenMethod::kEdgePool;
  out.hierarchy.levels.push_back(g);
  out.level_features.push_back(features);

  Tape<double> t;
  for (int l = 0; l < levels; ++l) {
    const Graph& cur = out.hierarchy.levels.back();
    if (cur.num_nodes() <= 1 || cur.num_edges() == 0) break;
    const EdgeScoreParams& p = params[static_cast<size_t>(l)];
    if (p.w.rows != 1 || p.w.cols != 2 * features.cols)
      throw InputError("build_hierarchy: scoring weights must be [1 x 2d]");
    t.reset();
    auto x = t.leaf(out.level_features.back());
    auto w = t.leaf(p.w);
    auto b = t.leaf(1, 1, std::span<const double>(&p.b, 1));
    auto scores = edgepool_scores(t, cur, x, w, b);
    std::vector<double> score_vals(t.value(scores).begin(), t.value(scores).end());
    std::vector<int> matching = greedy_maximal_matching(cur, score_vals);
    auto [step, coarse_x] = contract(t, cur, x, matching, scores);
    append_inter_edges(out.hierarchy, l, step);
    out.level_features.push_back(t.value_matrix(coarse_x));
    out.hierarchy.levels.push_back(step.coarse_graph);
    out.hierarchy.steps.push_back(std::move(step));
  }
  return out;
}

Hierarchy build_hierarchy_louvain(const Graph& g, uint64_t seed, int levels) {
  if (g.num_nodes() == 0) throw InputError("build_hierarchy: empty graph");
  if (levels < 1) throw InputError("build_hierarchy: levels must be at least 1");

  Hierarchy h;
  h.method = CoarsenMethod::kLouvain;
  h.levels.push_back(g);
  for (int l = 0; l < levels; ++l) {
    const Graph& cur = h.levels.back();
    if (cur.num_nodes() <= 1) break;
    std::vector<int> assignment = louvain(cur, derive_seed(seed, static_cast<uint64_t>(l)));
    int num_comms = 1 + *std::max_element(assignment.begin(), assignment.end());
    if (num_comms == cur.num_nodes()) break;  // no shrink, deeper rounds would stall too
    CoarseningStep step = pool_structure(cur, assignment);
    append_inter_edges(h, l, step);
    h.levels.push_back(step.coarse_graph);
    h.steps.push_back(std::move(step));
  }
  return h;
}

namespace {

/// Union graph adjacency: every level's edges plus inter-level links, all
/// undirected, nodes packed level by level.
struct UnionGraph {
  std::vector<int64_t> level_off;
  std::vector<std::vector<int>> adj;
  int64_t total = 0;
};

UnionGraph union_graph(const Hierarchy& h) {
  UnionGraph u;
  u.level_off.resize(h.levels.size() + 1);
  u.level_off[0] = 0;
  for (size_t l = 0; l < h.levels.size(); ++l)
    u.level_off[l + 1] = u.level_off[l] + h.levels[l].num_nodes();
  u.total = u.level_off.back();
  u.adj.resize(static_cast<size_t>(u.total));
  for (size_t l = 0; l < h.levels.size(); ++l) {
    int64_t off = u.level_off[l];
    for (const auto& [a, b] : h.levels[l].edges()) {
      u.adj[static_cast<size_t>(off + a)].push_back(static_cast<int>(off + b));
      u.adj[static_cast<size_t>(off + b)].push_back(static_cast<int>(off + a));
    }
  }
  for (const auto& e : h.inter_edges) {
    int64_t f = u.level_off[static_cast<size_t>(e.level)] + e.fine;
    int64_t c = u.level_off[static_cast<size_t>(e.level) + 1] + e.coarse;
    u.adj[static_cast<size_t>(f)].push_back(static_cast<int>(c));
    u.adj[static_cast<size_t>(c)].push_back(static_cast<int>(f));
  }
  return u;
}

int max_routed_hops_impl(const Hierarchy& h, int sample_sources, uint64_t seed) {
  const Graph& g0 = h.levels.front();
  if (g0.num_nodes() < 2) return 0;
  ComponentLabeling comps = connected_components(g0);
  UnionGraph u = union_graph(h);

  std::vector<int> sources;
  if (sample_sources <= 0 || sample_sources >= g0.num_nodes()) {
    sources.resize(static_cast<size_t>(g0.num_nodes()));
    std::iota(sources.begin(), sources.end(), 0);
  } else {
    std::vector<int> all(static_cast<size_t>(g0.num_nodes()));
    std::iota(all.begin(), all.end(), 0);
    Rng rng(seed);
    rng.shuffle(all);
    sources.assign(all.begin(), all.begin() + sample_sources);
    std::sort(sources.begin(), sources.end());
  }

  int best = 0;
  std::vector<int> dist(static_cast<size_t>(u.total));
  std::vector<int> queue;
  queue.reserve(static_cast<size_t>(u.total));
  for (int s : sources) {
    std::fill(dist.begin(), dist.end(), -1);
    queue.clear();
    dist[static_cast<size_t>(s)] = 0;
    queue.push_back(s);
    for (size_t head = 0; head < queue.size(); ++head) {
      int x = queue[head];
      for (int y : u.adj[static_cast<size_t>(x)]) {
        if (dist[static_cast<size_t>(y)] == -1) {
          dist[static_cast<size_t>(y)] = dist[static_cast<size_t>(x)] + 1;
          queue.push_back(y);
        }
      }
    }
    for (int v = 0; v < g0.num_nodes(); ++v) {
      if (comps.labels[static_cast<size_t>(v)] != comps.labels[static_cast<size_t>(s)]) continue;
      best = std::max(best, dist[static_cast<size_t>(v)]);
    }
  }
  return best;
}

}  // namespace

HierarchyStats hierarchy_stats(const Hierarchy& h, int sample_sources, uint64_t seed) {
  HierarchyStats s;
  for (const Graph& g : h.levels) {
    s.total_nodes += g.num_nodes();
    s.total_intra_edges += g.num_edges();
    s.level_sizes.emplace_back(g.num_nodes(), g.num_edges());
  }
  s.total_inter_edges = static_cast<int64_t>(h.inter_edges.size());
  s.max_routed_hops = max_routed_hops_impl(h, sample_sources, seed);
  return s;
}

BoundsReport verify_bounds(const Hierarchy& h, double m, int sample_sources, uint64_t seed) {
  if (h.method != CoarsenMethod::kEdgePool)
    throw InputError("verify_bounds: hierarchy was not built by edge contraction");
  if (!(m > 1.0)) throw InputError("verify_bounds: m must exceed 1");

  BoundsReport r;
  r.m = m;
  for (int l = 0; l < h.depth(); ++l) {
    double n_l = static_cast<double>(h.levels[static_cast<size_t>(l)].num_nodes());
    double matched = static_cast<double>(h.levels[static_cast<size_t>(l)].num_nodes() -
                                         h.levels[static_cast<size_t>(l) + 1].num_nodes());
    if (matched * m < n_l - 1e-9) {
      r.matching_violation_level = l;
      break;
    }
  }

  HierarchyStats stats = hierarchy_stats(h, sample_sources, seed);
  double n0 = static_cast<double>(h.levels.front().num_nodes());
  double e0 = static_cast<double>(h.levels.front().num_edges());

  r.total_nodes = stats.total_nodes;
  r.node_bound = m * n0;
  r.nodes_ok = static_cast<double>(r.total_nodes) <= r.node_bound + 1e-9;

  r.depth = h.depth();
  r.depth_bound =
      n0 <= 1.0 ? 1
                : static_cast<int>(std::ceil(std::log(n0) / std::log(m / (m - 1.0)))) + 1;
  r.depth_ok = r.depth <= r.depth_bound;

  r.total_intra_edges = stats.total_intra_edges;
  r.intra_edge_bound = m * m / (2.0 * m - 1.0) * e0;
  r.intra_edges_ok = static_cast<double>(r.total_intra_edges) <= r.intra_edge_bound + 1e-9;

  r.max_routed_hops = stats.max_routed_hops;
  r.routing_bound = 2 * r.depth;
  r.routing_ok = r.max_routed_hops <= r.routing_bound;
  return r;
}

}
