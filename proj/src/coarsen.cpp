#include "hgnet/coarsen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "hgnet/error.hpp"
#include "hgnet/rng.hpp"

namespace hgnet {

std::vector<int> greedy_maximal_matching(const Graph& g, std::span<const double> scores) {
  if (scores.size() != static_cast<size_t>(g.num_edges()))
    throw InputError("greedy_maximal_matching: one score per edge required");
  std::vector<int> order(static_cast<size_t>(g.num_edges()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[static_cast<size_t>(a)] != scores[static_cast<size_t>(b)])
      return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
    return g.edge(a) < g.edge(b);
  });
  std::vector<char> used(static_cast<size_t>(g.num_nodes()), 0);
  std::vector<int> matching;
  for (int e : order) {
    const auto& [u, v] = g.edge(e);
    if (used[static_cast<size_t>(u)] || used[static_cast<size_t>(v)]) continue;
    used[static_cast<size_t>(u)] = used[static_cast<size_t>(v)] = 1;
    matching.push_back(e);
  }
  return matching;
}

CoarseningStep contract_structure(const Graph& g, std::span<const int> matching,
                                  std::span<const double> scores) {
  if (scores.size() != static_cast<size_t>(g.num_edges()))
    throw InputError("contract_structure: one score per edge required");
  CoarseningStep step;
  step.fine_to_coarse.assign(static_cast<size_t>(g.num_nodes()), -1);
  int m = static_cast<int>(matching.size());
  for (int i = 0; i < m; ++i) {
    int e = matching[static_cast<size_t>(i)];
    if (e < 0 || e >= g.num_edges())
      throw InputError("contract_structure: matching edge id out of range");
    const auto& [u, v] = g.edge(e);
    if (step.fine_to_coarse[static_cast<size_t>(u)] != -1 ||
        step.fine_to_coarse[static_cast<size_t>(v)] != -1)
      throw InputError("contract_structure: matching edges share an endpoint");
    step.fine_to_coarse[static_cast<size_t>(u)] = i;
    step.fine_to_coarse[static_cast<size_t>(v)] = i;
  }
  int next = m;
  for (int v = 0; v < g.num_nodes(); ++v)
    if (step.fine_to_coarse[static_cast<size_t>(v)] == -1)
      step.fine_to_coarse[static_cast<size_t>(v)] = next++;
  int c = next;

  step.merge_scores.assign(static_cast<size_t>(c), 1.0);
  for (int i = 0; i < m; ++i)
    step.merge_scores[static_cast<size_t>(i)] = scores[static_cast<size_t>(matching[static_cast<size_t>(i)])];

  std::vector<std::pair<int, int>> coarse_edges;
  std::unordered_map<uint64_t, char> seen;
  seen.reserve(static_cast<size_t>(g.num_edges()));
  for (const auto& [u, v] : g.edges()) {
    int cu = step.fine_to_coarse[static_cast<size_t>(u)];
    int cv = step.fine_to_coarse[static_cast<size_t>(v)];
    if (cu == cv) continue;
    int lo = std::min(cu, cv), hi = std::max(cu, cv);
    uint64_t key = (static_cast<uint64_t>(lo) << 32) | static_cast<uint64_t>(hi);
    if (seen.emplace(key, 1).second) coarse_edges.emplace_back(lo, hi);
  }
  step.coarse_graph = Graph(c, std::move(coarse_edges));
  return step;
}

double modularity(const Graph& g, std::span<const int> assignment) {
  if (assignment.size() != static_cast<size_t>(g.num_nodes()))
    throw InputError("modularity: assignment size must match node count");
  for (int c : assignment)
    if (c < 0 || c >= g.num_nodes()) throw InputError("modularity: community id out of range");
  if (g.num_edges() == 0) return 0.0;
  std::vector<double> sigma_in(static_cast<size_t>(g.num_nodes()), 0.0);
  std::vector<double> sigma_tot(static_cast<size_t>(g.num_nodes()), 0.0);
  double two_m = 0.0;
  for (int e = 0; e < g.num_edges(); ++e) {
    const auto& [u, v] = g.edge(e);
    double w = g.edge_weight(e);
    two_m += 2.0 * w;
    sigma_tot[static_cast<size_t>(assignment[static_cast<size_t>(u)])] += w;
    sigma_tot[static_cast<size_t>(assignment[static_cast<size_t>(v)])] += w;
    if (assignment[static_cast<size_t>(u)] == assignment[static_cast<size_t>(v)])
      sigma_in[static_cast<size_t>(assignment[static_cast<size_t>(u)])] += 2.0 * w;
  }
  if (two_m == 0.0) return 0.0;
  double q = 0.0;
  for (int c = 0; c < g.num_nodes(); ++c) {
    double tot = sigma_tot[static_cast<size_t>(c)] / two_m;
    q += sigma_in[static_cast<size_t>(c)] / two_m - tot * tot;
  }
  return q;
}

namespace {

/// Working multigraph for Louvain: symmetric off-diagonal adjacency plus an
/// explicit diagonal. k[i] counts the diagonal once; two_m = sum k.
struct WGraph {
  int n = 0;
  std::vector<std::vector<std::pair<int, double>>> adj;
  std::vector<double> diag;
  std::vector<double> k;
  double two_m = 0.0;

  void finish_degrees() {
    k.assign(static_cast<size_t>(n), 0.0);
    for (int u = 0; u < n; ++u) {
      double s = diag[static_cast<size_t>(u)];
      for (const auto& [v, w] : adj[static_cast<size_t>(u)]) s += w;
      k[static_cast<size_t>(u)] = s;
    }
    two_m = 0.0;
    for (double x : k) two_m += x;
  }
};

WGraph wgraph_from(const Graph& g) {
  WGraph wg;
  wg.n = g.num_nodes();
  wg.adj.resize(static_cast<size_t>(wg.n));
  wg.diag.assign(static_cast<size_t>(wg.n), 0.0);
  for (int u = 0; u < wg.n; ++u) {
    for (const auto& a : g.neighbors(u)) {
      double w = g.edge_weight(a.edge);
      if (w > 0.0) wg.adj[static_cast<size_t>(u)].emplace_back(a.node, w);
    }
  }
  wg.finish_degrees();
  return wg;
}

double modularity_w(const WGraph& wg, const std::vector<int>& comm) {
  std::vector<double> sigma_in(static_cast<size_t>(wg.n), 0.0);
  std::vector<double> sigma_tot(static_cast<size_t>(wg.n), 0.0);
  for (int u = 0; u < wg.n; ++u) {
    int cu = comm[static_cast<size_t>(u)];
    sigma_tot[static_cast<size_t>(cu)] += wg.k[static_cast<size_t>(u)];
    sigma_in[static_cast<size_t>(cu)] += wg.diag[static_cast<size_t>(u)];
    for (const auto& [v, w] : wg.adj[static_cast<size_t>(u)])
      if (comm[static_cast<size_t>(v)] == cu) sigma_in[static_cast<size_t>(cu)] += w;
  }
  double q = 0.0;
  for (int c = 0; c < wg.n; ++c) {
    double tot = sigma_tot[static_cast<size_t>(c)] / wg.two_m;
    q += sigma_in[static_cast<size_t>(c)] / wg.two_m - tot * tot;
  }
  return q;
}

std::vector<int> renumber_first_seen(const std::vector<int>& a, int* num_out) {
  std::vector<int> remap(a.size(), -1);
  std::vector<int> out(a.size());
  int next = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    int c = a[i];
    if (remap[static_cast<size_t>(c)] == -1) remap[static_cast<size_t>(c)] = next++;
    out[i] = remap[static_cast<size_t>(c)];
  }
  if (num_out) *num_out = next;
  return out;
}

/// One phase of local moves starting from singleton communities. Sweeps in a
/// seeded random order until a full sweep makes no move. Each move strictly
/// improves modularity; ties never displace the current community.
std::vector<int> local_move(const WGraph& wg, Rng& rng, bool* any_move) {
  std::vector<int> comm(static_cast<size_t>(wg.n));
  std::iota(comm.begin(), comm.end(), 0);
  std::vector<double> sigma_tot(wg.k);
  std::vector<int> order(comm);
  rng.shuffle(order);
  std::vector<double> w_to(static_cast<size_t>(wg.n), 0.0);
  std::vector<int> touched;
  *any_move = false;
  bool improved = true;
  while (improved) {
    improved = false;
    for (int u : order) {
      int c_old = comm[static_cast<size_t>(u)];
      for (const auto& [v, w] : wg.adj[static_cast<size_t>(u)]) {
        int cv = comm[static_cast<size_t>(v)];
        if (w_to[static_cast<size_t>(cv)] == 0.0) touched.push_back(cv);
        w_to[static_cast<size_t>(cv)] += w;
      }
      sigma_tot[static_cast<size_t>(c_old)] -= wg.k[static_cast<size_t>(u)];
      double ku = wg.k[static_cast<size_t>(u)];
      auto gain = [&](int c) {
        return w_to[static_cast<size_t>(c)] - sigma_tot[static_cast<size_t>(c)] * ku / wg.two_m;
      };
      std::sort(touched.begin(), touched.end());
      int best_c = c_old;
      double best_gain = gain(c_old);
      for (int c : touched) {
        if (c == c_old) continue;
        double gc = gain(c);
        if (gc > best_gain + 1e-12) {
          best_gain = gc;
          best_c = c;
        }
      }
      sigma_tot[static_cast<size_t>(best_c)] += ku;
      comm[static_cast<size_t>(u)] = best_c;
      if (best_c != c_old) {
        improved = true;
        *any_move = true;
      }
      for (int c : touched) w_to[static_cast<size_t>(c)] = 0.0;
      touched.clear();
    }
  }
  return comm;
}

WGraph aggregate(const WGraph& wg, const std::vector<int>& comm, int num_comms) {
  WGraph out;
  out.n = num_comms;
  out.adj.resize(static_cast<size_t>(num_comms));
  out.diag.assign(static_cast<size_t>(num_comms), 0.0);
  for (int u = 0; u < wg.n; ++u)
    out.diag[static_cast<size_t>(comm[static_cast<size_t>(u)])] += wg.diag[static_cast<size_t>(u)];
  // Accumulate ordered pair weights; within-community weight lands on the
  // diagonal (both directions), cross weight once per direction.
  std::vector<std::unordered_map<int, double>> acc(static_cast<size_t>(num_comms));
  for (int u = 0; u < wg.n; ++u) {
    int cu = comm[static_cast<size_t>(u)];
    for (const auto& [v, w] : wg.adj[static_cast<size_t>(u)]) {
      int cv = comm[static_cast<size_t>(v)];
      if (cu == cv)
        out.diag[static_cast<size_t>(cu)] += w;
      else
        acc[static_cast<size_t>(cu)][cv] += w;
    }
  }
  for (int c = 0; c < num_comms; ++c) {
    auto& row = out.adj[static_cast<size_t>(c)];
    row.assign(acc[static_cast<size_t>(c)].begin(), acc[static_cast<size_t>(c)].end());
    std::sort(row.begin(), row.end());
  }
  out.finish_degrees();
  return out;
}

}  // namespace

LouvainResult louvain_detailed(const Graph& g, uint64_t seed) {
  if (g.num_nodes() == 0) throw InputError("louvain: empty graph");
  LouvainResult res;
  res.assignment.resize(static_cast<size_t>(g.num_nodes()));
  std::iota(res.assignment.begin(), res.assignment.end(), 0);
  if (g.num_edges() == 0) return res;  // all singletons, no phases to run

  WGraph wg = wgraph_from(g);
  std::vector<int> total(res.assignment);
  Rng rng(seed);
  std::vector<int> singletons(static_cast<size_t>(wg.n));
  std::iota(singletons.begin(), singletons.end(), 0);
  double q_prev = modularity_w(wg, singletons);

  while (true) {
    bool any_move = false;
    std::vector<int> comm = local_move(wg, rng, &any_move);
    int num_comms = 0;
    comm = renumber_first_seen(comm, &num_comms);
    double q = modularity_w(wg, comm);
    res.phase_modularity.push_back(q);
    if (!any_move) break;
    for (auto& c : total) c = comm[static_cast<size_t>(c)];
    if (q - q_prev < 1e-7) break;
    q_prev = q;
    if (num_comms == 1) break;
    wg = aggregate(wg, comm, num_comms);
  }
  res.assignment = renumber_first_seen(total, nullptr);
  return res;
}

std::vector<int> louvain(const Graph& g, uint64_t seed) {
  return louvain_detailed(g, seed).assignment;
}

CoarseningStep pool_structure(const Graph& g, std::span<const int> assignment) {
  if (assignment.size() != static_cast<size_t>(g.num_nodes()))
    throw InputError("pool_structure: assignment size must match node count");
  for (int c : assignment)
    if (c < 0 || c >= g.num_nodes())
      throw InputError("pool_structure: community id out of range");

  CoarseningStep step;
  // Dense renumber ordered by smallest member node.
  std::vector<int> remap(static_cast<size_t>(g.num_nodes()), -1);
  step.fine_to_coarse.resize(static_cast<size_t>(g.num_nodes()));
  int c = 0;
  for (int v = 0; v < g.num_nodes(); ++v) {
    int a = assignment[static_cast<size_t>(v)];
    if (remap[static_cast<size_t>(a)] == -1) remap[static_cast<size_t>(a)] = c++;
    step.fine_to_coarse[static_cast<size_t>(v)] = remap[static_cast<size_t>(a)];
  }
  step.merge_scores.assign(static_cast<size_t>(c), 1.0);

  std::vector<std::pair<int, int>> coarse_edges;
  std::vector<double> sums, counts;
  std::unordered_map<uint64_t, int> index;
  index.reserve(static_cast<size_t>(g.num_edges()));
  for (int e = 0; e < g.num_edges(); ++e) {
    const auto& [u, v] = g.edge(e);
    int cu = step.fine_to_coarse[static_cast<size_t>(u)];
    int cv = step.fine_to_coarse[static_cast<size_t>(v)];
    if (cu == cv) continue;
    int lo = std::min(cu, cv), hi = std::max(cu, cv);
    uint64_t key = (static_cast<uint64_t>(lo) << 32) | static_cast<uint64_t>(hi);
    auto [it, inserted] = index.emplace(key, static_cast<int>(coarse_edges.size()));
    if (inserted) {
      coarse_edges.emplace_back(lo, hi);
      sums.push_back(0.0);
      counts.push_back(0.0);
    }
    sums[static_cast<size_t>(it->second)] += g.edge_weight(e);
    counts[static_cast<size_t>(it->second)] += 1.0;
  }
  std::vector<double> weights;
  if (g.weighted()) {
    weights.resize(coarse_edges.size());
    for (size_t i = 0; i < weights.size(); ++i) weights[i] = sums[i] / counts[i];
  }
  step.coarse_graph = Graph(c, std::move(coarse_edges), std::move(weights));
  return step;
}

}
