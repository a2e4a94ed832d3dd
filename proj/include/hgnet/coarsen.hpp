#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "hgnet/dense.hpp"
#include "hgnet/graph.hpp"
#include "hgnet/tape.hpp"

namespace hgnet {

/// One level of coarsening: the map from fine node to coarse node, the score
/// each coarse node's feature sum was scaled by (1 for carried-forward
/// nodes), and the coarse graph itself.
struct CoarseningStep {
  std::vector<int> fine_to_coarse;
  std::vector<double> merge_scores;
  Graph coarse_graph;
};

/// Learnable edge-scoring parameters: w is [1 x 2d] applied to the
/// concatenated endpoint features, b is the scalar bias.
struct EdgeScoreParams {
  DMat w;
  double b = 0.0;
};

// ---------------------------------------------------------------------------
// Edge scoring (differentiable, recorded on a tape)
// ---------------------------------------------------------------------------

/// Ids of the intermediate and final edge-score tensors.
///
/// directed is [2E x 1], ordered as the graph's adjacency: for each node u
/// ascending, one entry per neighbor v ascending. Entry (u, v) holds
/// 0.5 + softmax over u's outgoing raw scores, so each value lies in
/// (0.5, 1.5) and a degree-1 node's single entry is exactly 1.5.
///
/// undirected is [E x 1] in edge-id order: the mean of the two directed
/// entries of each edge.
template <typename Real>
struct EdgeScoreIds {
  typename Tape<Real>::Id directed;
  typename Tape<Real>::Id undirected;
};

template <typename Real>
EdgeScoreIds<Real> edgepool_scores_full(Tape<Real>& t, const Graph& g,
                                        typename Tape<Real>::Id x,
                                        typename Tape<Real>::Id w, typename Tape<Real>::Id b);

/// The undirected per-edge score tensor [E x 1].
template <typename Real>
typename Tape<Real>::Id edgepool_scores(Tape<Real>& t, const Graph& g,
                                        typename Tape<Real>::Id x,
                                        typename Tape<Real>::Id w, typename Tape<Real>::Id b) {
  return edgepool_scores_full(t, g, x, w, b).undirected;
}

// ---------------------------------------------------------------------------
// Matching and contraction
// ---------------------------------------------------------------------------

/// Greedy maximal matching by descending score. Ties break on the smaller
/// (min endpoint, max endpoint) pair. Returns the chosen edge ids in
/// admission order. scores.size() must equal g.num_edges().
std::vector<int> greedy_maximal_matching(const Graph& g, std::span<const double> scores);

/// Structure half of edge contraction. Matched edges become coarse nodes
/// 0..M-1 in matching order; unmatched fine nodes follow in ascending id
/// order. merge_scores take the matched edge's score; carried nodes get 1.
/// The coarse graph has an edge wherever any fine edge joins two distinct
/// coarse nodes (unweighted).
CoarseningStep contract_structure(const Graph& g, std::span<const int> matching,
                                  std::span<const double> scores);

/// Full contraction: structure plus pooled features on the tape. A merged
/// coarse node's features are score * (x_u + x_v); carried nodes keep their
/// row. Returns the step and the [C x d] coarse feature tensor.
template <typename Real>
std::pair<CoarseningStep, typename Tape<Real>::Id> contract(
    Tape<Real>& t, const Graph& g, typename Tape<Real>::Id x, std::span<const int> matching,
    typename Tape<Real>::Id scores);

// ---------------------------------------------------------------------------
// Louvain
// ---------------------------------------------------------------------------

/// Weighted modularity of a full partition. assignment[v] is the community of
/// v; every node must be assigned. Works on weighted graphs; an unweighted
/// edge counts 1.
double modularity(const Graph& g, std::span<const int> assignment);

struct LouvainResult {
  std::vector<int> assignment;          // community per node, dense ids
  std::vector<double> phase_modularity; // modularity after each local-move phase
};

/// Two-phase Louvain: seeded random sweep order for local moves, then graph
/// aggregation, repeated until a phase improves modularity by less than 1e-7
/// or no node moves. Deterministic for a fixed seed. Community ids are dense
/// and ordered by smallest member node.
LouvainResult louvain_detailed(const Graph& g, uint64_t seed);
std::vector<int> louvain(const Graph& g, uint64_t seed);

/// Structure half of community pooling: communities renumbered densely by
/// smallest member, coarse edge wherever a fine edge crosses communities with
/// weight = mean of the crossing fine edge weights. merge_scores are all 1.
CoarseningStep pool_structure(const Graph& g, std::span<const int> assignment);

/// Community pooling with mean features on the tape.
template <typename Real>
std::pair<CoarseningStep, typename Tape<Real>::Id> pool_by_communities(
    Tape<Real>& t, const Graph& g, typename Tape<Real>::Id x, std::span<const int> assignment);

// ---------------------------------------------------------------------------
// Template definitions
// ---------------------------------------------------------------------------

template <typename Real>
EdgeScoreIds<Real> edgepool_scores_full(Tape<Real>& t, const Graph& g,
                                        typename Tape<Real>::Id x,
                                        typename Tape<Real>::Id w, typename Tape<Real>::Id b) {
  if (t.rows(x) != g.num_nodes())
    throw InputError("edgepool_scores: feature rows must match node count");
  if (t.rows(w) != 1 || t.cols(w) != 2 * t.cols(x))
    throw InputError("edgepool_scores: w must be [1 x 2d]");
  if (t.rows(b) != 1 || t.cols(b) != 1) throw InputError("edgepool_scores: b must be scalar");
  int n = g.num_nodes();
  int e2 = 2 * g.num_edges();

  // Directed entries in adjacency order: segment u covers u's neighbors.
  std::vector<int> src, dst, seg;
  src.reserve(static_cast<size_t>(e2));
  dst.reserve(static_cast<size_t>(e2));
  seg.reserve(static_cast<size_t>(n) + 1);
  seg.push_back(0);
  // Position of the directed entry (u -> v) for each edge, from each side.
  std::vector<std::pair<int, int>> dir_pos(static_cast<size_t>(g.num_edges()), {-1, -1});
  for (int u = 0; u < n; ++u) {
    for (const auto& a : g.neighbors(u)) {
      int pos = static_cast<int>(src.size());
      src.push_back(u);
      dst.push_back(a.node);
      bool u_is_min = g.edge(a.edge).first == u;
      (u_is_min ? dir_pos[static_cast<size_t>(a.edge)].first
                : dir_pos[static_cast<size_t>(a.edge)].second) = pos;
    }
    seg.push_back(static_cast<int>(src.size()));
  }

  auto xu = t.gather_rows(x, src);
  auto xv = t.gather_rows(x, dst);
  auto raw = t.add_rowvec(t.matmul(t.concat_cols(xu, xv), t.transpose(w)), b);  // [2E x 1]
  auto soft = t.segment_softmax(raw, std::move(seg));
  auto directed = t.affine(soft, Real(1), Real(0.5));

  // Undirected score: mean of the two directed entries per edge.
  std::vector<std::vector<std::pair<int, Real>>> rows(static_cast<size_t>(g.num_edges()));
  for (int e = 0; e < g.num_edges(); ++e) {
    rows[static_cast<size_t>(e)] = {{dir_pos[static_cast<size_t>(e)].first, Real(0.5)},
                                    {dir_pos[static_cast<size_t>(e)].second, Real(0.5)}};
  }
  auto mean_mat = std::make_shared<const Csr<Real>>(
      Csr<Real>::from_rows(g.num_edges(), e2, rows));
  auto undirected = t.spmm(std::move(mean_mat), directed);
  return {directed, undirected};
}

template <typename Real>
std::pair<CoarseningStep, typename Tape<Real>::Id> contract(
    Tape<Real>& t, const Graph& g, typename Tape<Real>::Id x, std::span<const int> matching,
    typename Tape<Real>::Id scores) {
  if (t.rows(scores) != g.num_edges() || t.cols(scores) != 1)
    throw InputError("contract: scores must be [E x 1]");
  std::vector<double> score_vals(static_cast<size_t>(g.num_edges()));
  {
    auto sv = t.value(scores);
    for (size_t i = 0; i < score_vals.size(); ++i) score_vals[i] = static_cast<double>(sv[i]);
  }
  CoarseningStep step = contract_structure(g, matching, score_vals);
  int c = step.coarse_graph.num_nodes();
  int m = static_cast<int>(matching.size());

  // Sum preimage feature rows, then scale merged rows by their edge score.
  std::vector<std::vector<std::pair<int, Real>>> rows(static_cast<size_t>(c));
  for (int v = 0; v < g.num_nodes(); ++v)
    rows[static_cast<size_t>(step.fine_to_coarse[static_cast<size_t>(v)])].emplace_back(v, Real(1));
  auto pool = std::make_shared<const Csr<Real>>(Csr<Real>::from_rows(c, g.num_nodes(), rows));
  auto sums = t.spmm(std::move(pool), x);

  typename Tape<Real>::Id scale;
  if (m == 0) {
    scale = t.constant_fill(c, 1, Real(1));
  } else {
    auto matched_scores = t.gather_rows(scores, std::vector<int>(matching.begin(), matching.end()));
    scale = (c == m) ? matched_scores
                     : t.concat_rows(matched_scores, t.constant_fill(c - m, 1, Real(1)));
  }
  return {std::move(step), t.scale_rows(sums, scale)};
}

template <typename Real>
std::pair<CoarseningStep, typename Tape<Real>::Id> pool_by_communities(
    Tape<Real>& t, const Graph& g, typename Tape<Real>::Id x, std::span<const int> assignment) {
  if (t.rows(x) != g.num_nodes())
    throw InputError("pool_by_communities: feature rows must match node count");
  CoarseningStep step = pool_structure(g, assignment);
  int c = step.coarse_graph.num_nodes();
  std::vector<int> count(static_cast<size_t>(c), 0);
  for (int v = 0; v < g.num_nodes(); ++v)
    ++count[static_cast<size_t>(step.fine_to_coarse[static_cast<size_t>(v)])];
  std::vector<std::vector<std::pair<int, Real>>> rows(static_cast<size_t>(c));
  for (int v = 0; v < g.num_nodes(); ++v) {
    int cv = step.fine_to_coarse[static_cast<size_t>(v)];
    rows[static_cast<size_t>(cv)].emplace_back(v, Real(1) / static_cast<Real>(count[static_cast<size_t>(cv)]));
  }
  auto pool = std::make_shared<const Csr<Real>>(Csr<Real>::from_rows(c, g.num_nodes(), rows));
  return {std::move(step), t.spmm(std::move(pool), x)};
}

}
