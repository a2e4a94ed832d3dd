#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hgnet/dense.hpp"
#include "hgnet/error.hpp"
#include "hgnet/graph.hpp"
#include "hgnet/rng.hpp"
#include "hgnet/tape.hpp"

namespace hgnet {

// ---------------------------------------------------------------------------
// Graph operators as constant sparse matrices
// ---------------------------------------------------------------------------

/// Symmetric-normalized adjacency with self-loops: D^{-1/2} (A + I) D^{-1/2},
/// where D is the degree of A + I. Edge weights are honored; the self-loop
/// weight is 1. An isolated node keeps its feature row unchanged.
template <typename Real>
std::shared_ptr<const Csr<Real>> gcn_norm(const Graph& g) {
  int n = g.num_nodes();
  std::vector<double> deg(static_cast<size_t>(n), 1.0);  // self-loop
  for (int e = 0; e < g.num_edges(); ++e) {
    const auto& [u, v] = g.edge(e);
    double w = g.edge_weight(e);
    deg[static_cast<size_t>(u)] += w;
    deg[static_cast<size_t>(v)] += w;
  }
  std::vector<std::vector<std::pair<int, Real>>> rows(static_cast<size_t>(n));
  for (int u = 0; u < n; ++u) {
    auto nbrs = g.neighbors(u);
    rows[static_cast<size_t>(u)].reserve(nbrs.size() + 1);
    bool self_done = false;
    auto push_self = [&] {
      rows[static_cast<size_t>(u)].emplace_back(u, static_cast<Real>(1.0 / deg[static_cast<size_t>(u)]));
      self_done = true;
    };
    for (const auto& a : nbrs) {
      if (!self_done && a.node > u) push_self();
      double w = g.edge_weight(a.edge);
      rows[static_cast<size_t>(u)].emplace_back(
          a.node, static_cast<Real>(w / std::sqrt(deg[static_cast<size_t>(u)] * deg[static_cast<size_t>(a.node)])));
    }
    if (!self_done) push_self();
  }
  return std::make_shared<const Csr<Real>>(Csr<Real>::from_rows(n, n, rows));
}

/// Row-normalized in-neighbor operator for one relation: row i holds
/// (j, 1/indeg(i)) for every directed edge j -> i. Targets index rows,
/// sources index columns, so relations may connect different node sets.
template <typename Real>
std::shared_ptr<const Csr<Real>> relation_mean_csr(int num_targets, int num_sources,
                                                   std::span<const std::pair<int, int>> edges) {
  std::vector<std::vector<std::pair<int, Real>>> rows(static_cast<size_t>(num_targets));
  std::vector<int> indeg(static_cast<size_t>(num_targets), 0);
  for (const auto& [src, dst] : edges) {
    if (src < 0 || src >= num_sources || dst < 0 || dst >= num_targets)
      throw InputError("relation_mean_csr: edge endpoint out of range");
    ++indeg[static_cast<size_t>(dst)];
  }
  for (const auto& [src, dst] : edges)
    rows[static_cast<size_t>(dst)].emplace_back(src, Real(1) / static_cast<Real>(indeg[static_cast<size_t>(dst)]));
  return std::make_shared<const Csr<Real>>(Csr<Real>::from_rows(num_targets, num_sources, rows));
}

/// Mean-pool operator over graphs in a batch: row b averages the feature rows
/// of the nodes whose membership[i] == b. Every graph must be non-empty.
template <typename Real>
std::shared_ptr<const Csr<Real>> mean_pool_csr(std::span<const int> membership, int num_graphs) {
  std::vector<int> count(static_cast<size_t>(num_graphs), 0);
  for (int b : membership) {
    if (b < 0 || b >= num_graphs) throw InputError("mean_pool_csr: membership out of range");
    ++count[static_cast<size_t>(b)];
  }
  for (int b = 0; b < num_graphs; ++b)
    if (count[static_cast<size_t>(b)] == 0)
      throw InputError("mean_pool_csr: empty graph in batch");
  std::vector<std::vector<std::pair<int, Real>>> rows(static_cast<size_t>(num_graphs));
  for (int b = 0; b < num_graphs; ++b) rows[static_cast<size_t>(b)].reserve(count[static_cast<size_t>(b)]);
  for (size_t i = 0; i < membership.size(); ++i)
    rows[static_cast<size_t>(membership[i])].emplace_back(
        static_cast<int>(i), Real(1) / static_cast<Real>(count[static_cast<size_t>(membership[i])]));
  return std::make_shared<const Csr<Real>>(
      Csr<Real>::from_rows(num_graphs, static_cast<int>(membership.size()), rows));
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

template <typename Real>
typename Tape<Real>::Id gcn_layer(Tape<Real>& t, std::shared_ptr<const Csr<Real>> norm,
                                  typename Tape<Real>::Id h, typename Tape<Real>::Id w) {
  return t.matmul(t.spmm(std::move(norm), h), w);
}

template <typename Real>
typename Tape<Real>::Id gcn_layer(Tape<Real>& t, const Graph& g, typename Tape<Real>::Id h,
                                  typename Tape<Real>::Id w) {
  return gcn_layer(t, gcn_norm<Real>(g), h, w);
}

/// Relational convolution: out_i = W_self h_i + sum_r mean_{j in N_r(i)} W_r h_j.
/// Relations are directed edge lists over the same node set as h.
template <typename Real>
typename Tape<Real>::Id rgcn_layer(Tape<Real>& t, int num_nodes,
                                   std::span<const std::vector<std::pair<int, int>>> relations,
                                   typename Tape<Real>::Id h,
                                   typename Tape<Real>::Id w_self,
                                   std::span<const typename Tape<Real>::Id> w_rel) {
  if (relations.size() != w_rel.size())
    throw InputError("rgcn_layer: one weight per relation required");
  if (t.rows(h) != num_nodes) throw InputError("rgcn_layer: feature rows must match node count");
  auto out = t.matmul(h, w_self);
  for (size_t r = 0; r < relations.size(); ++r) {
    auto s = relation_mean_csr<Real>(num_nodes, num_nodes, relations[r]);
    out = t.add(out, t.matmul(t.spmm(std::move(s), h), w_rel[r]));
  }
  return out;
}

template <typename Real>
typename Tape<Real>::Id global_mean_pool(Tape<Real>& t, typename Tape<Real>::Id h,
                                         std::span<const int> membership, int num_graphs) {
  if (static_cast<int>(membership.size()) != t.rows(h))
    throw InputError("global_mean_pool: membership size must match feature rows");
  return t.spmm(mean_pool_csr<Real>(membership, num_graphs), h);
}

/// Linear -> ReLU -> Linear with bias rows.
template <typename Real>
typename Tape<Real>::Id mlp2(Tape<Real>& t, typename Tape<Real>::Id x,
                             typename Tape<Real>::Id w1, typename Tape<Real>::Id b1,
                             typename Tape<Real>::Id w2, typename Tape<Real>::Id b2) {
  auto hidden = t.relu(t.add_rowvec(t.matmul(x, w1), b1));
  return t.add_rowvec(t.matmul(hidden, w2), b2);
}

// ---------------------------------------------------------------------------
// Parameters, Adam, checkpoints
// ---------------------------------------------------------------------------

template <typename Real>
struct ParameterStore {
  struct Entry {
    Dense<Real> value;
    Dense<Real> grad;
    Dense<Real> m;
    Dense<Real> v;
    int64_t step = 0;
    bool grad_ready = false;
  };

  std::map<std::string, Entry> params;

  Dense<Real>& add(const std::string& name, Dense<Real> init) {
    if (params.count(name)) throw UsageError("ParameterStore::add: duplicate parameter " + name);
    Entry e;
    e.grad = Dense<Real>(init.rows, init.cols);
    e.m = Dense<Real>(init.rows, init.cols);
    e.v = Dense<Real>(init.rows, init.cols);
    e.value = std::move(init);
    return params.emplace(name, std::move(e)).first->second.value;
  }

  Entry& at(const std::string& name) {
    auto it = params.find(name);
    if (it == params.end()) throw UsageError("ParameterStore: unknown parameter " + name);
    return it->second;
  }
  const Entry& at(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw UsageError("ParameterStore: unknown parameter " + name);
    return it->second;
  }

  void zero_grads() {
    for (auto& [name, e] : params) {
      e.grad.fill(Real(0));
      e.grad_ready = false;
    }
  }

  /// Current values only (used for best-epoch snapshots).
  std::map<std::string, Dense<Real>> snapshot_values() const {
    std::map<std::string, Dense<Real>> out;
    for (const auto& [name, e] : params) out.emplace(name, e.value);
    return out;
  }

  void restore_values(const std::map<std::string, Dense<Real>>& snap) {
    for (auto& [name, e] : params) {
      auto it = snap.find(name);
      if (it == snap.end()) throw UsageError("ParameterStore::restore_values: missing " + name);
      e.value = it->second;
    }
  }
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over every parameter in the store. Requires gradients
/// to have been accumulated for all parameters since the last step. Clears
/// gradients afterwards.
template <typename Real>
void adam_step(ParameterStore<Real>& store, const AdamConfig& cfg) {
  for (auto& [name, e] : store.params)
    if (!e.grad_ready)
      throw UsageError("adam_step: gradient not populated for " + name);
  for (auto& [name, e] : store.params) {
    e.step += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(e.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(e.step));
    for (size_t i = 0; i < e.value.size(); ++i) {
      double g = static_cast<double>(e.grad.v[i]);
      double m = cfg.beta1 * static_cast<double>(e.m.v[i]) + (1.0 - cfg.beta1) * g;
      double v = cfg.beta2 * static_cast<double>(e.v.v[i]) + (1.0 - cfg.beta2) * g * g;
      e.m.v[i] = static_cast<Real>(m);
      e.v.v[i] = static_cast<Real>(v);
      double update = cfg.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
      e.value.v[i] = static_cast<Real>(static_cast<double>(e.value.v[i]) - update);
    }
    e.grad.fill(Real(0));
    e.grad_ready = false;
  }
}

/// Leaf ids for every parameter bound onto a tape for one recording.
template <typename Real>
struct BoundParams {
  std::map<std::string, typename Tape<Real>::Id> ids;

  typename Tape<Real>::Id at(const std::string& name) const {
    auto it = ids.find(name);
    if (it == ids.end()) throw UsageError("BoundParams: unknown parameter " + name);
    return it->second;
  }
};

template <typename Real>
BoundParams<Real> bind_params(Tape<Real>& t, const ParameterStore<Real>& store) {
  BoundParams<Real> out;
  for (const auto& [name, e] : store.params)
    out.ids.emplace(name, t.leaf(e.value, /*requires_grad=*/true));
  return out;
}

/// Accumulate d(loss)/d(param) from a tape that has run backward.
template <typename Real>
void accumulate_grads(const Tape<Real>& t, const BoundParams<Real>& bound,
                      ParameterStore<Real>& store) {
  for (auto& [name, e] : store.params) {
    auto g = t.grad(bound.at(name));
    for (size_t i = 0; i < e.grad.size(); ++i) e.grad.v[i] += g[i];
    e.grad_ready = true;
  }
}

/// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
template <typename Real>
Dense<Real> glorot_uniform(int fan_in, int fan_out, Rng& rng) {
  Dense<Real> w(fan_in, fan_out);
  double a = std::sqrt(6.0 / (static_cast<double>(fan_in) + static_cast<double>(fan_out)));
  for (auto& x : w.v) x = static_cast<Real>((rng.uniform_real() * 2.0 - 1.0) * a);
  return w;
}

// Checkpoints: magic "HGN1", then u32 tensor count, then per tensor
// u32 name length, name bytes, u32 rank, u32 dims, float32 row-major data.
// All integers and floats little-endian.
void save_checkpoint(const std::string& path, const std::map<std::string, FMat>& tensors);
std::map<std::string, FMat> load_checkpoint(const std::string& path);

template <typename Real>
void save_checkpoint_store(const std::string& path, const ParameterStore<Real>& store) {
  std::map<std::string, FMat> tensors;
  for (const auto& [name, e] : store.params) tensors.emplace(name, e.value.template cast<float>());
  save_checkpoint(path, tensors);
}

template <typename Real>
void load_checkpoint_store(const std::string& path, ParameterStore<Real>& store) {
  auto tensors = load_checkpoint(path);
  for (auto& [name, e] : store.params) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw IngestError("checkpoint missing parameter " + name);
    if (it->second.rows != e.value.rows || it->second.cols != e.value.cols)
      throw IngestError("checkpoint shape mismatch for " + name);
    e.value = it->second.template cast<Real>();
  }
  if (tensors.size() != store.params.size())
    throw IngestError("checkpoint contains unexpected extra tensors");
}

}
