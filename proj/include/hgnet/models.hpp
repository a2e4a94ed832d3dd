#pragma once

#include <cstdint>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "hgnet/coarsen.hpp"
#include "hgnet/datasets.hpp"
#include "hgnet/graph.hpp"
#include "hgnet/hierarchy.hpp"
#include "hgnet/nn.hpp"
#include "hgnet/tape.hpp"

namespace hgnet {

enum class ModelKind { kGcn, kGcnVn, kHGNetEdgePool, kHGNetLouvain };
enum class HeadKind { kGraphMlp, kNodeLinear };

const char* to_string(ModelKind m);
const char* to_string(HeadKind h);
ModelKind parse_model_kind(const std::string& name);
bool is_hgnet(ModelKind m);

struct ModelConfig {
  ModelKind model = ModelKind::kGcn;
  int levels_or_layers = 2;  // GCN depth or HGNet level count
  int hidden_dim = 32;
  HeadKind head = HeadKind::kGraphMlp;
  int mlp_hidden = 128;
  int epochs = 200;
  int batch_size = 32;
  uint64_t seed = 0;
  AdamConfig optimizer;
  int feature_dim = 1;
  int num_classes = 2;
  bool record_test_trace = false;  // per-epoch test metric, for replay checks
};

void validate(const ModelConfig& cfg);

struct RunResult {
  std::vector<double> train_loss;
  std::vector<double> val_trace;
  std::vector<double> test_trace;  // filled only when record_test_trace
  int selected_epoch = 0;          // 1-based argmax of val_trace, earliest on ties
  double best_val = 0.0;
  double test_metric = 0.0;
  double seconds = 0.0;
  ModelConfig config;
  uint64_t seed = 0;
};

/// In-memory Louvain hierarchy cache keyed by (graph hash, seed, levels),
/// optionally backed by a directory of JSON files.
class HierarchyCache {
 public:
  explicit HierarchyCache(std::string disk_dir = "") : dir_(std::move(disk_dir)) {}

  std::shared_ptr<const Hierarchy> get_or_build_louvain(const Graph& g, uint64_t seed,
                                                        int levels);

 private:
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<const Hierarchy>> mem_;
  std::string dir_;
};

/// Per-topology constant operators shared across forward passes. For the
/// Louvain variant the whole tower is fixed, so its operators are prebuilt;
/// EdgePool towers depend on the learned scores and are rebuilt per forward.
template <typename Real>
struct ModelContext {
  std::shared_ptr<const Csr<Real>> base_gcn;
  std::shared_ptr<const Csr<Real>> vn_gcn;  // N+1 nodes, virtual node last
  std::shared_ptr<const Hierarchy> louvain_hier;
  std::vector<std::shared_ptr<const Csr<Real>>> lv_gcn;    // coarse-level propagation
  std::vector<std::shared_ptr<const Csr<Real>>> lv_pool;   // mean pool fine -> coarse
  std::vector<std::shared_ptr<const Csr<Real>>> lv_intra;  // down-pass intra relation
  std::vector<std::shared_ptr<const Csr<Real>>> lv_inter;  // down-pass coarse -> fine
};

uint64_t louvain_hierarchy_seed(const ModelConfig& cfg);

template <typename Real>
ModelContext<Real> make_model_context(const Graph& g, const ModelConfig& cfg,
                                      HierarchyCache* cache = nullptr);

/// Parameters for a model configuration, created in a fixed named order so
/// the initialization stream is stable: gcn0..gcnL, pool<l>.{w,b},
/// rgcn<l>.{self,intra,inter}, then the task head.
template <typename Real>
ParameterStore<Real> init_parameters(const ModelConfig& cfg);

template <typename Real>
typename Tape<Real>::Id hgnet_forward(Tape<Real>& t, const Graph& g, typename Tape<Real>::Id x,
                                      const ModelConfig& cfg, const ModelContext<Real>& ctx,
                                      const BoundParams<Real>& p);

template <typename Real>
typename Tape<Real>::Id baseline_forward(Tape<Real>& t, const Graph& g, typename Tape<Real>::Id x,
                                         const ModelConfig& cfg, const ModelContext<Real>& ctx,
                                         const BoundParams<Real>& p);

/// Dispatch to hgnet_forward or baseline_forward. Returns [N x hidden].
template <typename Real>
typename Tape<Real>::Id model_embeddings(Tape<Real>& t, const Graph& g,
                                         typename Tape<Real>::Id x, const ModelConfig& cfg,
                                         const ModelContext<Real>& ctx,
                                         const BoundParams<Real>& p) {
  return is_hgnet(cfg.model) ? hgnet_forward(t, g, x, cfg, ctx, p)
                             : baseline_forward(t, g, x, cfg, ctx, p);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
};

/// Graph-level classification with minibatches of whole graphs, softmax
/// cross-entropy on mlp2(global mean pool), best-on-validation selection.
RunResult train_graph_classifier(const GraphDataset& ds, const SplitIndices& split,
                                 const ModelConfig& cfg, HierarchyCache* cache = nullptr);

/// Transductive node classification: full-graph forward, loss on train nodes,
/// linear head, accuracy on the designated node sets.
RunResult train_node_classifier(const Graph& g, const DMat& features,
                                std::span<const int> labels, const SplitSpec& split,
                                const ModelConfig& cfg, HierarchyCache* cache = nullptr);

/// Per-class shuffle dealt round-robin into k folds; triple i uses fold i as
/// test, fold (i+1) mod k as val, the rest as train. Every class needs at
/// least k samples.
std::vector<SplitIndices> stratified_kfold(std::span<const int> labels, int k, uint64_t seed);

/// Single stratified split by per-class fractions (remainder goes to test).
SplitIndices stratified_holdout(std::span<const int> labels, double train_frac, double val_frac,
                                uint64_t seed);

// ---------------------------------------------------------------------------
// Template definitions
// ---------------------------------------------------------------------------

template <typename Real>
ModelContext<Real> make_model_context(const Graph& g, const ModelConfig& cfg,
                                      HierarchyCache* cache) {
  validate(cfg);
  ModelContext<Real> ctx;
  ctx.base_gcn = gcn_norm<Real>(g);
  if (cfg.model == ModelKind::kGcnVn) {
    int n = g.num_nodes();
    std::vector<std::pair<int, int>> edges(g.edges());
    for (int v = 0; v < n; ++v) edges.emplace_back(v, n);
    std::vector<double> weights;
    if (g.weighted()) {
      weights = g.edge_weights();
      weights.resize(edges.size(), 1.0);
    }
    ctx.vn_gcn = gcn_norm<Real>(Graph(n + 1, std::move(edges), std::move(weights)));
  }
  if (cfg.model == ModelKind::kHGNetLouvain) {
    uint64_t hseed = louvain_hierarchy_seed(cfg);
    if (cache) {
      ctx.louvain_hier = cache->get_or_build_louvain(g, hseed, cfg.levels_or_layers);
    } else {
      ctx.louvain_hier = std::make_shared<const Hierarchy>(
          build_hierarchy_louvain(g, hseed, cfg.levels_or_layers));
    }
    const Hierarchy& h = *ctx.louvain_hier;
    for (int l = 0; l < h.depth(); ++l) {
      const Graph& fine = h.levels[static_cast<size_t>(l)];
      const Graph& coarse = h.levels[static_cast<size_t>(l) + 1];
      const CoarseningStep& step = h.steps[static_cast<size_t>(l)];
      ctx.lv_gcn.push_back(gcn_norm<Real>(coarse));

      std::vector<int> count(static_cast<size_t>(coarse.num_nodes()), 0);
      for (int v = 0; v < fine.num_nodes(); ++v)
        ++count[static_cast<size_t>(step.fine_to_coarse[static_cast<size_t>(v)])];
      std::vector<std::vector<std::pair<int, Real>>> pool_rows(
          static_cast<size_t>(coarse.num_nodes()));
      for (int v = 0; v < fine.num_nodes(); ++v) {
        int c = step.fine_to_coarse[static_cast<size_t>(v)];
        pool_rows[static_cast<size_t>(c)].emplace_back(
            v, Real(1) / static_cast<Real>(count[static_cast<size_t>(c)]));
      }
      ctx.lv_pool.push_back(std::make_shared<const Csr<Real>>(
          Csr<Real>::from_rows(coarse.num_nodes(), fine.num_nodes(), pool_rows)));

      std::vector<std::pair<int, int>> intra;
      intra.reserve(static_cast<size_t>(fine.num_edges()) * 2);
      for (const auto& [u, v] : fine.edges()) {
        intra.emplace_back(u, v);
        intra.emplace_back(v, u);
      }
      ctx.lv_intra.push_back(relation_mean_csr<Real>(fine.num_nodes(), fine.num_nodes(), intra));

      std::vector<std::pair<int, int>> inter;
      inter.reserve(static_cast<size_t>(fine.num_nodes()));
      for (int v = 0; v < fine.num_nodes(); ++v)
        inter.emplace_back(step.fine_to_coarse[static_cast<size_t>(v)], v);
      ctx.lv_inter.push_back(
          relation_mean_csr<Real>(fine.num_nodes(), coarse.num_nodes(), inter));
    }
  }
  return ctx;
}

template <typename Real>
ParameterStore<Real> init_parameters(const ModelConfig& cfg) {
  validate(cfg);
  ParameterStore<Real> store;
  Rng rng(derive_seed(cfg.seed, 0x1217));
  int h = cfg.hidden_dim;
  bool hier = is_hgnet(cfg.model);
  int num_gcn = hier ? cfg.levels_or_layers + 1 : cfg.levels_or_layers;
  for (int i = 0; i < num_gcn; ++i)
    store.add("gcn" + std::to_string(i) + ".w",
              glorot_uniform<Real>(i == 0 ? cfg.feature_dim : h, h, rng));
  if (cfg.model == ModelKind::kHGNetEdgePool) {
    for (int l = 0; l < cfg.levels_or_layers; ++l) {
      store.add("pool" + std::to_string(l) + ".w", glorot_uniform<Real>(1, 2 * h, rng));
      store.add("pool" + std::to_string(l) + ".b", Dense<Real>(1, 1));
    }
  }
  if (hier) {
    for (int l = 0; l < cfg.levels_or_layers; ++l) {
      std::string base = "rgcn" + std::to_string(l) + ".";
      store.add(base + "self", glorot_uniform<Real>(h, h, rng));
      store.add(base + "intra", glorot_uniform<Real>(h, h, rng));
      store.add(base + "inter", glorot_uniform<Real>(h, h, rng));
    }
  }
  if (cfg.head == HeadKind::kGraphMlp) {
    store.add("head.w1", glorot_uniform<Real>(h, cfg.mlp_hidden, rng));
    store.add("head.b1", Dense<Real>(1, cfg.mlp_hidden));
    store.add("head.w2", glorot_uniform<Real>(cfg.mlp_hidden, cfg.num_classes, rng));
    store.add("head.b2", Dense<Real>(1, cfg.num_classes));
  } else {
    store.add("head.w", glorot_uniform<Real>(h, cfg.num_classes, rng));
    store.add("head.b", Dense<Real>(1, cfg.num_classes));
  }
  return store;
}

namespace detail {

inline void warn_degenerate_hierarchy() {
  static std::once_flag flag;
  std::call_once(flag, [] {
    std::cerr << "hgnet: hierarchy depth 0, model degenerates to a single propagation layer\n";
  });
}

/// Down-pass relational layer restricted to the fine rows. Equivalent to an
/// RGCN over the combined fine+coarse node set (intra edges bidirectional
/// among fine nodes, inter edges coarse->fine) with the coarse output rows
/// dropped: coarse nodes receive no messages, so only their inputs matter.
template <typename Real>
typename Tape<Real>::Id down_rgcn(Tape<Real>& t, typename Tape<Real>::Id h_fine,
                                  typename Tape<Real>::Id h_coarse,
                                  const std::shared_ptr<const Csr<Real>>& intra,
                                  const std::shared_ptr<const Csr<Real>>& inter,
                                  typename Tape<Real>::Id w_self,
                                  typename Tape<Real>::Id w_intra,
                                  typename Tape<Real>::Id w_inter) {
  auto out = t.matmul(h_fine, w_self);
  out = t.add(out, t.matmul(t.spmm(intra, h_fine), w_intra));
  out = t.add(out, t.matmul(t.spmm(inter, h_coarse), w_inter));
  return out;
}

template <typename Real>
std::shared_ptr<const Csr<Real>> intra_mean_csr(const Graph& g) {
  std::vector<std::pair<int, int>> intra;
  intra.reserve(static_cast<size_t>(g.num_edges()) * 2);
  for (const auto& [u, v] : g.edges()) {
    intra.emplace_back(u, v);
    intra.emplace_back(v, u);
  }
  return relation_mean_csr<Real>(g.num_nodes(), g.num_nodes(), intra);
}

}  // namespace detail

template <typename Real>
typename Tape<Real>::Id hgnet_forward(Tape<Real>& t, const Graph& g, typename Tape<Real>::Id x,
                                      const ModelConfig& cfg, const ModelContext<Real>& ctx,
                                      const BoundParams<Real>& p) {
  if (!is_hgnet(cfg.model)) throw InputError("hgnet_forward: config is not an HGNet variant");
  if (t.rows(x) != g.num_nodes())
    throw InputError("hgnet_forward: feature rows must match node count");
  int levels = cfg.levels_or_layers;
  auto gcn_w = [&](int i) { return p.at("gcn" + std::to_string(i) + ".w"); };

  std::vector<typename Tape<Real>::Id> feats;  // up-pass output per level
  feats.push_back(t.relu(gcn_layer(t, ctx.base_gcn ? ctx.base_gcn : gcn_norm<Real>(g), x, gcn_w(0))));

  if (cfg.model == ModelKind::kHGNetEdgePool) {
    std::vector<Graph> graphs;
    graphs.push_back(g);
    std::vector<std::shared_ptr<const Csr<Real>>> intra, inter;
    for (int l = 0; l < levels; ++l) {
      const Graph& cur = graphs.back();
      if (cur.num_nodes() <= 1 || cur.num_edges() == 0) break;
      std::string base = "pool" + std::to_string(l) + ".";
      auto scores = edgepool_scores(t, cur, feats.back(), p.at(base + "w"), p.at(base + "b"));
      std::vector<double> score_vals;
      {
        auto sv = t.value(scores);
        score_vals.assign(sv.begin(), sv.end());
      }
      std::vector<int> matching = greedy_maximal_matching(cur, score_vals);
      auto [step, pooled] = contract(t, cur, feats.back(), matching, scores);
      intra.push_back(detail::intra_mean_csr<Real>(cur));
      std::vector<std::pair<int, int>> inter_edges;
      inter_edges.reserve(static_cast<size_t>(cur.num_nodes()));
      for (int v = 0; v < cur.num_nodes(); ++v)
        inter_edges.emplace_back(step.fine_to_coarse[static_cast<size_t>(v)], v);
      inter.push_back(relation_mean_csr<Real>(cur.num_nodes(), step.coarse_graph.num_nodes(),
                                              inter_edges));
      feats.push_back(t.relu(gcn_layer(t, step.coarse_graph, pooled, gcn_w(l + 1))));
      graphs.push_back(step.coarse_graph);
    }
    int depth = static_cast<int>(graphs.size()) - 1;
    if (depth == 0) {
      detail::warn_degenerate_hierarchy();
      return feats[0];
    }
    auto top = feats[static_cast<size_t>(depth)];
    for (int l = depth - 1; l >= 0; --l) {
      std::string base = "rgcn" + std::to_string(l) + ".";
      top = detail::down_rgcn(t, feats[static_cast<size_t>(l)], top, intra[static_cast<size_t>(l)],
                              inter[static_cast<size_t>(l)], p.at(base + "self"),
                              p.at(base + "intra"), p.at(base + "inter"));
      if (l > 0) top = t.relu(top);
    }
    return top;
  }

  // Louvain variant: fixed tower from the context.
  if (!ctx.louvain_hier) throw InputError("hgnet_forward: missing prebuilt hierarchy");
  const Hierarchy& hier = *ctx.louvain_hier;
  int depth = std::min(levels, hier.depth());
  for (int l = 0; l < depth; ++l) {
    auto pooled = t.spmm(ctx.lv_pool[static_cast<size_t>(l)], feats.back());
    feats.push_back(t.relu(gcn_layer(t, ctx.lv_gcn[static_cast<size_t>(l)], pooled, gcn_w(l + 1))));
  }
  if (depth == 0) {
    detail::warn_degenerate_hierarchy();
    return feats[0];
  }
  auto top = feats[static_cast<size_t>(depth)];
  for (int l = depth - 1; l >= 0; --l) {
    std::string base = "rgcn" + std::to_string(l) + ".";
    top = detail::down_rgcn(t, feats[static_cast<size_t>(l)], top,
                            ctx.lv_intra[static_cast<size_t>(l)],
                            ctx.lv_inter[static_cast<size_t>(l)], p.at(base + "self"),
                            p.at(base + "intra"), p.at(base + "inter"));
    if (l > 0) top = t.relu(top);
  }
  return top;
}

template <typename Real>
typename Tape<Real>::Id baseline_forward(Tape<Real>& t, const Graph& g,
                                         typename Tape<Real>::Id x, const ModelConfig& cfg,
                                         const ModelContext<Real>& ctx,
                                         const BoundParams<Real>& p) {
  if (is_hgnet(cfg.model)) throw InputError("baseline_forward: config is an HGNet variant");
  if (t.rows(x) != g.num_nodes())
    throw InputError("baseline_forward: feature rows must match node count");
  auto gcn_w = [&](int i) { return p.at("gcn" + std::to_string(i) + ".w"); };
  int k = cfg.levels_or_layers;

  if (cfg.model == ModelKind::kGcn) {
    auto norm = ctx.base_gcn ? ctx.base_gcn : gcn_norm<Real>(g);
    auto h = x;
    for (int i = 0; i < k; ++i) h = t.relu(gcn_layer(t, norm, h, gcn_w(i)));
    return h;
  }

  // Virtual node: appended as the last row with a zero feature, included in
  // propagation, dropped from the output.
  std::shared_ptr<const Csr<Real>> norm = ctx.vn_gcn;
  if (!norm) {
    std::vector<std::pair<int, int>> edges(g.edges());
    for (int v = 0; v < g.num_nodes(); ++v) edges.emplace_back(v, g.num_nodes());
    std::vector<double> weights;
    if (g.weighted()) {
      weights = g.edge_weights();
      weights.resize(edges.size(), 1.0);
    }
    norm = gcn_norm<Real>(Graph(g.num_nodes() + 1, std::move(edges), std::move(weights)));
  }
  auto h = t.concat_rows(x, t.constant_fill(1, t.cols(x), Real(0)));
  for (int i = 0; i < k; ++i) h = t.relu(gcn_layer(t, norm, h, gcn_w(i)));
  return t.slice_rows(h, 0, g.num_nodes());
}

}
