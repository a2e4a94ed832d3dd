#include "hgnet/models.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace hgnet {

const char* to_string(ModelKind m) {
  switch (m) {
    case ModelKind::kGcn: return "gcn";
    case ModelKind::kGcnVn: return "gcn-vn";
    case ModelKind::kHGNetEdgePool: return "hgnet-edgepool";
    case ModelKind::kHGNetLouvain: return "hgnet-louvain";
  }
  return "?";
}

const char* to_string(HeadKind h) {
  return h == HeadKind::kGraphMlp ? "graph-mlp" : "node-linear";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "gcn") return ModelKind::kGcn;
  if (name == "gcn-vn") return ModelKind::kGcnVn;
  if (name == "hgnet-edgepool") return ModelKind::kHGNetEdgePool;
  if (name == "hgnet-louvain") return ModelKind::kHGNetLouvain;
  throw UsageError("unknown model '" + name +
                   "' (expected gcn, gcn-vn, hgnet-edgepool, or hgnet-louvain)");
}

bool is_hgnet(ModelKind m) {
  return m == ModelKind::kHGNetEdgePool || m == ModelKind::kHGNetLouvain;
}

void validate(const ModelConfig& cfg) {
  if (cfg.levels_or_layers < 1) throw InputError("model config: levels/layers must be >= 1");
  if (cfg.hidden_dim < 1) throw InputError("model config: hidden_dim must be >= 1");
  if (cfg.mlp_hidden < 1) throw InputError("model config: mlp_hidden must be >= 1");
  if (cfg.epochs < 1) throw InputError("model config: epochs must be >= 1");
  if (cfg.batch_size < 1) throw InputError("model config: batch_size must be >= 1");
  if (cfg.feature_dim < 1) throw InputError("model config: feature_dim must be >= 1");
  if (cfg.num_classes < 2) throw InputError("model config: num_classes must be >= 2");
  if (cfg.optimizer.lr <= 0) throw InputError("model config: learning rate must be positive");
}

uint64_t louvain_hierarchy_seed(const ModelConfig& cfg) {
  return derive_seed(cfg.seed, 0x10a1);
}

namespace {

using Real = float;
using Id = Tape<Real>::Id;

/// Argmax per row; ties go to the lowest class index.
int argmax_row(std::span<const Real> row) {
  int best = 0;
  for (int j = 1; j < static_cast<int>(row.size()); ++j)
    if (row[static_cast<size_t>(j)] > row[static_cast<size_t>(best)]) best = j;
  return best;
}

struct EpochSelection {
  int selected_epoch = 0;  // 1-based
  double best_val = -1.0;
};

void consider_epoch(EpochSelection& sel, int epoch_1based, double val_metric) {
  if (val_metric > sel.best_val) {  // strict: earliest epoch wins ties
    sel.best_val = val_metric;
    sel.selected_epoch = epoch_1based;
  }
}

DMat features_for_sample(const Graph& topology, const DatasetSample& s) {
  auto colors = sample_colors(topology, s);
  DMat x(topology.num_nodes(), 1);
  for (int v = 0; v < topology.num_nodes(); ++v)
    x(v, 0) = colors[static_cast<size_t>(v)] ? 1.0 : 0.0;
  return x;
}

}  // namespace

RunResult train_graph_classifier(const GraphDataset& ds, const SplitIndices& split,
                                 const ModelConfig& cfg, HierarchyCache* cache) {
  auto t_start = std::chrono::steady_clock::now();
  validate(cfg);
  if (!ds.topology) throw InputError("train_graph_classifier: dataset has no topology");
  if (cfg.head != HeadKind::kGraphMlp)
    throw InputError("train_graph_classifier: graph task requires the graph-mlp head");
  if (split.train.empty() || split.val.empty() || split.test.empty())
    throw InputError("train_graph_classifier: all three splits must be non-empty");
  int n_samples = static_cast<int>(ds.samples.size());
  auto check_ids = [&](std::span<const int> ids) {
    for (int i : ids)
      if (i < 0 || i >= n_samples)
        throw InputError("train_graph_classifier: split index out of range");
  };
  check_ids(split.train);
  check_ids(split.val);
  check_ids(split.test);

  const Graph& g = *ds.topology;
  auto ctx = make_model_context<Real>(g, cfg, cache);
  auto store = init_parameters<Real>(cfg);
  Rng order_rng(derive_seed(cfg.seed, 0x0e90));

  // Precompute per-sample features once; they are tiny ([N x 1]).
  std::vector<FMat> feats;
  feats.reserve(ds.samples.size());
  for (const auto& s : ds.samples) feats.push_back(features_for_sample(g, s).cast<float>());

  Tape<Real> tape;

  // Forward a list of samples through the model and the pooled head; returns
  // the [B x num_classes] logits id. Per-graph embeddings are pooled to one
  // row each before concatenation so batch assembly stays O(B * hidden).
  std::vector<int> pool_all(static_cast<size_t>(g.num_nodes()), 0);
  auto batch_logits = [&](const BoundParams<Real>& bound, std::span<const int> ids) {
    std::vector<Id> rows;
    rows.reserve(ids.size());
    for (int i : ids) {
      auto x = tape.leaf(feats[static_cast<size_t>(i)]);
      auto h = model_embeddings(tape, g, x, cfg, ctx, bound);
      rows.push_back(global_mean_pool(tape, h, pool_all, 1));
    }
    Id stacked = rows[0];
    for (size_t r = 1; r < rows.size(); ++r) stacked = tape.concat_rows(stacked, rows[r]);
    return mlp2(tape, stacked, bound.at("head.w1"), bound.at("head.b1"), bound.at("head.w2"),
                bound.at("head.b2"));
  };

  auto accuracy_on = [&](std::span<const int> ids) {
    int correct = 0;
    size_t done = 0;
    while (done < ids.size()) {
      size_t take = std::min(ids.size() - done, static_cast<size_t>(cfg.batch_size));
      tape.reset();
      auto bound = bind_params(tape, store);
      auto logits = batch_logits(bound, ids.subspan(done, take));
      auto vals = tape.value(logits);
      for (size_t r = 0; r < take; ++r) {
        int pred = argmax_row(vals.subspan(r * static_cast<size_t>(cfg.num_classes),
                                           static_cast<size_t>(cfg.num_classes)));
        if (pred == ds.samples[static_cast<size_t>(ids[done + r])].label) ++correct;
      }
      done += take;
    }
    return static_cast<double>(correct) / static_cast<double>(ids.size());
  };

  RunResult res;
  res.config = cfg;
  res.seed = cfg.seed;
  EpochSelection sel;
  std::map<std::string, Dense<Real>> best_snapshot = store.snapshot_values();
  std::vector<int> order(split.train.begin(), split.train.end());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    int loss_batches = 0;
    size_t done = 0;
    while (done < order.size()) {
      size_t take = std::min(order.size() - done, static_cast<size_t>(cfg.batch_size));
      std::span<const int> ids(order.data() + done, take);
      tape.reset();
      auto bound = bind_params(tape, store);
      auto logits = batch_logits(bound, ids);
      std::vector<int> labels(take);
      for (size_t r = 0; r < take; ++r)
        labels[r] = ds.samples[static_cast<size_t>(ids[r])].label;
      auto loss = tape.softmax_cross_entropy(logits, labels);
      double loss_val = static_cast<double>(tape.value(loss)[0]);
      if (!std::isfinite(loss_val))
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch + 1));
      loss_sum += loss_val;
      ++loss_batches;
      tape.backward(loss);
      store.zero_grads();
      accumulate_grads(tape, bound, store);
      adam_step(store, cfg.optimizer);
      done += take;
    }
    res.train_loss.push_back(loss_sum / static_cast<double>(loss_batches));
    double val_acc = accuracy_on(split.val);
    res.val_trace.push_back(val_acc);
    if (cfg.record_test_trace) res.test_trace.push_back(accuracy_on(split.test));
    if (val_acc > sel.best_val) best_snapshot = store.snapshot_values();
    consider_epoch(sel, epoch + 1, val_acc);
  }

  store.restore_values(best_snapshot);
  res.selected_epoch = sel.selected_epoch;
  res.best_val = sel.best_val;
  res.test_metric = accuracy_on(split.test);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return res;
}

RunResult train_node_classifier(const Graph& g, const DMat& features,
                                std::span<const int> labels, const SplitSpec& split,
                                const ModelConfig& cfg, HierarchyCache* cache) {
  auto t_start = std::chrono::steady_clock::now();
  validate(cfg);
  if (cfg.head != HeadKind::kNodeLinear)
    throw InputError("train_node_classifier: node task requires the node-linear head");
  if (features.rows != g.num_nodes())
    throw InputError("train_node_classifier: feature rows must match node count");
  if (features.cols != cfg.feature_dim)
    throw InputError("train_node_classifier: feature dim mismatch with config");
  if (static_cast<int>(labels.size()) != g.num_nodes())
    throw InputError("train_node_classifier: one label per node required");
  if (split.train.empty() || split.val.empty() || split.test.empty())
    throw InputError("train_node_classifier: all three splits must be non-empty");
  {
    std::vector<char> seen(static_cast<size_t>(g.num_nodes()), 0);
    for (auto* part : {&split.train, &split.val, &split.test}) {
      for (int v : *part) {
        if (v < 0 || v >= g.num_nodes())
          throw InputError("train_node_classifier: split node out of range");
        if (seen[static_cast<size_t>(v)])
          throw InputError("train_node_classifier: splits overlap at node " + std::to_string(v));
        seen[static_cast<size_t>(v)] = 1;
      }
    }
  }
  for (int v : split.train) {
    int y = labels[static_cast<size_t>(v)];
    if (y < 0 || y >= cfg.num_classes)
      throw InputError("train_node_classifier: label out of range on train node " +
                       std::to_string(v));
  }

  auto ctx = make_model_context<Real>(g, cfg, cache);
  auto store = init_parameters<Real>(cfg);
  FMat x_all = features.cast<float>();

  Tape<Real> tape;
  auto node_logits = [&](const BoundParams<Real>& bound) {
    auto x = tape.leaf(x_all);
    auto h = model_embeddings(tape, g, x, cfg, ctx, bound);
    return tape.add_rowvec(tape.matmul(h, bound.at("head.w")), bound.at("head.b"));
  };

  auto accuracy_on = [&](std::span<const Real> logit_vals, std::span<const int> nodes) {
    int correct = 0;
    for (int v : nodes) {
      int pred = argmax_row(logit_vals.subspan(
          static_cast<size_t>(v) * static_cast<size_t>(cfg.num_classes),
          static_cast<size_t>(cfg.num_classes)));
      if (pred == labels[static_cast<size_t>(v)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(nodes.size());
  };

  RunResult res;
  res.config = cfg;
  res.seed = cfg.seed;
  EpochSelection sel;
  std::map<std::string, Dense<Real>> best_snapshot = store.snapshot_values();
  std::vector<int> train_ids(split.train.begin(), split.train.end());
  std::vector<int> train_labels;
  train_labels.reserve(train_ids.size());
  for (int v : train_ids) train_labels.push_back(labels[static_cast<size_t>(v)]);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    tape.reset();
    auto bound = bind_params(tape, store);
    auto logits = node_logits(bound);
    auto loss = tape.softmax_cross_entropy(tape.gather_rows(logits, train_ids), train_labels);
    double loss_val = static_cast<double>(tape.value(loss)[0]);
    if (!std::isfinite(loss_val))
      throw TrainingError("non-finite loss at epoch " + std::to_string(epoch + 1));
    res.train_loss.push_back(loss_val);
    tape.backward(loss);
    store.zero_grads();
    accumulate_grads(tape, bound, store);
    adam_step(store, cfg.optimizer);

    // Metrics reflect the post-update parameters.
    tape.reset();
    auto eval_bound = bind_params(tape, store);
    auto eval_logits = node_logits(eval_bound);
    auto vals = tape.value(eval_logits);
    double val_acc = accuracy_on(vals, split.val);
    res.val_trace.push_back(val_acc);
    if (cfg.record_test_trace) res.test_trace.push_back(accuracy_on(vals, split.test));
    if (val_acc > sel.best_val) best_snapshot = store.snapshot_values();
    consider_epoch(sel, epoch + 1, val_acc);
  }

  store.restore_values(best_snapshot);
  res.selected_epoch = sel.selected_epoch;
  res.best_val = sel.best_val;
  {
    tape.reset();
    auto bound = bind_params(tape, store);
    auto logits = node_logits(bound);
    res.test_metric = accuracy_on(tape.value(logits), split.test);
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return res;
}

std::vector<SplitIndices> stratified_kfold(std::span<const int> labels, int k, uint64_t seed) {
  // Fold i tests on itself and validates on fold i+1, so k = 2 would leave
  // no training folds at all.
  if (k < 3) throw InputError("stratified_kfold: k must be >= 3");
  std::map<int, std::vector<int>> by_class;
  for (size_t i = 0; i < labels.size(); ++i)
    by_class[labels[i]].push_back(static_cast<int>(i));
  Rng rng(seed);
  std::vector<std::vector<int>> folds(static_cast<size_t>(k));
  for (auto& [label, ids] : by_class) {
    if (static_cast<int>(ids.size()) < k)
      throw InputError("stratified_kfold: class " + std::to_string(label) + " has fewer than " +
                       std::to_string(k) + " samples");
    rng.shuffle(ids);
    for (size_t i = 0; i < ids.size(); ++i)
      folds[i % static_cast<size_t>(k)].push_back(ids[i]);
  }
  std::vector<SplitIndices> out(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) {
    int val_fold = (i + 1) % k;
    SplitIndices& s = out[static_cast<size_t>(i)];
    s.test = folds[static_cast<size_t>(i)];
    s.val = folds[static_cast<size_t>(val_fold)];
    for (int f = 0; f < k; ++f)
      if (f != i && f != val_fold)
        s.train.insert(s.train.end(), folds[static_cast<size_t>(f)].begin(),
                       folds[static_cast<size_t>(f)].end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    std::sort(s.test.begin(), s.test.end());
  }
  return out;
}

SplitIndices stratified_holdout(std::span<const int> labels, double train_frac, double val_frac,
                                uint64_t seed) {
  if (train_frac <= 0 || val_frac <= 0 || train_frac + val_frac >= 1.0)
    throw InputError("stratified_holdout: fractions must be positive and sum below 1");
  std::map<int, std::vector<int>> by_class;
  for (size_t i = 0; i < labels.size(); ++i)
    by_class[labels[i]].push_back(static_cast<int>(i));
  Rng rng(seed);
  SplitIndices out;
  for (auto& [label, ids] : by_class) {
    rng.shuffle(ids);
    size_t n = ids.size();
    size_t n_train = static_cast<size_t>(std::floor(train_frac * static_cast<double>(n)));
    size_t n_val = static_cast<size_t>(std::floor(val_frac * static_cast<double>(n)));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= n)
      throw InputError("stratified_holdout: class " + std::to_string(label) +
                       " too small for the requested fractions");
    for (size_t i = 0; i < n; ++i) {
      if (i < n_train) out.train.push_back(ids[i]);
      else if (i < n_train + n_val) out.val.push_back(ids[i]);
      else out.test.push_back(ids[i]);
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}
