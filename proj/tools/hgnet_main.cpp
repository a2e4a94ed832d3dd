// hgnet: dataset generation, hierarchy inspection, and training runs from one
// binary. Data goes to files or stdout; progress and diagnostics to stderr.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "hgnet/models.hpp"
#include "hgnet/report.hpp"
#include "hgnet/version.hpp"

namespace {

using namespace hgnet;

struct TopologySource {
  std::shared_ptr<const Graph> graph;
  std::string id;
  std::vector<std::string> input_files;
};

TopologySource resolve_topology(const std::string& spec, const std::string& road_file) {
  if (spec == "grid16") return {std::make_shared<const Graph>(make_grid(16, 16)), spec, {}};
  if (spec == "grid32") return {std::make_shared<const Graph>(make_grid(32, 32)), spec, {}};
  std::string path;
  if (spec == "euroroad" || spec == "minnesota") {
    if (road_file.empty())
      throw UsageError("topology '" + spec + "' needs --road-file pointing at its edge list");
    path = road_file;
  } else if (spec.rfind("file:", 0) == 0) {
    path = spec.substr(5);
    if (path.empty()) throw UsageError("empty path in file: topology");
  } else {
    throw UsageError("unknown topology '" + spec +
                     "' (expected grid16, grid32, euroroad, minnesota, or file:PATH)");
  }
  RoadNetwork rn = load_road_network(path);
  std::cerr << "hgnet: " << spec << ": " << rn.raw_nodes << " nodes / " << rn.raw_edges
            << " edges raw, largest of " << rn.raw_components << " components kept ("
            << rn.graph.num_nodes() << " nodes, " << rn.graph.num_edges() << " edges)";
  if (rn.dropped_self_loops || rn.dropped_duplicates)
    std::cerr << ", dropped " << rn.dropped_self_loops << " self-loops / "
              << rn.dropped_duplicates << " duplicates";
  std::cerr << "\n";
  return {std::make_shared<const Graph>(std::move(rn.graph)), spec, {path}};
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenArgs {
  std::string topology = "grid16";
  std::string road_file;
  int n = 15000;
  uint64_t seed = 0;
  std::string out;
};

int cmd_gen(const GenArgs& a, const std::vector<std::string>& argv) {
  TopologySource src = resolve_topology(a.topology, a.road_file);
  GraphDataset ds = generate_color_connectivity(src.graph, src.id, a.n, a.seed);
  save_dataset(a.out, ds);
  std::cerr << "hgnet: wrote " << ds.samples.size() << " samples to " << a.out << "\n";

  RunManifest m;
  m.command = argv;
  m.seeds = {a.seed};
  for (const auto& f : src.input_files) m.input_digests[f] = hex64(file_digest(f));
  m.artifacts = {a.out};
  write_manifest(a.out, m);
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string model = "gcn";
  int levels = 2;
  int hidden = 32;
  int mlp_hidden = 128;
  int epochs = 200;
  int batch_size = 32;
  double lr = 1e-3;
  uint64_t seed = 0;
  int cv = 0;
  int jobs = 1;
  std::string data;
  std::string out;
  std::string task = "graph";
  int k_hop = 0;
  int train_per_class = 20;
  int val_count = 500;
  int test_count = 1000;
};

/// Node-task data sources: "sbm:PER_CLASSxCLASSES:P_IN:P_OUT" or
/// "csv:NODES_PATH,EDGES_PATH".
NodeDataset resolve_node_data(const TrainArgs& a, std::vector<std::string>& input_files) {
  if (a.data.rfind("sbm:", 0) == 0) {
    std::string body = a.data.substr(4);
    int per_class = 0, classes = 0;
    double p_in = 0, p_out = 0;
    char x = 0;
    if (std::sscanf(body.c_str(), "%d%c%d:%lf:%lf", &per_class, &x, &classes, &p_in, &p_out) != 5 ||
        x != 'x')
      throw UsageError("bad sbm spec '" + a.data + "' (expected sbm:PER_CLASSxCLASSES:P_IN:P_OUT)");
    return make_homophilous_sbm(per_class, classes, p_in, p_out, derive_seed(a.seed, 0xda7a));
  }
  if (a.data.rfind("csv:", 0) == 0) {
    std::string body = a.data.substr(4);
    auto comma = body.find(',');
    if (comma == std::string::npos)
      throw UsageError("bad csv spec '" + a.data + "' (expected csv:NODES_PATH,EDGES_PATH)");
    std::string nodes = body.substr(0, comma), edges = body.substr(comma + 1);
    input_files.push_back(nodes);
    input_files.push_back(edges);
    return load_node_csv(nodes, edges);
  }
  throw UsageError("node task --data must be sbm:... or csv:... (got '" + a.data + "')");
}

int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv) {
  if (a.out.empty()) throw UsageError("train needs --out");
  if (a.data.empty()) throw UsageError("train needs --data");
  const char* cache_dir = std::getenv("HGNET_CACHE");
  HierarchyCache cache(cache_dir ? cache_dir : "");

  ModelConfig cfg;
  cfg.model = parse_model_kind(a.model);
  cfg.levels_or_layers = a.levels;
  cfg.hidden_dim = a.hidden;
  cfg.mlp_hidden = a.mlp_hidden;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch_size;
  cfg.optimizer.lr = a.lr;
  cfg.seed = a.seed;

  RunManifest manifest;
  manifest.command = argv;
  manifest.seeds = {a.seed};
  std::vector<std::string> input_files;

  if (a.task == "node") {
    if (a.cv > 0) throw UsageError("--cv applies to the graph task only");
    cfg.head = HeadKind::kNodeLinear;
    NodeDataset nd = resolve_node_data(a, input_files);
    const Graph& g = nd.graph;
    cfg.feature_dim = g.has_features() ? g.node_features().cols : 1;
    int max_label = 0;
    for (int y : nd.labels) max_label = std::max(max_label, y);
    cfg.num_classes = max_label + 1;
    SplitCounts counts{a.train_per_class, a.val_count, a.test_count};
    SplitSpec split = sanitized_resample(g, nd.labels, a.k_hop, counts,
                                         derive_seed(a.seed, 0x5917));
    DMat feats = g.has_features() ? g.node_features() : [&] {
      DMat ones(g.num_nodes(), 1);
      ones.fill(1.0);
      return ones;
    }();
    RunResult r = train_node_classifier(g, feats, nd.labels, split, cfg, &cache);
    std::cerr << "hgnet: node run done: best_val=" << r.best_val << " @epoch "
              << r.selected_epoch << ", test=" << r.test_metric << " (" << r.seconds << "s)\n";
    write_text_file(a.out, json_dump(to_json(r)));
    manifest.config = to_json(cfg);
    manifest.artifacts = {a.out};
    for (const auto& f : input_files) manifest.input_digests[f] = hex64(file_digest(f));
    write_manifest(a.out, manifest);
    return 0;
  }
  if (a.task != "graph") throw UsageError("--task must be graph or node");

  cfg.head = HeadKind::kGraphMlp;
  cfg.feature_dim = 1;
  cfg.num_classes = 2;
  GraphDataset ds = load_dataset(a.data);
  input_files.push_back(a.data);
  std::vector<int> labels;
  labels.reserve(ds.samples.size());
  for (const auto& s : ds.samples) labels.push_back(s.label);

  if (a.cv > 0) {
    auto splits = stratified_kfold(labels, a.cv, derive_seed(a.seed, 0xcf01d));
    std::vector<RunResult> results(splits.size());
    std::vector<std::string> errors(splits.size());
    std::atomic<size_t> next{0};
    auto worker = [&] {
      for (size_t f = next.fetch_add(1); f < splits.size(); f = next.fetch_add(1)) {
        ModelConfig fold_cfg = cfg;
        fold_cfg.seed = derive_seed(a.seed, 1000 + f);
        try {
          results[f] = train_graph_classifier(ds, splits[f], fold_cfg, &cache);
          std::cerr << "hgnet: fold " << f << " done: test=" << results[f].test_metric << " ("
                    << results[f].seconds << "s)\n";
        } catch (const std::exception& e) {
          errors[f] = e.what();
        }
      }
    };
    int jobs = std::max(1, std::min<int>(a.jobs, static_cast<int>(splits.size())));
    if (jobs == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    for (size_t f = 0; f < errors.size(); ++f)
      if (!errors[f].empty())
        throw TrainingError("fold " + std::to_string(f) + " failed: " + errors[f]);

    double mean = 0;
    for (const auto& r : results) mean += r.test_metric;
    mean /= static_cast<double>(results.size());
    double var = 0;
    for (const auto& r : results) var += (r.test_metric - mean) * (r.test_metric - mean);
    double sd = std::sqrt(var / static_cast<double>(results.size()));

    nlohmann::json j;
    auto& folds = j["folds"] = nlohmann::json::array();
    for (const auto& r : results) folds.push_back(to_json(r));
    j["mean_test_accuracy"] = round9(mean);
    j["std_test_accuracy"] = round9(sd);
    write_text_file(a.out, json_dump(j));
    write_text_file(a.out + ".csv", format_cv_csv(results));
    std::cerr << "hgnet: cv done: mean test accuracy " << mean << " +- " << sd << "\n";
    for (size_t f = 0; f < results.size(); ++f)
      manifest.seeds.push_back(derive_seed(a.seed, 1000 + f));
    manifest.artifacts = {a.out, a.out + ".csv"};
  } else {
    SplitIndices split = stratified_holdout(labels, 0.8, 0.1, derive_seed(a.seed, 0x5b1));
    RunResult r = train_graph_classifier(ds, split, cfg, &cache);
    std::cerr << "hgnet: run done: best_val=" << r.best_val << " @epoch " << r.selected_epoch
              << ", test=" << r.test_metric << " (" << r.seconds << "s)\n";
    write_text_file(a.out, json_dump(to_json(r)));
    manifest.artifacts = {a.out};
  }

  manifest.config = to_json(cfg);
  for (const auto& f : input_files) manifest.input_digests[f] = hex64(file_digest(f));
  write_manifest(a.out, manifest);
  return 0;
}

// ---------------------------------------------------------------------------
// inspect
// ---------------------------------------------------------------------------

struct InspectArgs {
  std::string topology = "grid16";
  std::string road_file;
  std::string method = "edgepool";
  int levels = 0;  // 0 = coarsen to the top
  uint64_t seed = 0;
  double m = 0.0;  // 0 = skip bound checking
  int sample_sources = 0;
  std::string out;
};

nlohmann::json bounds_json(const BoundsReport& b) {
  nlohmann::json j;
  j["m"] = round9(b.m);
  j["matching_violation_level"] = b.matching_violation_level;
  j["total_nodes"] = b.total_nodes;
  j["node_bound"] = round9(b.node_bound);
  j["nodes_ok"] = b.nodes_ok;
  j["depth"] = b.depth;
  j["depth_bound"] = b.depth_bound;
  j["depth_ok"] = b.depth_ok;
  j["total_intra_edges"] = b.total_intra_edges;
  j["intra_edge_bound"] = round9(b.intra_edge_bound);
  j["intra_edges_ok"] = b.intra_edges_ok;
  j["max_routed_hops"] = b.max_routed_hops;
  j["routing_bound"] = b.routing_bound;
  j["routing_ok"] = b.routing_ok;
  j["ok"] = b.ok();
  return j;
}

int cmd_inspect(const InspectArgs& a, const std::vector<std::string>& argv) {
  if (a.method != "edgepool" && a.method != "louvain")
    throw UsageError("--method must be edgepool or louvain");
  if (a.m != 0.0 && a.method != "edgepool")
    throw UsageError("--m bound checking applies to the edgepool method only");
  if (a.levels < 0) throw UsageError("--levels must be >= 0");
  TopologySource src = resolve_topology(a.topology, a.road_file);
  const Graph& g = *src.graph;
  int rounds = a.levels > 0 ? a.levels : std::max(1, g.num_nodes());

  Hierarchy h;
  if (a.method == "edgepool") {
    // Untrained scorer: constant features, zero weights. Raw scores tie, so
    // the softmax spreads mass by degree and the matching is structural.
    DMat feats(g.num_nodes(), 1);
    feats.fill(1.0);
    std::vector<EdgeScoreParams> params(static_cast<size_t>(rounds));
    for (auto& p : params) p.w = DMat(1, 2);
    h = build_hierarchy_edgepool(g, feats, params, rounds).hierarchy;
  } else {
    h = build_hierarchy_louvain(g, a.seed, rounds);
  }

  HierarchyStats stats = hierarchy_stats(h, a.sample_sources, derive_seed(a.seed, 0x5a3));
  nlohmann::json j;
  j["topology"] = src.id;
  j["method"] = a.method;
  j["depth"] = h.depth();
  auto& sizes = j["per_level_sizes"] = nlohmann::json::array();
  for (const auto& [n, e] : stats.level_sizes) sizes.push_back({n, e});
  j["total_nodes"] = stats.total_nodes;
  j["total_intra_edges"] = stats.total_intra_edges;
  j["total_inter_edges"] = stats.total_inter_edges;
  j["max_routed_hops"] = stats.max_routed_hops;
  if (a.m != 0.0)
    j["bounds"] = bounds_json(verify_bounds(h, a.m, a.sample_sources, derive_seed(a.seed, 0x5a3)));

  if (a.out.empty()) {
    std::cout << json_dump(j);
  } else {
    write_text_file(a.out, json_dump(j));
    RunManifest m;
    m.command = argv;
    m.seeds = {a.seed};
    for (const auto& f : src.input_files) m.input_digests[f] = hex64(file_digest(f));
    m.artifacts = {a.out};
    write_manifest(a.out, m);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> raw_args(argv, argv + argc);

  CLI::App app{"hierarchical graph-net workbench"};
  app.set_version_flag("--version", hgnet::kVersion);
  app.require_subcommand(1);

  GenArgs ga;
  auto* gen = app.add_subcommand("gen", "generate a color-connectivity dataset");
  gen->add_option("--topology", ga.topology,
                  "grid16, grid32, euroroad, minnesota, or file:PATH edge list");
  gen->add_option("--road-file", ga.road_file, "edge-list file backing a named road topology");
  gen->add_option("--n", ga.n, "number of samples (balanced, so must be even)");
  gen->add_option("--seed", ga.seed, "generation seed");
  gen->add_option("--out", ga.out, "output dataset path (JSON Lines)")->required();

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train and evaluate a model");
  train->add_option("--model", ta.model, "gcn, gcn-vn, hgnet-edgepool, or hgnet-louvain");
  train->add_option("--levels,--layers", ta.levels, "hierarchy levels (hgnet) or GCN depth");
  train->add_option("--hidden", ta.hidden, "hidden width");
  train->add_option("--mlp-hidden", ta.mlp_hidden, "graph-head hidden width");
  train->add_option("--epochs", ta.epochs, "training epochs");
  train->add_option("--batch-size", ta.batch_size, "graphs per batch (graph task)");
  train->add_option("--lr", ta.lr, "Adam learning rate");
  train->add_option("--seed", ta.seed, "master seed (init, shuffling, splits)");
  train->add_option("--cv", ta.cv, "stratified k-fold cross-validation (graph task)");
  train->add_option("--jobs", ta.jobs, "worker threads across CV folds");
  train->add_option("--data", ta.data,
                    "dataset: JSONL path (graph task), sbm:PERxCLS:PIN:POUT or "
                    "csv:NODES,EDGES (node task)");
  train->add_option("--out", ta.out, "output JSON path");
  train->add_option("--task", ta.task, "graph or node");
  train->add_option("--k-hop", ta.k_hop, "sanitized split distance (node task)");
  train->add_option("--train-per-class", ta.train_per_class, "node task: train nodes per class");
  train->add_option("--val-count", ta.val_count, "node task: validation nodes");
  train->add_option("--test-count", ta.test_count, "node task: test nodes");

  InspectArgs ia;
  auto* inspect = app.add_subcommand("inspect", "build a hierarchy and report its shape");
  inspect->add_option("--topology", ia.topology,
                      "grid16, grid32, euroroad, minnesota, or file:PATH edge list");
  inspect->add_option("--road-file", ia.road_file, "edge-list file backing a named road topology");
  inspect->add_option("--method", ia.method, "edgepool or louvain");
  inspect->add_option("--levels", ia.levels, "coarsening rounds (0 = until it stops shrinking)");
  inspect->add_option("--seed", ia.seed, "community-detection seed");
  inspect->add_option("--m", ia.m, "check size/depth/routing bounds for this matching factor");
  inspect->add_option("--sample-sources", ia.sample_sources,
                      "sources sampled for the routing diameter (0 = all)");
  inspect->add_option("--out", ia.out, "write the report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen(ga, raw_args);
    if (train->parsed()) return cmd_train(ta, raw_args);
    return cmd_inspect(ia, raw_args);
  } catch (const hgnet::UsageError& e) {
    std::cerr << "hgnet: usage error: " << e.what() << "\n";
    return 2;
  } catch (const hgnet::InputError& e) {
    std::cerr << "hgnet: invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "hgnet: error: " << e.what() << "\n";
    return 1;
  }
}
