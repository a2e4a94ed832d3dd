#include "hgnet/datasets.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "hgnet/error.hpp"
#include "hgnet/rng.hpp"

namespace hgnet {

std::vector<uint8_t> sample_colors(const Graph& topology, const DatasetSample& s) {
  std::vector<uint8_t> colors(static_cast<size_t>(topology.num_nodes()), 0);
  for (int v : s.red) {
    if (v < 0 || v >= topology.num_nodes())
      throw InputError("sample_colors: red node out of range");
    colors[static_cast<size_t>(v)] = 1;
  }
  return colors;
}

std::optional<int> verify_label(const Graph& g, std::span<const uint8_t> colors) {
  if (colors.size() != static_cast<size_t>(g.num_nodes()))
    throw InputError("verify_label: one color per node required");
  std::vector<int> red;
  for (int v = 0; v < g.num_nodes(); ++v)
    if (colors[static_cast<size_t>(v)]) red.push_back(v);
  if (red.empty()) return std::nullopt;
  ComponentLabeling comps = connected_components(g, red);
  if (comps.num_components == 1) return 1;
  if (comps.num_components == 2) return 0;
  return std::nullopt;
}

GraphDataset generate_color_connectivity(std::shared_ptr<const Graph> topology,
                                         std::string topology_id, int n_samples, uint64_t seed,
                                         int64_t attempt_cap_factor) {
  if (!topology) throw InputError("generate_color_connectivity: null topology");
  const Graph& g = *topology;
  if (g.num_nodes() < 2) throw InputError("generate_color_connectivity: topology too small");
  if (connected_components(g).num_components != 1)
    throw InputError("generate_color_connectivity: topology must be connected");
  if (n_samples <= 0 || n_samples % 2 != 0)
    throw InputError("generate_color_connectivity: n_samples must be positive and even");

  int target = g.num_nodes() / 2;
  if (target < 2)
    throw InputError("generate_color_connectivity: topology too small for two walkers");

  GraphDataset ds;
  ds.topology_id = std::move(topology_id);
  ds.topology = std::move(topology);
  ds.samples.reserve(static_cast<size_t>(n_samples));

  int want = n_samples / 2;
  int have[2] = {0, 0};
  int64_t cap = attempt_cap_factor * static_cast<int64_t>(n_samples);
  for (int64_t attempt = 0; attempt < cap && (have[0] < want || have[1] < want); ++attempt) {
    uint64_t s = derive_seed(seed, static_cast<uint64_t>(attempt));
    Rng rng(s);
    int a = rng.uniform_int(0, g.num_nodes() - 1);
    int b = rng.uniform_int(0, g.num_nodes() - 2);
    if (b >= a) ++b;
    std::vector<int> red = random_walk_color(g, a, b, target, derive_seed(s, 0x77a1c));
    std::vector<uint8_t> colors(static_cast<size_t>(g.num_nodes()), 0);
    for (int v : red) colors[static_cast<size_t>(v)] = 1;
    std::optional<int> label = verify_label(g, colors);
    if (!label || have[*label] >= want) continue;
    ++have[*label];
    ds.samples.push_back(DatasetSample{std::move(red), *label, s});
  }
  if (have[0] < want || have[1] < want) {
    int starved = have[0] < want ? 0 : 1;
    throw GenerationError("generate_color_connectivity: attempt cap hit with label " +
                          std::to_string(starved) + " bucket at " +
                          std::to_string(have[starved]) + "/" + std::to_string(want));
  }
  return ds;
}

Graph make_grid(int rows, int cols) {
  if (rows < 1 || cols < 1) throw InputError("make_grid: dimensions must be at least 1");
  std::vector<std::pair<int, int>> edges;
  edges.reserve(static_cast<size_t>(rows) * (cols - 1) + static_cast<size_t>(cols) * (rows - 1));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      int v = r * cols + c;
      if (c + 1 < cols) edges.emplace_back(v, v + 1);
      if (r + 1 < rows) edges.emplace_back(v, v + cols);
    }
  }
  return Graph(rows * cols, std::move(edges));
}

RoadNetwork load_road_network(const std::string& path) {
  EdgeListGraph raw = read_edge_list_file(path);
  if (raw.graph.num_nodes() == 0) throw IngestError("road network file has no nodes: " + path);
  RoadNetwork out;
  out.raw_nodes = raw.graph.num_nodes();
  out.raw_edges = raw.graph.num_edges();
  out.dropped_self_loops = raw.dropped_self_loops;
  out.dropped_duplicates = raw.dropped_duplicates;
  out.raw_components = connected_components(raw.graph).num_components;
  out.graph = largest_component(raw.graph).graph;
  return out;
}

SplitSpec sanitized_resample(const Graph& g, std::span<const int> labels, int k,
                             const SplitCounts& counts, uint64_t seed) {
  if (labels.size() != static_cast<size_t>(g.num_nodes()))
    throw InputError("sanitized_resample: one label per node required");
  if (k < 0) throw InputError("sanitized_resample: k must be non-negative");
  if (counts.train_per_class < 0 || counts.val < 0 || counts.test < 0)
    throw InputError("sanitized_resample: negative counts");
  int num_classes = 0;
  for (int c : labels) {
    if (c < 0) throw InputError("sanitized_resample: negative label");
    num_classes = std::max(num_classes, c + 1);
  }

  SplitSpec out;
  out.k = k;
  out.seed = seed;
  std::vector<char> blocked(static_cast<size_t>(g.num_nodes()), 0);
  Rng rng(seed);

  // Closed k-ball around v joins the blocked set. The BFS keeps its own
  // visited marks: a node blocked by an earlier ball must still be expanded
  // through, or nodes just beyond it would escape this ball.
  std::vector<char> seen(static_cast<size_t>(g.num_nodes()), 0);
  std::vector<int> frontier, next, touched;
  auto block_ball = [&](int v) {
    blocked[static_cast<size_t>(v)] = 1;
    seen[static_cast<size_t>(v)] = 1;
    touched.assign(1, v);
    frontier.assign(1, v);
    for (int d = 0; d < k; ++d) {
      next.clear();
      for (int u : frontier) {
        for (const auto& a : g.neighbors(u)) {
          if (!seen[static_cast<size_t>(a.node)]) {
            seen[static_cast<size_t>(a.node)] = 1;
            touched.push_back(a.node);
            blocked[static_cast<size_t>(a.node)] = 1;
            next.push_back(a.node);
          }
        }
      }
      frontier.swap(next);
    }
    for (int u : touched) seen[static_cast<size_t>(u)] = 0;
  };

  std::vector<int> eligible;
  auto draw = [&](int want_class, const char* split_name) {
    eligible.clear();
    for (int v = 0; v < g.num_nodes(); ++v) {
      if (blocked[static_cast<size_t>(v)]) continue;
      if (want_class >= 0 && labels[static_cast<size_t>(v)] != want_class) continue;
      eligible.push_back(v);
    }
    if (eligible.empty())
      throw GenerationError(std::string("sanitized_resample: pool exhausted while filling ") +
                            split_name);
    int v = eligible[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(eligible.size()) - 1))];
    block_ball(v);
    return v;
  };

  try {
    for (int c = 0; c < num_classes; ++c)
      for (int i = 0; i < counts.train_per_class; ++i) out.train.push_back(draw(c, "train"));
    for (int i = 0; i < counts.val; ++i) out.val.push_back(draw(-1, "val"));
    for (int i = 0; i < counts.test; ++i) out.test.push_back(draw(-1, "test"));
  } catch (const GenerationError& e) {
    int got = static_cast<int>(out.train.size() + out.val.size() + out.test.size());
    int wanted = counts.train_per_class * num_classes + counts.val + counts.test;
    throw GenerationError(std::string(e.what()) + " (selected " + std::to_string(got) + " of " +
                          std::to_string(wanted) + ")");
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

NodeDataset make_homophilous_sbm(int n_per_class, int classes, double p_in, double p_out,
                                 uint64_t seed) {
  if (n_per_class < 1 || classes < 1) throw InputError("make_homophilous_sbm: empty blocks");
  if (!(p_in > p_out)) throw InputError("make_homophilous_sbm: p_in must exceed p_out");
  if (!(p_in > 0.0 && p_in <= 1.0) || !(p_out >= 0.0))
    throw InputError("make_homophilous_sbm: probabilities out of range");
  int n = n_per_class * classes;

  NodeDataset out;
  out.labels.resize(static_cast<size_t>(n));
  for (int v = 0; v < n; ++v) out.labels[static_cast<size_t>(v)] = v / n_per_class;

  DMat features(n, classes);
  Rng feat_rng(derive_seed(seed, 1));
  for (int v = 0; v < n; ++v)
    for (int c = 0; c < classes; ++c)
      features(v, c) = (out.labels[static_cast<size_t>(v)] == c ? 1.0 : 0.0) +
                       feat_rng.normal(0.0, 0.1);

  Rng edge_rng(derive_seed(seed, 2));
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double p = out.labels[static_cast<size_t>(i)] == out.labels[static_cast<size_t>(j)] ? p_in
                                                                                          : p_out;
      if (edge_rng.uniform_real() < p) edges.emplace_back(i, j);
    }
  }
  out.graph = Graph(n, std::move(edges), {}, std::move(features));
  return out;
}

void save_dataset(const std::string& path, const GraphDataset& ds) {
  if (!ds.topology) throw InputError("save_dataset: null topology");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IngestError("cannot open for writing: " + path);
  nlohmann::json topo;
  topo["n"] = ds.topology->num_nodes();
  auto edges = nlohmann::json::array();
  for (const auto& [u, v] : ds.topology->edges()) edges.push_back({u, v});
  topo["edges"] = std::move(edges);
  topo["id"] = ds.topology_id;
  nlohmann::json header;
  header["topology"] = std::move(topo);
  f << header.dump() << "\n";
  for (const DatasetSample& s : ds.samples) {
    nlohmann::json line;
    line["label"] = s.label;
    line["red"] = s.red;
    line["seed"] = s.seed;
    line["topology_id"] = ds.topology_id;
    f << line.dump() << "\n";
  }
  if (!f) throw IngestError("write failed: " + path);
}

GraphDataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IngestError("cannot open dataset: " + path);
  std::string line;
  if (!std::getline(f, line)) throw IngestError("dataset is empty: " + path);
  GraphDataset ds;
  try {
    nlohmann::json header = nlohmann::json::parse(line);
    const auto& topo = header.at("topology");
    int n = topo.at("n").get<int>();
    std::vector<std::pair<int, int>> edges;
    for (const auto& e : topo.at("edges"))
      edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    ds.topology = std::make_shared<const Graph>(n, std::move(edges));
    ds.topology_id = topo.value("id", std::string("unknown"));
    int line_no = 1;
    while (std::getline(f, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line);
      DatasetSample s;
      s.label = j.at("label").get<int>();
      if (s.label != 0 && s.label != 1)
        throw IngestError("dataset line " + std::to_string(line_no) + ": label must be 0 or 1");
      s.red = j.at("red").get<std::vector<int>>();
      s.seed = j.at("seed").get<uint64_t>();
      for (int v : s.red)
        if (v < 0 || v >= n)
          throw IngestError("dataset line " + std::to_string(line_no) + ": red node out of range");
      ds.samples.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IngestError("malformed dataset " + path + ": " + e.what());
  }
  return ds;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    size_t a = s.find_first_not_of(" \t");
    size_t b = s.find_last_not_of(" \t");
    s = a == std::string::npos ? "" : s.substr(a, b - a + 1);
  }
  return out;
}

}  // namespace

NodeDataset load_node_csv(const std::string& nodes_path, const std::string& edges_path) {
  std::ifstream nf(nodes_path);
  if (!nf) throw IngestError("cannot open nodes csv: " + nodes_path);
  std::unordered_map<std::string, int> node_id;
  std::unordered_map<std::string, int> label_id;
  std::vector<int> labels;
  std::vector<std::vector<double>> feats;
  std::string line;
  bool first = true;
  int feat_dim = -1;
  while (std::getline(nf, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (first && !fields.empty() && fields[0] == "id") {
      first = false;
      continue;
    }
    first = false;
    if (fields.size() < 2)
      throw IngestError("nodes csv: expected at least id,label: " + line);
    if (!node_id.emplace(fields[0], static_cast<int>(labels.size())).second)
      throw IngestError("nodes csv: duplicate node id " + fields[0]);
    auto [lit, _] = label_id.emplace(fields[1], static_cast<int>(label_id.size()));
    labels.push_back(lit->second);
    std::vector<double> row;
    for (size_t i = 2; i < fields.size(); ++i) {
      try {
        size_t used = 0;
        row.push_back(std::stod(fields[i], &used));
        if (used != fields[i].size()) throw std::invalid_argument(fields[i]);
      } catch (const std::exception&) {
        throw IngestError("nodes csv: bad feature value '" + fields[i] + "'");
      }
    }
    if (feat_dim == -1) feat_dim = static_cast<int>(row.size());
    if (static_cast<int>(row.size()) != feat_dim)
      throw IngestError("nodes csv: inconsistent feature arity");
    feats.push_back(std::move(row));
  }
  int n = static_cast<int>(labels.size());
  if (n == 0) throw IngestError("nodes csv is empty: " + nodes_path);

  DMat features(n, feat_dim > 0 ? feat_dim : 1);
  for (int v = 0; v < n; ++v) {
    if (feat_dim > 0)
      for (int c = 0; c < feat_dim; ++c) features(v, c) = feats[static_cast<size_t>(v)][static_cast<size_t>(c)];
    else
      features(v, 0) = 1.0;
  }

  std::ifstream ef(edges_path);
  if (!ef) throw IngestError("cannot open edges csv: " + edges_path);
  std::vector<std::pair<int, int>> edges;
  std::unordered_set<uint64_t> seen;
  first = true;
  while (std::getline(ef, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (first && !fields.empty() && fields[0] == "src") {
      first = false;
      continue;
    }
    first = false;
    if (fields.size() != 2) throw IngestError("edges csv: expected src,dst: " + line);
    auto a = node_id.find(fields[0]);
    auto b = node_id.find(fields[1]);
    if (a == node_id.end() || b == node_id.end())
      throw IngestError("edges csv: unknown node id in: " + line);
    if (a->second == b->second) continue;
    int lo = std::min(a->second, b->second), hi = std::max(a->second, b->second);
    uint64_t key = (static_cast<uint64_t>(lo) << 32) | static_cast<uint64_t>(hi);
    if (seen.insert(key).second) edges.emplace_back(lo, hi);
  }
  NodeDataset out;
  out.graph = Graph(n, std::move(edges), {}, std::move(features));
  out.labels = std::move(labels);
  return out;
}

}
