#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "hgnet/models.hpp"

namespace hgnet {

namespace {

std::string cache_key(const Graph& g, uint64_t seed, int levels) {
  std::ostringstream os;
  os << "louvain-" << std::hex << g.content_hash() << std::dec << "-s" << seed << "-l" << levels;
  return os.str();
}

nlohmann::json graph_to_json(const Graph& g) {
  nlohmann::json j;
  j["n"] = g.num_nodes();
  auto& edges = j["edges"] = nlohmann::json::array();
  for (const auto& [u, v] : g.edges()) edges.push_back({u, v});
  if (g.weighted()) j["weights"] = g.edge_weights();
  return j;
}

Graph graph_from_json(const nlohmann::json& j) {
  std::vector<std::pair<int, int>> edges;
  for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
  std::vector<double> weights;
  if (j.contains("weights")) weights = j.at("weights").get<std::vector<double>>();
  return Graph(j.at("n").get<int>(), std::move(edges), std::move(weights));
}

void hierarchy_to_file(const Hierarchy& h, const std::string& path) {
  nlohmann::json j;
  j["method"] = to_string(h.method);
  auto& levels = j["levels"] = nlohmann::json::array();
  for (const Graph& g : h.levels) levels.push_back(graph_to_json(g));
  auto& f2c = j["fine_to_coarse"] = nlohmann::json::array();
  auto& scores = j["merge_scores"] = nlohmann::json::array();
  for (const CoarseningStep& s : h.steps) {
    f2c.push_back(s.fine_to_coarse);
    scores.push_back(s.merge_scores);
  }
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) return;  // cache writes are best-effort
    out << j.dump() << "\n";
    if (!out) {
      std::remove(tmp.c_str());
      return;
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) std::remove(tmp.c_str());
}

std::shared_ptr<const Hierarchy> hierarchy_from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return nullptr;
  nlohmann::json j;
  in >> j;
  auto h = std::make_shared<Hierarchy>();
  std::string method = j.at("method").get<std::string>();
  if (method != "louvain") throw IngestError("cached hierarchy has unexpected method " + method);
  h->method = CoarsenMethod::kLouvain;
  for (const auto& gj : j.at("levels")) h->levels.push_back(graph_from_json(gj));
  if (h->levels.empty()) throw IngestError("cached hierarchy has no levels");
  const auto& f2c = j.at("fine_to_coarse");
  const auto& scores = j.at("merge_scores");
  if (f2c.size() + 1 != h->levels.size() || scores.size() != f2c.size())
    throw IngestError("cached hierarchy step count mismatch");
  for (size_t l = 0; l < f2c.size(); ++l) {
    CoarseningStep step{f2c[l].get<std::vector<int>>(), scores[l].get<std::vector<double>>(),
                        h->levels[l + 1]};
    const Graph& fine = h->levels[l];
    const Graph& coarse = h->levels[l + 1];
    if (static_cast<int>(step.fine_to_coarse.size()) != fine.num_nodes() ||
        static_cast<int>(step.merge_scores.size()) != coarse.num_nodes())
      throw IngestError("cached hierarchy step size mismatch");
    for (int v = 0; v < fine.num_nodes(); ++v) {
      int c = step.fine_to_coarse[static_cast<size_t>(v)];
      if (c < 0 || c >= coarse.num_nodes())
        throw IngestError("cached hierarchy assignment out of range");
      h->inter_edges.push_back({static_cast<int>(l), v, c});
    }
    h->steps.push_back(std::move(step));
  }
  return h;
}

}  // namespace

std::shared_ptr<const Hierarchy> HierarchyCache::get_or_build_louvain(const Graph& g,
                                                                      uint64_t seed, int levels) {
  std::string key = cache_key(g, seed, levels);
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = mem_.find(key);
    if (it != mem_.end()) return it->second;
  }

  std::shared_ptr<const Hierarchy> built;
  std::string disk_path;
  if (!dir_.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);  // best-effort
    disk_path = (std::filesystem::path(dir_) / (key + ".json")).string();
    try {
      built = hierarchy_from_file(disk_path);
    } catch (const std::exception& e) {
      std::cerr << "hgnet: ignoring unreadable hierarchy cache entry " << disk_path << ": "
                << e.what() << "\n";
      built = nullptr;
    }
  }
  if (!built) {
    built = std::make_shared<const Hierarchy>(build_hierarchy_louvain(g, seed, levels));
    if (!disk_path.empty()) hierarchy_to_file(*built, disk_path);
  }

  std::lock_guard<std::mutex> lock(mu_);
  auto [it, inserted] = mem_.emplace(key, built);
  return it->second;  // first writer wins if two threads raced
}

}
