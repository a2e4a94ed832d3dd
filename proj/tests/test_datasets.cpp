#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "hgnet/datasets.hpp"
#include "hgnet/rng.hpp"

#include "oracle_helpers.hpp"

using hgnet::DatasetSample;
using hgnet::GenerationError;
using hgnet::Graph;
using hgnet::GraphDataset;
using hgnet::InputError;
using hgnet::Rng;
using hgnet::SplitCounts;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("grids") {
  TEST_CASE("grid sizes and degree structure") {
    Graph g16 = hgnet::make_grid(16, 16);
    CHECK(g16.num_nodes() == 256);
    CHECK(g16.num_edges() == 480);
    Graph g32 = hgnet::make_grid(32, 32);
    CHECK(g32.num_nodes() == 1024);
    CHECK(g32.num_edges() == 1984);
    // Corners have degree 2, edges 3, interior 4.
    CHECK(g16.degree(0) == 2);
    CHECK(g16.degree(15) == 2);
    CHECK(g16.degree(1) == 3);
    CHECK(g16.degree(17) == 4);
    // Node (r, c) = r*cols + c connects to its 4-neighborhood.
    auto nbrs = g16.neighbors(17);
    std::vector<int> ids;
    for (const auto& a : nbrs) ids.push_back(a.node);
    CHECK(ids == std::vector<int>{1, 16, 18, 33});
    CHECK(oracle::brute_num_components(g16.num_nodes(), g16.edges()) == 1);
  }

  TEST_CASE("degenerate grids") {
    Graph line = hgnet::make_grid(1, 5);
    CHECK(line.num_nodes() == 5);
    CHECK(line.num_edges() == 4);
    CHECK_THROWS_AS(hgnet::make_grid(0, 3), InputError);
  }
}

TEST_SUITE("color labels") {
  TEST_CASE("one island, two islands, and rejections") {
    Graph g = hgnet::make_grid(1, 6);  // path 0-1-2-3-4-5
    std::vector<uint8_t> one{1, 1, 1, 0, 0, 0};
    CHECK(hgnet::verify_label(g, one) == 1);
    std::vector<uint8_t> two{1, 1, 0, 0, 1, 1};
    CHECK(hgnet::verify_label(g, two) == 0);
    std::vector<uint8_t> three{1, 0, 1, 0, 1, 0};
    CHECK_FALSE(hgnet::verify_label(g, three).has_value());
    std::vector<uint8_t> none(6, 0);
    CHECK_FALSE(hgnet::verify_label(g, none).has_value());
    std::vector<uint8_t> wrong_size{1, 1};
    CHECK_THROWS_AS(hgnet::verify_label(g, wrong_size), InputError);
  }

  TEST_CASE("sample colors expand sorted red ids to a 0/1 mask") {
    Graph g = hgnet::make_grid(1, 4);
    DatasetSample s;
    s.red = {1, 3};
    auto colors = hgnet::sample_colors(g, s);
    CHECK(colors == std::vector<uint8_t>{0, 1, 0, 1});
    DatasetSample bad;
    bad.red = {1, 9};
    CHECK_THROWS_AS(hgnet::sample_colors(g, bad), InputError);
  }
}

TEST_SUITE("color-connectivity generation") {
  TEST_CASE("samples are balanced, half-red, label-verified, and deterministic") {
    auto grid = std::make_shared<const Graph>(hgnet::make_grid(8, 8));
    auto ds = hgnet::generate_color_connectivity(grid, "grid8", 60, 5);
    REQUIRE(static_cast<int>(ds.samples.size()) == 60);
    int ones = 0;
    for (const auto& s : ds.samples) {
      CHECK(static_cast<int>(s.red.size()) == 32);  // floor(64/2)
      CHECK(std::is_sorted(s.red.begin(), s.red.end()));
      auto colors = hgnet::sample_colors(*grid, s);
      auto label = hgnet::verify_label(*grid, colors);
      REQUIRE(label.has_value());
      CHECK(*label == s.label);
      ones += s.label;
    }
    CHECK(ones == 30);

    auto again = hgnet::generate_color_connectivity(grid, "grid8", 60, 5);
    REQUIRE(again.samples.size() == ds.samples.size());
    for (size_t i = 0; i < ds.samples.size(); ++i) {
      CHECK(again.samples[i].red == ds.samples[i].red);
      CHECK(again.samples[i].label == ds.samples[i].label);
      CHECK(again.samples[i].seed == ds.samples[i].seed);
    }
  }

  TEST_CASE("two-by-two grid with two red nodes yields each label") {
    // Any 2 of 4 nodes: adjacent pair = one island, diagonal = two.
    auto grid = std::make_shared<const Graph>(hgnet::make_grid(2, 2));
    auto ds = hgnet::generate_color_connectivity(grid, "grid2", 2, 1);
    REQUIRE(ds.samples.size() == 2);
    CHECK(ds.samples[0].label + ds.samples[1].label == 1);
  }

  TEST_CASE("invalid requests are rejected") {
    auto grid = std::make_shared<const Graph>(hgnet::make_grid(2, 2));
    CHECK_THROWS_AS(hgnet::generate_color_connectivity(grid, "g", 3, 1), InputError);
    auto disconnected = std::make_shared<const Graph>(
        Graph(4, {{0, 1}, {2, 3}}));
    CHECK_THROWS_AS(hgnet::generate_color_connectivity(disconnected, "g", 2, 1), InputError);
  }

  TEST_CASE("an impossible bucket hits the attempt cap and names the starved label") {
    // On a complete graph any two red nodes are adjacent, so every sample is
    // one island and the two-island bucket can never fill.
    auto k4 = std::make_shared<const Graph>(
        Graph(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}));
    try {
      hgnet::generate_color_connectivity(k4, "k4", 4, 9, 50);
      FAIL("expected GenerationError");
    } catch (const GenerationError& e) {
      CHECK(std::string(e.what()).find("0") != std::string::npos);
    }
  }
}

TEST_SUITE("dataset serialization") {
  TEST_CASE("JSONL round trip is lossless and byte-identical across saves") {
    auto grid = std::make_shared<const Graph>(hgnet::make_grid(4, 4));
    auto ds = hgnet::generate_color_connectivity(grid, "grid4", 20, 3);
    std::string p1 = temp_path("hgnet_ds_a.jsonl");
    std::string p2 = temp_path("hgnet_ds_b.jsonl");
    hgnet::save_dataset(p1, ds);
    auto back = hgnet::load_dataset(p1);
    CHECK(back.topology_id == ds.topology_id);
    CHECK(back.topology->content_hash() == ds.topology->content_hash());
    REQUIRE(back.samples.size() == ds.samples.size());
    for (size_t i = 0; i < ds.samples.size(); ++i) {
      CHECK(back.samples[i].red == ds.samples[i].red);
      CHECK(back.samples[i].label == ds.samples[i].label);
      CHECK(back.samples[i].seed == ds.samples[i].seed);
    }
    hgnet::save_dataset(p2, back);
    CHECK(slurp(p1) == slurp(p2));
    // Line count: one topology header plus one line per sample.
    std::string text = slurp(p1);
    CHECK(std::count(text.begin(), text.end(), '\n') == 21);
    std::remove(p1.c_str());
    std::remove(p2.c_str());
  }

  TEST_CASE("malformed dataset files are rejected") {
    std::string p = temp_path("hgnet_ds_bad.jsonl");
    auto write = [&](const std::string& text) {
      std::ofstream out(p, std::ios::binary);
      out << text;
    };
    write("");  // no topology line
    CHECK_THROWS_AS(hgnet::load_dataset(p), hgnet::IngestError);
    write("{\"nope\":1}\n");
    CHECK_THROWS_AS(hgnet::load_dataset(p), hgnet::IngestError);
    write("not json\n");
    CHECK_THROWS_AS(hgnet::load_dataset(p), hgnet::IngestError);
    // Red id out of range.
    write("{\"topology\":{\"edges\":[[0,1]],\"id\":\"t\",\"n\":2}}\n"
          "{\"label\":1,\"red\":[5],\"seed\":1,\"topology_id\":\"t\"}\n");
    CHECK_THROWS_AS(hgnet::load_dataset(p), hgnet::IngestError);
    // Bad label value.
    write("{\"topology\":{\"edges\":[[0,1]],\"id\":\"t\",\"n\":2}}\n"
          "{\"label\":7,\"red\":[0],\"seed\":1,\"topology_id\":\"t\"}\n");
    CHECK_THROWS_AS(hgnet::load_dataset(p), hgnet::IngestError);
    CHECK_THROWS_AS(hgnet::load_dataset(p + ".missing"), hgnet::IngestError);
    std::remove(p.c_str());
  }
}

TEST_SUITE("road ingest") {
  TEST_CASE("edge list file reduces to its largest component") {
    std::string p = temp_path("hgnet_road.txt");
    {
      std::ofstream out(p);
      out << "# comment line\n";
      out << "a b\nb c\nc a\n";   // triangle (largest component)
      out << "x y\n";             // 2-node component
      out << "a a\n";             // self loop dropped
      out << "b a\n";             // duplicate dropped
    }
    auto road = hgnet::load_road_network(p);
    CHECK(road.raw_nodes == 5);
    CHECK(road.raw_edges == 4);
    CHECK(road.raw_components == 2);
    CHECK(road.dropped_self_loops == 1);
    CHECK(road.dropped_duplicates == 1);
    CHECK(road.graph.num_nodes() == 3);
    CHECK(road.graph.num_edges() == 3);
    std::remove(p.c_str());
  }
}

TEST_SUITE("sanitized splits") {
  TEST_CASE("every cross-pair exceeds k hops, checked exhaustively") {
    // Sparse blocks (mean degree ~1.7) leave room for hop-separated sampling:
    // 340 selections, each blocking its closed 2-ball, must fit in 1000 nodes.
    auto sbm = hgnet::make_homophilous_sbm(500, 2, 0.003, 0.0004, 42);
    REQUIRE(sbm.graph.num_nodes() == 1000);
    for (int k : {1, 2}) {
      SplitCounts counts;
      counts.train_per_class = 20;
      counts.val = 100;
      counts.test = 200;
      auto split = hgnet::sanitized_resample(sbm.graph, sbm.labels, k, counts, 7);
      CHECK(static_cast<int>(split.train.size()) == 40);
      CHECK(static_cast<int>(split.val.size()) == 100);
      CHECK(static_cast<int>(split.test.size()) == 200);
      CHECK(split.k == k);
      // Train respects per-class quotas.
      int c0 = 0;
      for (int v : split.train) c0 += sbm.labels[static_cast<size_t>(v)] == 0 ? 1 : 0;
      CHECK(c0 == 20);
      CHECK(std::is_sorted(split.train.begin(), split.train.end()));
      CHECK(std::is_sorted(split.val.begin(), split.val.end()));
      CHECK(std::is_sorted(split.test.begin(), split.test.end()));
      // Exhaustive pairwise check over all selected nodes via BFS from each.
      std::vector<int> all;
      all.insert(all.end(), split.train.begin(), split.train.end());
      all.insert(all.end(), split.val.begin(), split.val.end());
      all.insert(all.end(), split.test.begin(), split.test.end());
      std::set<int> uniq(all.begin(), all.end());
      REQUIRE(uniq.size() == all.size());
      int violations = 0;
      for (int v : all) {
        auto dist = hgnet::bfs_distances(sbm.graph, v);
        for (int u : all)
          if (u != v && dist[static_cast<size_t>(u)] >= 0 && dist[static_cast<size_t>(u)] <= k)
            ++violations;
      }
      CHECK(violations == 0);
    }
  }

  TEST_CASE("k = 0 still samples disjoint uniform sets") {
    auto sbm = hgnet::make_homophilous_sbm(100, 2, 0.05, 0.01, 11);
    SplitCounts counts;
    counts.train_per_class = 10;
    counts.val = 30;
    counts.test = 50;
    auto split = hgnet::sanitized_resample(sbm.graph, sbm.labels, 0, counts, 3);
    std::set<int> uniq;
    for (int v : split.train) uniq.insert(v);
    for (int v : split.val) uniq.insert(v);
    for (int v : split.test) uniq.insert(v);
    CHECK(uniq.size() == 100u);
  }

  TEST_CASE("infeasible quotas report the shortfall") {
    // A complete-ish tiny graph blocks everything at k = 1.
    Graph g(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
    std::vector<int> labels{0, 0, 1, 1};
    SplitCounts counts;
    counts.train_per_class = 2;
    counts.val = 1;
    counts.test = 1;
    try {
      hgnet::sanitized_resample(g, labels, 1, counts, 1);
      FAIL("expected GenerationError");
    } catch (const GenerationError& e) {
      CHECK(std::string(e.what()).find("selected") != std::string::npos);
    }
    std::vector<int> bad_labels{0, 0, 1};
    CHECK_THROWS_AS(hgnet::sanitized_resample(g, bad_labels, 1, counts, 1), InputError);
  }
}

TEST_SUITE("stochastic block model") {
  TEST_CASE("extreme probabilities give two cliques") {
    auto ds = hgnet::make_homophilous_sbm(5, 2, 1.0, 0.0, 1);
    CHECK(ds.graph.num_nodes() == 10);
    CHECK(ds.graph.num_edges() == 20);  // 2 * C(5,2)
    CHECK(oracle::brute_num_components(ds.graph.num_nodes(), ds.graph.edges()) == 2);
    CHECK(ds.labels == std::vector<int>{0, 0, 0, 0, 0, 1, 1, 1, 1, 1});
    // One-hot features plus noise: class column near 1, other near 0.
    const auto& x = ds.graph.node_features();
    REQUIRE(x.rows == 10);
    REQUIRE(x.cols == 2);
    for (int v = 0; v < 10; ++v) {
      int c = ds.labels[static_cast<size_t>(v)];
      CHECK(std::abs(x(v, c) - 1.0) < 0.6);      // 6 sigma
      CHECK(std::abs(x(v, 1 - c) - 0.0) < 0.6);
    }
  }

  TEST_CASE("edge counts concentrate around their expectations") {
    // 20 seeds, within/cross edges each within 4 sigma of the binomial mean.
    int n_per = 60, classes = 2;
    double p_in = 0.1, p_out = 0.02;
    double in_pairs = classes * (n_per * (n_per - 1) / 2.0);
    double out_pairs = 1.0 * n_per * n_per;
    double mu_in = in_pairs * p_in, sd_in = std::sqrt(in_pairs * p_in * (1 - p_in));
    double mu_out = out_pairs * p_out, sd_out = std::sqrt(out_pairs * p_out * (1 - p_out));
    for (uint64_t seed = 1; seed <= 20; ++seed) {
      auto ds = hgnet::make_homophilous_sbm(n_per, classes, p_in, p_out, seed);
      double within = 0, cross = 0;
      for (const auto& [u, v] : ds.graph.edges())
        (ds.labels[static_cast<size_t>(u)] == ds.labels[static_cast<size_t>(v)] ? within
                                                                                : cross) += 1;
      CHECK(std::abs(within - mu_in) < 4 * sd_in);
      CHECK(std::abs(cross - mu_out) < 4 * sd_out);
    }
    // Determinism.
    auto a = hgnet::make_homophilous_sbm(30, 2, 0.1, 0.02, 5);
    auto b = hgnet::make_homophilous_sbm(30, 2, 0.1, 0.02, 5);
    CHECK(a.graph.content_hash() == b.graph.content_hash());
    CHECK(a.graph.node_features().v == b.graph.node_features().v);
  }

  TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(hgnet::make_homophilous_sbm(0, 2, 0.1, 0.1, 1), InputError);
    CHECK_THROWS_AS(hgnet::make_homophilous_sbm(5, 1, 0.1, 0.1, 1), InputError);
    CHECK_THROWS_AS(hgnet::make_homophilous_sbm(5, 2, 1.5, 0.1, 1), InputError);
    CHECK_THROWS_AS(hgnet::make_homophilous_sbm(5, 2, 0.1, -0.1, 1), InputError);
  }
}

TEST_SUITE("node csv ingest") {
  TEST_CASE("nodes and edges files with headers, features, and string ids") {
    std::string np = temp_path("hgnet_nodes.csv");
    std::string ep = temp_path("hgnet_edges.csv");
    {
      std::ofstream out(np);
      out << "id,label,f1,f2\n";
      out << "alice,spam,0.5,1.0\n";
      out << "bob,ham,0.25,-1.0\n";
      out << "carol,spam,0.0,0.5\n";
    }
    {
      std::ofstream out(ep);
      out << "src,dst\n";
      out << "alice,bob\n";
      out << "bob,carol\n";
      out << "bob,alice\n";  // duplicate, dropped
      out << "carol,carol\n";  // self loop, dropped
    }
    auto ds = hgnet::load_node_csv(np, ep);
    CHECK(ds.graph.num_nodes() == 3);
    CHECK(ds.graph.num_edges() == 2);
    CHECK(ds.labels == std::vector<int>{0, 1, 0});  // spam first seen -> 0
    REQUIRE(ds.graph.has_features());
    CHECK(ds.graph.node_features()(0, 0) == doctest::Approx(0.5));
    CHECK(ds.graph.node_features()(1, 1) == doctest::Approx(-1.0));

    // Unknown node in edges fails.
    {
      std::ofstream out(ep);
      out << "alice,mallory\n";
    }
    CHECK_THROWS_AS(hgnet::load_node_csv(np, ep), hgnet::IngestError);
    std::remove(np.c_str());
    std::remove(ep.c_str());
  }

  TEST_CASE("label-only files get a constant feature") {
    std::string np = temp_path("hgnet_nodes2.csv");
    std::string ep = temp_path("hgnet_edges2.csv");
    {
      std::ofstream out(np);
      out << "0,1\n1,0\n";
    }
    {
      std::ofstream out(ep);
      out << "0,1\n";
    }
    auto ds = hgnet::load_node_csv(np, ep);
    CHECK(ds.graph.num_nodes() == 2);
    REQUIRE(ds.graph.has_features());
    CHECK(ds.graph.node_features().cols == 1);
    CHECK(ds.graph.node_features()(0, 0) == doctest::Approx(1.0));
    std::remove(np.c_str());
    std::remove(ep.c_str());
  }
}
