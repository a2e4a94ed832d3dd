#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "hgnet/hierarchy.hpp"
#include "hgnet/rng.hpp"

#include "oracle_helpers.hpp"

using hgnet::BoundsReport;
using hgnet::CoarsenMethod;
using hgnet::DMat;
using hgnet::EdgeScoreParams;
using hgnet::Graph;
using hgnet::Hierarchy;
using hgnet::Rng;

namespace {

std::vector<EdgeScoreParams> zero_scorers(int rounds, int feature_dim) {
  std::vector<EdgeScoreParams> params;
  for (int i = 0; i < rounds; ++i) params.push_back({DMat(1, 2 * feature_dim), 0.0});
  return params;
}

DMat ones(int rows, int cols) {
  DMat m(rows, cols);
  m.fill(1.0);
  return m;
}

/// Per-round shrink constant measured from the hierarchy itself:
/// the matching precondition (matching size >= N_l / m) holds with equality
/// at the worst level, so the guaranteed bounds apply at exactly this m.
double measured_m(const Hierarchy& h) {
  double m = 2.0;
  for (size_t l = 0; l < h.steps.size(); ++l) {
    double n_l = static_cast<double>(h.levels[l].num_nodes());
    double shrink = n_l - static_cast<double>(h.levels[l + 1].num_nodes());
    if (shrink > 0) m = std::max(m, n_l / shrink);
  }
  return m;
}

void check_inter_edges_match_steps(const Hierarchy& h) {
  size_t pos = 0;
  for (size_t l = 0; l < h.steps.size(); ++l) {
    const auto& map = h.steps[l].fine_to_coarse;
    for (int v = 0; v < static_cast<int>(map.size()); ++v) {
      REQUIRE(pos < h.inter_edges.size());
      const auto& e = h.inter_edges[pos++];
      CHECK(e.level == static_cast<int>(l));
      CHECK(e.fine == v);
      CHECK(e.coarse == map[static_cast<size_t>(v)]);
    }
  }
  CHECK(pos == h.inter_edges.size());
}

}  // namespace

TEST_SUITE("edgepool hierarchy") {
  TEST_CASE("path of four nodes coarsens end-pairs first, then to a single node") {
    // With a zero scorer every raw score ties, so scores depend only on
    // degree: end edges average (1.5 + 1.0)/2 = 1.25, the middle edge 1.0.
    Graph g(4, {{0, 1}, {1, 2}, {2, 3}});
    auto built = hgnet::build_hierarchy_edgepool(g, ones(4, 1), zero_scorers(8, 1), 8);
    const Hierarchy& h = built.hierarchy;
    REQUIRE(h.depth() == 2);
    REQUIRE(h.levels.size() == 3);
    CHECK(h.levels[0].num_nodes() == 4);
    CHECK(h.levels[1].num_nodes() == 2);
    CHECK(h.levels[2].num_nodes() == 1);
    CHECK(h.levels[1].num_edges() == 1);
    CHECK(h.levels[2].num_edges() == 0);

    CHECK(h.steps[0].fine_to_coarse == std::vector<int>{0, 0, 1, 1});
    CHECK(h.steps[0].merge_scores[0] == doctest::Approx(1.25).epsilon(1e-12));
    CHECK(h.steps[0].merge_scores[1] == doctest::Approx(1.25).epsilon(1e-12));

    // Features: merged = score * (sum of pair); top edge joins two degree-1
    // nodes so its score is 1.5.
    REQUIRE(built.level_features.size() == 3);
    CHECK(built.level_features[1](0, 0) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(built.level_features[1](1, 0) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(built.level_features[2](0, 0) == doctest::Approx(7.5).epsilon(1e-12));

    check_inter_edges_match_steps(h);

    auto stats = hgnet::hierarchy_stats(h);
    CHECK(stats.total_nodes == 7);
    CHECK(stats.max_routed_hops == 3);  // ends meet via the level-1 edge
    CHECK(stats.level_sizes ==
          std::vector<std::pair<int, int>>{{4, 3}, {2, 1}, {1, 0}});

    auto report = hgnet::verify_bounds(h, measured_m(h));
    CHECK(report.ok());
    CHECK(report.max_routed_hops == 3);
    CHECK(report.routing_bound == 4);
  }

  TEST_CASE("a single node cannot coarsen: depth zero") {
    Graph g(1, {});
    auto built = hgnet::build_hierarchy_edgepool(g, ones(1, 2), zero_scorers(3, 2), 3);
    CHECK(built.hierarchy.depth() == 0);
    REQUIRE(built.hierarchy.levels.size() == 1);
    CHECK(built.level_features.size() == 1);
    auto stats = hgnet::hierarchy_stats(built.hierarchy);
    CHECK(stats.max_routed_hops == 0);
    CHECK(hgnet::verify_bounds(built.hierarchy, 2.0).ok());
  }

  TEST_CASE("requested rounds cap the depth") {
    Graph g(8, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 7}});
    auto built = hgnet::build_hierarchy_edgepool(g, ones(8, 1), zero_scorers(1, 1), 1);
    CHECK(built.hierarchy.depth() == 1);
    CHECK(built.hierarchy.levels.size() == 2);
  }

  TEST_CASE("a star violates the matching precondition for m = 2") {
    // Every edge shares the hub, so only one edge can match: 1 < 10/2.
    std::vector<std::pair<int, int>> edges;
    for (int leaf = 1; leaf <= 9; ++leaf) edges.push_back({0, leaf});
    Graph g(10, edges);
    auto built = hgnet::build_hierarchy_edgepool(g, ones(10, 1), zero_scorers(20, 1), 20);
    auto report = hgnet::verify_bounds(built.hierarchy, 2.0);
    CHECK(report.matching_violation_level == 0);
    CHECK_FALSE(report.ok());
    // At the measured shrink constant the same hierarchy passes.
    auto measured = hgnet::verify_bounds(built.hierarchy, measured_m(built.hierarchy));
    CHECK(measured.matching_violation_level == -1);
    CHECK(measured.ok());
  }

  TEST_CASE("rebuilding is deterministic") {
    Rng rng(131);
    Graph g = oracle::random_connected_graph(60, 3.0, rng);
    DMat x = oracle::random_matrix(60, 2, rng);
    std::vector<EdgeScoreParams> params;
    for (int i = 0; i < 10; ++i)
      params.push_back({oracle::random_matrix(1, 4, rng), rng.normal(0.0, 0.5)});
    auto a = hgnet::build_hierarchy_edgepool(g, x, params, 10);
    auto b = hgnet::build_hierarchy_edgepool(g, x, params, 10);
    REQUIRE(a.hierarchy.depth() == b.hierarchy.depth());
    for (int l = 0; l <= a.hierarchy.depth(); ++l) {
      CHECK(a.hierarchy.levels[static_cast<size_t>(l)].content_hash() ==
            b.hierarchy.levels[static_cast<size_t>(l)].content_hash());
      CHECK(a.level_features[static_cast<size_t>(l)].v ==
            b.level_features[static_cast<size_t>(l)].v);
    }
    for (size_t l = 0; l < a.hierarchy.steps.size(); ++l)
      CHECK(a.hierarchy.steps[l].fine_to_coarse == b.hierarchy.steps[l].fine_to_coarse);
  }

  TEST_CASE("guaranteed bounds hold at the measured shrink constant on random graphs") {
    Rng rng(141);
    for (int trial = 0; trial < 25; ++trial) {
      int n = 2 + rng.uniform_int(0, 120);
      Graph g = oracle::random_connected_graph(n, 3.0, rng);
      DMat x = oracle::random_matrix(n, 2, rng);
      std::vector<EdgeScoreParams> params;
      for (int i = 0; i < n; ++i) params.push_back({oracle::random_matrix(1, 4, rng), 0.0});
      auto built = hgnet::build_hierarchy_edgepool(g, x, params, n);
      const Hierarchy& h = built.hierarchy;
      // Coarsened all the way: one node at the top.
      CHECK(h.levels.back().num_nodes() == 1);
      check_inter_edges_match_steps(h);
      auto report = hgnet::verify_bounds(h, measured_m(h));
      CHECK_MESSAGE(report.ok(), "n=" << n << " m=" << report.m << " nodes " << report.total_nodes
                                      << "/" << report.node_bound << " depth " << report.depth
                                      << "/" << report.depth_bound << " routing "
                                      << report.max_routed_hops << "/" << report.routing_bound);
      // Feature widths are preserved and level sizes strictly shrink.
      for (size_t l = 0; l < h.levels.size(); ++l) {
        CHECK(built.level_features[l].rows == h.levels[l].num_nodes());
        CHECK(built.level_features[l].cols == 2);
        if (l > 0) CHECK(h.levels[l].num_nodes() < h.levels[l - 1].num_nodes());
      }
    }
  }

  TEST_CASE("sampled routing never exceeds the exhaustive maximum") {
    Rng rng(151);
    Graph g = oracle::random_connected_graph(80, 3.0, rng);
    auto built = hgnet::build_hierarchy_edgepool(g, ones(80, 1), zero_scorers(80, 1), 80);
    auto full = hgnet::hierarchy_stats(built.hierarchy);
    auto sampled = hgnet::hierarchy_stats(built.hierarchy, 10, 7);
    CHECK(sampled.max_routed_hops <= full.max_routed_hops);
    CHECK(sampled.total_nodes == full.total_nodes);
    CHECK(sampled.total_inter_edges == full.total_inter_edges);
  }
}

TEST_SUITE("louvain hierarchy") {
  TEST_CASE("two triangles and a bridge collapse community-first") {
    Graph g(6, {{0, 1}, {0, 2}, {1, 2}, {3, 4}, {3, 5}, {4, 5}, {2, 3}});
    auto h = hgnet::build_hierarchy_louvain(g, 17, 4);
    CHECK(h.method == CoarsenMethod::kLouvain);
    REQUIRE(h.depth() >= 1);
    CHECK(h.levels[1].num_nodes() == 2);
    CHECK(h.steps[0].fine_to_coarse == std::vector<int>{0, 0, 0, 1, 1, 1});
    check_inter_edges_match_steps(h);
    // The two-community level has the single bridge edge with mean weight 1.
    REQUIRE(h.levels[1].num_edges() == 1);
    CHECK(h.levels[1].edge_weight(0) == doctest::Approx(1.0));
  }

  TEST_CASE("every level shrinks and the build is deterministic") {
    Rng rng(161);
    for (int trial = 0; trial < 10; ++trial) {
      int n = 10 + rng.uniform_int(0, 90);
      Graph g = oracle::random_connected_graph(n, 3.0, rng);
      auto a = hgnet::build_hierarchy_louvain(g, 1000 + static_cast<uint64_t>(trial), 6);
      auto b = hgnet::build_hierarchy_louvain(g, 1000 + static_cast<uint64_t>(trial), 6);
      REQUIRE(a.depth() == b.depth());
      for (size_t l = 0; l < a.levels.size(); ++l) {
        CHECK(a.levels[l].content_hash() == b.levels[l].content_hash());
        if (l > 0) CHECK(a.levels[l].num_nodes() < a.levels[l - 1].num_nodes());
      }
      for (size_t l = 0; l < a.steps.size(); ++l)
        CHECK(a.steps[l].fine_to_coarse == b.steps[l].fine_to_coarse);
      check_inter_edges_match_steps(a);
    }
  }

  TEST_CASE("a graph with no communities to merge stops early") {
    Graph g(2, {{0, 1}});
    // Louvain keeps the two nodes together at best, producing a single
    // community; one round shrinks 2 -> 1 and the next cannot shrink.
    auto h = hgnet::build_hierarchy_louvain(g, 3, 5);
    CHECK(h.depth() <= 2);
    CHECK(h.levels.back().num_nodes() >= 1);
  }
}
