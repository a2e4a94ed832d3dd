#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "hgnet/datasets.hpp"
#include "hgnet/report.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "hgnet_cli_tests";

/// Run the workbench binary with the given argument tail; returns exit code.
int run_cli(const std::string& tail) {
  std::string cmd = std::string(HGNET_BIN_PATH) + " " + tail;
  int st = std::system(cmd.c_str());
  REQUIRE(st != -1);
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

int run_quiet(const std::string& tail) { return run_cli(tail + " 2>/dev/null"); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json slurp_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

std::string q(const fs::path& p) { return p.string(); }

struct Workspace {
  Workspace() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
};

}  // namespace

TEST_SUITE("argument handling") {
  TEST_CASE("help and version succeed") {
    CHECK(run_cli("--help >/dev/null 2>&1") == 0);
    CHECK(run_cli("--version >/dev/null 2>&1") == 0);
    CHECK(run_cli("gen --help >/dev/null 2>&1") == 0);
  }

  TEST_CASE("usage errors exit 2") {
    Workspace ws;
    fs::path out = kWork / "x.jsonl";
    CHECK(run_quiet("gen") == 2);                        // missing required --out
    CHECK(run_quiet("frobnicate") == 2);                 // unknown subcommand
    CHECK(run_quiet("gen --out " + q(out) + " --bogus-flag 1") == 2);
    CHECK(run_quiet("gen --out " + q(out) + " --n 7") == 2);   // odd sample count
    CHECK(run_quiet("gen --out " + q(out) + " --topology mars") == 2);
    CHECK(run_quiet("gen --out " + q(out) + " --topology euroroad") == 2);  // no --road-file
    CHECK(run_quiet("train --data x.jsonl") == 2);             // missing --out
    CHECK(run_quiet("train --out " + q(out) + "") == 2);       // missing --data
    CHECK(run_quiet("train --model resnet --data x --out " + q(out)) == 2);
    CHECK(run_quiet("train --task node --cv 3 --data sbm:10x2:0.2:0.02 --out " + q(out)) == 2);
    CHECK(run_quiet("train --task node --data sbm:bad --out " + q(out)) == 2);
    CHECK(run_quiet("train --task node --data mystery:path --out " + q(out)) == 2);
    CHECK(run_quiet("train --task warp --data x --out " + q(out)) == 2);
    CHECK(run_quiet("inspect --method centroid") == 2);
    CHECK(run_quiet("inspect --method louvain --m 2.0") == 2);
    CHECK(run_quiet("inspect --levels -3") == 2);
  }

  TEST_CASE("runtime failures exit 1") {
    Workspace ws;
    fs::path out = kWork / "r.json";
    CHECK(run_quiet("train --data " + q(kWork / "missing.jsonl") + " --out " + q(out)) == 1);
    // Dense 100-node blocks cannot host 100 nodes pairwise > 2 hops apart.
    CHECK(run_quiet("train --task node --data sbm:50x2:0.5:0.4 --k-hop 2"
                    " --train-per-class 20 --val-count 30 --test-count 50 --out " +
                    q(out)) == 1);
  }
}

TEST_SUITE("dataset generation") {
  TEST_CASE("generation is reproducible byte for byte") {
    Workspace ws;
    fs::path a = kWork / "a.jsonl", b = kWork / "b.jsonl";
    REQUIRE(run_quiet("gen --topology grid16 --n 50 --seed 3 --out " + q(a)) == 0);
    REQUIRE(run_quiet("gen --topology grid16 --n 50 --seed 3 --out " + q(b)) == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(fs::exists(kWork / "a.jsonl.manifest.json"));

    auto ds = hgnet::load_dataset(a.string());
    CHECK(ds.samples.size() == 50);
    CHECK(ds.topology->num_nodes() == 256);
    int ones = 0;
    for (const auto& s : ds.samples) ones += s.label;
    CHECK(ones == 25);

    auto manifest = slurp_json(kWork / "a.jsonl.manifest.json");
    CHECK(manifest["seeds"] == nlohmann::json::array({3}));
    CHECK(manifest["artifacts"][0] == a.string());

    fs::path c = kWork / "c.jsonl";
    REQUIRE(run_quiet("gen --topology grid16 --n 50 --seed 4 --out " + q(c)) == 0);
    CHECK(slurp(a) != slurp(c));  // the seed matters
  }

  TEST_CASE("file topologies run through road-network ingestion") {
    Workspace ws;
    fs::path edges = kWork / "tiny.edges";
    // An 8-cycle plus a separate 2-node component, one duplicate, one
    // self-loop; the largest component is kept.
    std::ofstream(edges) << "0 1\n1 2\n2 3\n3 4\n4 5\n5 6\n6 7\n7 0\n1 2\n3 3\n8 9\n";
    fs::path out = kWork / "tiny.jsonl";
    REQUIRE(run_quiet("gen --topology file:" + q(edges) + " --n 6 --seed 1 --out " + q(out)) == 0);
    auto ds = hgnet::load_dataset(out.string());
    CHECK(ds.topology->num_nodes() == 8);
    CHECK(ds.topology->num_edges() == 8);
    auto manifest = slurp_json(kWork / "tiny.jsonl.manifest.json");
    CHECK(manifest["input_digests"].contains(edges.string()));
  }
}

TEST_SUITE("training runs") {
  TEST_CASE("a tiny graph-task run writes a result and a manifest") {
    Workspace ws;
    fs::path data = kWork / "d.jsonl", out = kWork / "run.json";
    REQUIRE(run_quiet("gen --topology grid16 --n 24 --seed 5 --out " + q(data)) == 0);
    REQUIRE(run_quiet("train --model gcn --layers 1 --hidden 4 --mlp-hidden 8 --epochs 2"
                      " --batch-size 8 --seed 1 --data " +
                      q(data) + " --out " + q(out)) == 0);
    auto j = slurp_json(out);
    CHECK(j["config"]["model"] == "gcn");
    CHECK(j["config"]["hidden_dim"] == 4);
    CHECK(j["train_loss"].size() == 2);
    double acc = j["test_metric"].get<double>();
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
    CHECK(j["seconds"].get<double>() > 0.0);
    auto manifest = slurp_json(kWork / "run.json.manifest.json");
    CHECK(manifest["config"]["model"] == "gcn");
    CHECK(manifest["input_digests"].contains(data.string()));
  }

  TEST_CASE("cross-validation emits per-fold results and a CSV, reproducibly") {
    Workspace ws;
    fs::path data = kWork / "d.jsonl", out = kWork / "cv.json", out2 = kWork / "cv2.json";
    REQUIRE(run_quiet("gen --topology grid16 --n 24 --seed 5 --out " + q(data)) == 0);
    std::string train_tail = " --model gcn --layers 1 --hidden 4 --mlp-hidden 8 --epochs 1"
                             " --batch-size 8 --seed 2 --cv 3 --data " + q(data);
    REQUIRE(run_quiet("train" + train_tail + " --jobs 2 --out " + q(out)) == 0);
    auto j = slurp_json(out);
    REQUIRE(j["folds"].size() == 3);
    CHECK(j.contains("mean_test_accuracy"));
    CHECK(j.contains("std_test_accuracy"));
    std::string csv = slurp(kWork / "cv.json.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);  // header + 3 folds + mean + std
    CHECK(csv.rfind("fold,", 0) == 0);
    CHECK(csv.find("\nmean,") != std::string::npos);
    CHECK(csv.find("\nstd,") != std::string::npos);

    // Rerun single-threaded: fold seeding is per fold, so results must agree
    // apart from wall-clock timings.
    REQUIRE(run_quiet("train" + train_tail + " --jobs 1 --out " + q(out2)) == 0);
    CHECK(slurp(kWork / "cv2.json.csv") == csv);
    std::vector<std::string> drop{"seconds"};
    CHECK(hgnet::json_digest_stripping(out.string(), drop) ==
          hgnet::json_digest_stripping(out2.string(), drop));
  }

  TEST_CASE("a tiny node-task run works end to end") {
    Workspace ws;
    fs::path out = kWork / "node.json";
    REQUIRE(run_quiet("train --task node --model gcn --layers 1 --hidden 8 --epochs 3"
                      " --lr 0.01 --seed 1 --data sbm:30x2:0.2:0.02 --k-hop 0"
                      " --train-per-class 5 --val-count 10 --test-count 20 --out " +
                      q(out)) == 0);
    auto j = slurp_json(out);
    CHECK(j["config"]["head"] == "node-linear");
    CHECK(j["config"]["num_classes"] == 2);
    CHECK(j["train_loss"].size() == 3);
    CHECK(j["test_metric"].get<double>() >= 0.0);
  }
}

TEST_SUITE("hierarchy inspection") {
  TEST_CASE("structural report on a grid, with bound checking") {
    Workspace ws;
    fs::path out = kWork / "insp.json";
    // Coarsen all the way to one node; the routing bound needs a single apex.
    // m = 3 covers the worst measured round (a 3-node level shrinking by 1).
    REQUIRE(run_quiet("inspect --topology grid16 --method edgepool --levels 0 --m 3.0 --out " +
                      q(out)) == 0);
    auto j = slurp_json(out);
    CHECK(j["topology"] == "grid16");
    CHECK(j["method"] == "edgepool");
    int depth = j["depth"].get<int>();
    REQUIRE(j["per_level_sizes"].size() == static_cast<size_t>(depth) + 1);
    CHECK(j["per_level_sizes"][0][0] == 256);
    CHECK(j["per_level_sizes"][0][1] == 480);
    CHECK(j["per_level_sizes"][1][0] == 128);  // perfect matchings exist on the grid
    CHECK(j["per_level_sizes"][static_cast<size_t>(depth)][0] == 1);
    CHECK(j["bounds"]["matching_violation_level"] == -1);
    CHECK(j["bounds"]["nodes_ok"] == true);
    CHECK(j["bounds"]["depth_ok"] == true);
    CHECK(j["bounds"]["routing_ok"] == true);
    CHECK(j["bounds"]["ok"] == true);
    CHECK(fs::exists(kWork / "insp.json.manifest.json"));
  }

  TEST_CASE("stdout mode and louvain method") {
    Workspace ws;
    fs::path cap = kWork / "cap.json";
    REQUIRE(run_cli("inspect --topology grid16 --method louvain --seed 4 --levels 3 > " + q(cap) +
                    " 2>/dev/null") == 0);
    auto j = slurp_json(cap);
    CHECK(j["method"] == "louvain");
    CHECK(j["depth"].get<int>() >= 1);
    CHECK(j["max_routed_hops"].get<int>() >= 2);
  }
}
