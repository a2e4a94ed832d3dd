#include "hgnet/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "hgnet/version.hpp"

namespace hgnet {

std::string format9(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

double round9(double x) {
  if (!std::isfinite(x)) return x;
  return std::strtod(format9(x).c_str(), nullptr);
}

namespace {

nlohmann::json round9_array(std::span<const double> v) {
  auto a = nlohmann::json::array();
  for (double x : v) a.push_back(round9(x));
  return a;
}

void strip_keys(nlohmann::json& j, std::span<const std::string> drop_keys) {
  if (j.is_object()) {
    for (const auto& k : drop_keys) j.erase(k);
    for (auto& [key, value] : j.items()) strip_keys(value, drop_keys);
  } else if (j.is_array()) {
    for (auto& value : j) strip_keys(value, drop_keys);
  }
}

uint64_t fnv1a(std::span<const char> bytes) {
  uint64_t h = 1469598103934665603ull;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(std::span<const double> v) {
  double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

nlohmann::json to_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["model"] = to_string(cfg.model);
  j["levels_or_layers"] = cfg.levels_or_layers;
  j["hidden_dim"] = cfg.hidden_dim;
  j["head"] = to_string(cfg.head);
  j["mlp_hidden"] = cfg.mlp_hidden;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  j["feature_dim"] = cfg.feature_dim;
  j["num_classes"] = cfg.num_classes;
  j["optimizer"] = {{"lr", round9(cfg.optimizer.lr)},
                    {"beta1", round9(cfg.optimizer.beta1)},
                    {"beta2", round9(cfg.optimizer.beta2)},
                    {"eps", round9(cfg.optimizer.eps)}};
  return j;
}

nlohmann::json to_json(const RunResult& r) {
  nlohmann::json j;
  j["config"] = to_json(r.config);
  j["seed"] = r.seed;
  j["train_loss"] = round9_array(r.train_loss);
  j["val_trace"] = round9_array(r.val_trace);
  if (!r.test_trace.empty()) j["test_trace"] = round9_array(r.test_trace);
  j["selected_epoch"] = r.selected_epoch;
  j["best_val"] = round9(r.best_val);
  j["test_metric"] = round9(r.test_metric);
  j["seconds"] = round9(r.seconds);
  return j;
}

std::string format_cv_csv(std::span<const RunResult> runs) {
  std::ostringstream os;
  os << "fold,seed,selected_epoch,best_val,test_accuracy\n";
  std::vector<double> best_vals, accs;
  for (size_t i = 0; i < runs.size(); ++i) {
    const RunResult& r = runs[i];
    os << i << ',' << r.seed << ',' << r.selected_epoch << ',' << format9(round9(r.best_val))
       << ',' << format9(round9(r.test_metric)) << '\n';
    best_vals.push_back(r.best_val);
    accs.push_back(r.test_metric);
  }
  os << "mean,,," << format9(round9(mean_of(best_vals))) << ','
     << format9(round9(mean_of(accs))) << '\n';
  os << "std,,," << format9(round9(std_of(best_vals))) << ',' << format9(round9(std_of(accs)))
     << '\n';
  return os.str();
}

uint64_t file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot read file for digest: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string bytes = buf.str();
  return fnv1a(bytes);
}

uint64_t json_digest_stripping(const std::string& path, std::span<const std::string> drop_keys) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot read artifact for digest: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IngestError("artifact is not JSON: " + path + " (" + e.what() + ")");
  }
  strip_keys(j, drop_keys);
  std::string canon = j.dump();
  return fnv1a(canon);
}

std::string hex64(uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

std::string json_dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestError("cannot open output file: " + path);
  out << text;
  if (!out) throw IngestError("failed writing output file: " + path);
}

nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json j;
  j["command"] = m.command;
  j["config"] = m.config;
  j["seeds"] = m.seeds;
  j["input_digests"] = m.input_digests;
  j["artifacts"] = m.artifacts;
  j["version"] = m.version.empty() ? kVersion : m.version;
  return j;
}

void write_manifest(const std::string& artifact_path, const RunManifest& m) {
  write_text_file(artifact_path + ".manifest.json", json_dump(to_json(m)));
}

}
