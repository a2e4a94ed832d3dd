#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hgnet/models.hpp"

namespace hgnet {

/// Round to 9 significant digits (the canonical float precision of every
/// serialized artifact, so reruns are byte-comparable).
double round9(double x);

/// %.9g rendering of a value, for CSV cells.
std::string format9(double x);

nlohmann::json to_json(const ModelConfig& cfg);
nlohmann::json to_json(const RunResult& r);

/// CSV report over folds/seeds: one row per run plus mean and std summary
/// rows. Columns: fold,seed,selected_epoch,best_val,test_accuracy.
std::string format_cv_csv(std::span<const RunResult> runs);

/// 64-bit FNV-1a over a file's bytes. Throws IngestError if unreadable.
uint64_t file_digest(const std::string& path);

/// Digest of a JSON artifact with the given keys removed recursively and the
/// remainder re-serialized canonically (sorted keys). Used to compare run
/// artifacts across reruns while ignoring wall-clock fields.
uint64_t json_digest_stripping(const std::string& path, std::span<const std::string> drop_keys);

std::string hex64(uint64_t x);

/// Serialize with sorted keys, two-space indent, trailing newline.
std::string json_dump(const nlohmann::json& j);

void write_text_file(const std::string& path, const std::string& text);

/// Provenance record written next to every artifact.
struct RunManifest {
  std::vector<std::string> command;
  nlohmann::json config;  // null when the command has no model config
  std::vector<uint64_t> seeds;
  std::map<std::string, std::string> input_digests;  // path -> hex64
  std::vector<std::string> artifacts;
  std::string version;
};

nlohmann::json to_json(const RunManifest& m);
void write_manifest(const std::string& artifact_path, const RunManifest& m);

}
