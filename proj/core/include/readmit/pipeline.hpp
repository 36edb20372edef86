#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "readmit/config.hpp"

namespace readmit {

enum class Stage { synth, preprocess, stats, select, resample, train, evaluate, explain, report };

std::string_view to_string(Stage stage) noexcept;
std::optional<Stage> parse_stage(std::string_view name) noexcept;
// Execution order of a full run.
const std::vector<Stage>& pipeline_stages();

struct FileRecord {
  std::string path;  // relative to the output directory, '/'-separated
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  nlohmann::json config;
  nlohmann::json versions;
  std::map<std::string, double> stage_seconds;
  std::vector<FileRecord> files;  // sorted by path; excludes manifest.json
};

// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

// Runs one stage against the artifacts already under config.output_dir and
// refreshes manifest.json. Throws MissingArtifactError naming the first absent
// upstream file.
void run_stage(Stage stage, const PipelineConfig& config);

// All stages in order, then the leakage audit, then the manifest.
RunManifest run_pipeline(const PipelineConfig& config);

RunManifest read_manifest(const std::filesystem::path& output_dir);
RunManifest build_manifest(const std::filesystem::path& output_dir, const PipelineConfig& config,
                           std::map<std::string, double> stage_seconds);

struct LeakageFinding {
  std::string record;  // e.g. "train.train_fit"
  std::string row_id;  // offending test row
};

struct LeakageAudit {
  std::size_t test_rows = 0;
  std::map<std::string, std::size_t> checked;  // record -> ids inspected
  std::vector<LeakageFinding> findings;

  bool clean() const noexcept { return findings.empty(); }
};

// Cross-checks every recorded fit input (including the sources of synthetic
// rows) against the test partition.
LeakageAudit audit_leakage(const std::filesystem::path& output_dir);

void to_json(nlohmann::json& j, const LeakageAudit& audit);
void to_json(nlohmann::json& j, const RunManifest& manifest);

}  // namespace readmit
