#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "readmit/cohort.hpp"
#include "readmit/nnet.hpp"
#include "readmit/preprocess.hpp"

namespace readmit {

struct InputConfig {
  std::string source = "synthetic";  // "synthetic" or "file"
  std::filesystem::path path;        // cohort CSV when source == "file"
  std::string schema = "canonical";  // "canonical" or "extended"; file source only
  nlohmann::json synthetic = {{"preset", "planted_signal"}, {"n", 5000}, {"prevalence", 0.07}};
};

struct SplitConfig {
  double train_fraction = 0.8;
  bool stratified = true;
};

struct ImputeConfig {
  int knn_k = 5;
  IterativeOptions iterative;
};

struct SelectConfig {
  std::string mode = "rfe";  // "rfe" or "fixed"
  int target_count = 10;
  int step = 1;
  LogisticOptions logistic;
  std::vector<std::string> pins{"age", "SpO2"};
  std::vector<std::string> features;  // used when mode == "fixed"
};

struct ResampleConfig {
  std::string method = "adasyn";  // "adasyn", "random_oversample", "none"
  int k_neighbors = 5;
  double beta = 1.0;
};

struct ModelConfig {
  std::string mode = "grid";  // "grid" or "fixed"
  MlpConfig mlp;              // fixed config, and the base of every grid cell
  GridSearchSpec grid;
};

struct EvalConfig {
  double threshold = 0.5;
  int bootstrap_resamples = 1000;
  double alpha = 0.05;
};

struct ExplainConfig {
  std::string method = "exact";  // "exact" or "kernel"
  int background_size = 100;
  int max_samples = 100;
  long n_coalitions = 2048;
  double ridge = 0.0;
};

struct PipelineConfig {
  InputConfig input;
  SplitConfig split;
  ImputeConfig impute;
  SelectConfig select;
  ResampleConfig resample;
  ModelConfig model;
  EvalConfig evaluate;
  ExplainConfig explain;
  std::filesystem::path output_dir = "readmit-out";
  std::uint64_t seed = 42;

  // Throws ConfigError with the dotted path of the first offending field.
  static PipelineConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
  void validate() const;
};

// Applies `dotted.key=value` assignments. Values parse as JSON when they can
// and are taken as strings otherwise.
nlohmann::json apply_overrides(nlohmann::json doc, std::span<const std::string> assignments);

// Reads the document at `path` (an empty path means defaults) and applies
// overrides.
PipelineConfig load_config(const std::filesystem::path& path, std::span<const std::string> overrides);

}  // namespace readmit
