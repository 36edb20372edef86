#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "readmit/cohort.hpp"
#include "readmit/nnet.hpp"

namespace readmit {

struct RfeConfig {
  int target_count = 10;
  int step = 1;
  std::string ranker = "logistic";
  LogisticOptions logistic;
  std::uint64_t seed = 0;

  void validate(const std::string& path = "select") const;
};

struct FeatureScores {
  std::vector<std::string> names;
  std::vector<double> scores;  // |coefficient| per name
  bool converged = false;
  double gradient_norm = 0.0;
  int iterations = 0;
};

struct EliminationRound {
  int round = 0;
  std::vector<std::string> removed;
  std::vector<std::string> surviving;  // before removal
  std::vector<double> scores;          // aligned with `surviving`
};

struct SelectionResult {
  std::vector<std::string> selected;  // schema order
  std::vector<EliminationRound> trace;
  std::vector<std::string> pinned;    // appended after `selected`

  std::vector<std::string> final_features() const;
};

// Absolute coefficients of an L2-penalized logistic fit on a standardized,
// fully observed matrix.
FeatureScores rank_features(const DataMatrix& matrix, std::span<const int> labels,
                            const LogisticOptions& options = {});

// Recursive elimination down to `target_count`. Score ties remove the
// later schema-ordered name first.
SelectionResult rfe(const DataMatrix& matrix, std::span<const int> labels, const RfeConfig& config);

// Appends pins absent from the selection. Every pin must exist in `schema`.
SelectionResult pin_expert_features(SelectionResult result, std::span<const std::string> pins,
                                    std::span<const std::string> schema);

void to_json(nlohmann::json& j, const SelectionResult& r);

}  // namespace readmit
