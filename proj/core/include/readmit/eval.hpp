#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "readmit/csv.hpp"

namespace readmit {

struct ConfusionCounts {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;

  long total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// A row is predicted positive iff prob >= threshold.
ConfusionCounts confusion_at_threshold(std::span<const double> probs,
                                       std::span<const int> labels, double threshold);

struct ThresholdMetrics {
  double accuracy = 0.0;
  std::optional<double> sensitivity;  // undefined without positives
  std::optional<double> specificity;  // undefined without negatives
};

ThresholdMetrics metrics_from_counts(const ConfusionCounts& counts);
ThresholdMetrics metrics(std::span<const double> probs, std::span<const int> labels,
                         double threshold);

// Mann-Whitney AUROC with half credit for ties. Throws DataError when only one
// class is present.
double auroc(std::span<const double> probs, std::span<const int> labels);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// One point per distinct score (descending), starting at (0,0) and ending at
// (1,1).
std::vector<RocPoint> roc_points(std::span<const double> probs, std::span<const int> labels);

double trapezoid_area(std::span<const RocPoint> points);

struct ConfidenceInterval {
  double low = 0.0;
  double high = 0.0;
};

// Stratified percentile bootstrap of the AUROC: each resample draws positives
// and negatives with replacement within their own class.
ConfidenceInterval bootstrap_ci(std::span<const double> probs, std::span<const int> labels,
                                int n_resamples, double alpha, std::uint64_t seed);

// Threshold maximizing sensitivity + specificity - 1 among the distinct
// scores; ties keep the highest threshold.
double youden_threshold(std::span<const double> probs, std::span<const int> labels);

struct OperatingPoint {
  double threshold = 0.5;
  ConfusionCounts confusion;
  ThresholdMetrics metrics;
};

struct EvalReport {
  long n = 0;
  long positives = 0;
  double auroc = 0.0;
  ConfidenceInterval auroc_ci;
  double alpha = 0.05;
  int bootstrap_resamples = 0;
  OperatingPoint fixed;   // configured threshold (default 0.5)
  OperatingPoint youden;  // Youden-J optimal threshold
  std::vector<RocPoint> roc;
};

struct EvalOptions {
  double threshold = 0.5;
  int bootstrap_resamples = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
};

EvalReport evaluate(std::span<const double> probs, std::span<const int> labels,
                    const EvalOptions& options);

void to_json(nlohmann::json& j, const EvalReport& report);
csv::Table roc_table(std::span<const RocPoint> points);

}  // namespace readmit
