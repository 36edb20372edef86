#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "readmit/cohort.hpp"
#include "readmit/csv.hpp"
#include "readmit/nnet.hpp"

namespace readmit {

// Maps an n x d matrix to n model outputs.
using BatchPredictor = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

BatchPredictor mlp_predictor(const MlpModel& model);

struct ShapExplanation {
  Eigen::VectorXd values;   // per-feature attribution, model output units
  double base_value = 0.0;  // v(empty set): mean prediction over the background
  double prediction = 0.0;  // f(x)
};

inline constexpr int kExactShapMaxFeatures = 20;

// Shapley values of the interventional game v(S) = mean_b f(x_S, b_{-S}) by
// full coalition enumeration.
ShapExplanation exact_shap(const BatchPredictor& predict, const Eigen::VectorXd& x,
                           const Eigen::MatrixXd& background);

// Kernel-weighted least squares estimate with the efficiency constraint
// imposed exactly. Complete coalition sizes are enumerated from both ends of
// the size range while the budget allows; the remainder is sampled by kernel
// mass. With n_coalitions >= 2^d every coalition is enumerated.
ShapExplanation kernel_shap(const BatchPredictor& predict, const Eigen::VectorXd& x,
                            const Eigen::MatrixXd& background, long n_coalitions, double ridge,
                            std::uint64_t seed);

struct ShapSummary {
  std::vector<std::string> features;
  std::vector<double> mean_abs;      // per feature
  std::vector<std::size_t> ranking;  // feature indices, most important first
  Eigen::MatrixXd attributions;      // samples x features
  Eigen::MatrixXd feature_values;    // samples x features
  std::vector<double> base_values;
  std::vector<double> predictions;
};

// Ranking by descending mean |attribution|; ties keep schema order.
ShapSummary shap_summary(std::span<const ShapExplanation> explanations,
                         const DataMatrix& feature_values);

void to_json(nlohmann::json& j, const ShapSummary& s);
csv::Table ranking_table(const ShapSummary& s);
// One row per (sample, feature): value and attribution.
csv::Table points_table(const ShapSummary& s);

}  // namespace readmit
