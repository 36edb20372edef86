#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "readmit/csv.hpp"

namespace readmit {

using Index = Eigen::Index;

enum class Activation { relu, sigmoid };

struct MlpConfig {
  std::vector<int> hidden_sizes{128, 64, 32, 16};
  // One coefficient per hidden layer; the penalty term is l2 * ||W||^2.
  std::vector<double> l2{0.03, 0.03, 0.04, 0.03};
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 32;
  int max_epochs = 200;
  int patience = 20;
  double validation_fraction = 0.15;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the offending field under `path`.
  void validate(const std::string& path = "model.mlp") const;

  friend bool operator==(const MlpConfig&, const MlpConfig&) = default;
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
  Activation activation = Activation::relu;
};

struct MlpModel {
  int input_dim = 0;
  std::vector<DenseLayer> layers;  // hidden layers, then the sigmoid output

  Index parameter_count() const;
};

// He initialization: weights ~ N(0, 2 / fan_in), zero biases.
MlpModel init_mlp(const MlpConfig& config, int input_dim);

// Overflow-free logistic function.
double stable_sigmoid(double z) noexcept;

Eigen::VectorXd forward_logits(const MlpModel& model, const Eigen::MatrixXd& x);
// Per-row probability; throws DataError on a width mismatch.
Eigen::VectorXd forward(const MlpModel& model, const Eigen::MatrixXd& x);

inline constexpr double kProbabilityClamp = 1e-12;

struct LossGrad {
  double loss = 0.0;          // data term + penalty
  double data_loss = 0.0;     // mean binary cross-entropy
  double penalty = 0.0;       // sum_l l2_l ||W_l||^2
  Index correct = 0;          // rows with [p >= 0.5] == label
  std::vector<DenseLayer> gradients;  // same shapes as model.layers
};

// Mean clamped binary cross-entropy plus per-hidden-layer L2 on weights
// (biases and the output layer are not penalized), with reverse-mode
// gradients.
LossGrad loss_and_grad(const MlpModel& model, const Eigen::MatrixXd& x,
                       std::span<const int> labels, std::span<const double> l2);

// Same objective without gradients.
double penalized_loss(const MlpModel& model, const Eigen::MatrixXd& x,
                      std::span<const int> labels, std::span<const double> l2);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // row-weighted mean of the epoch's mini-batch objectives
  double train_accuracy = 0.0;  // fraction of mini-batch rows classified correctly at 0.5
  double validation_loss = 0.0;
  double validation_auroc = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_validation_auroc = 0.0;
  std::string stop_reason;  // "patience", "max_epochs", "diverged"
  Index train_rows = 0;
  Index validation_rows = 0;
};

struct TrainResult {
  MlpModel model;
  TrainReport report;
};

// Adam mini-batch training with a stratified internal validation split and
// early stopping on validation AUROC. Returns the parameters of the best
// validation epoch.
//
// `origin` (optional, one entry per row) marks resampled rows: origin[i] == i
// for an observed row, otherwise the index of the observed row it was derived
// from. Validation rows are drawn from observed rows only, and derived rows
// whose origin is held out are left out of fitting.
TrainResult train(const MlpConfig& config, const Eigen::MatrixXd& x, std::span<const int> labels,
                  std::span<const Index> origin = {});

struct GridSearchSpec {
  MlpConfig base;
  std::vector<double> learning_rates{1e-3, 3e-4};
  std::vector<double> l2_scales{0.5, 1.0, 1.5};
  std::vector<std::vector<int>> hidden_sizes{{128, 64, 32, 16}, {64, 32, 16, 8}};
  int folds = 5;
  std::uint64_t seed = 0;

  void validate(const std::string& path = "model.grid") const;
  // Cells in grid order: hidden sizes, then learning rate, then l2 scale.
  std::vector<MlpConfig> cells() const;
};

struct CvRow {
  int cell = 0;
  int fold = 0;
  double learning_rate = 0.0;
  double l2_scale = 0.0;
  std::vector<int> hidden_sizes;
  double auroc = 0.0;
  int epochs = 0;
  std::string stop_reason;
};

struct GridCellSummary {
  int cell = 0;
  MlpConfig config;
  double l2_scale = 1.0;
  double mean_auroc = 0.0;
  Index parameter_count = 0;
};

struct GridSearchResult {
  int best_cell = 0;
  MlpConfig best_config;
  std::vector<GridCellSummary> cells;
  std::vector<CvRow> table;  // |cells| x folds rows, grid order
};

// Stratified k-fold grid search scored by mean held-out AUROC. Ties go to the
// smaller parameter count, then the lower learning rate.
// `origin` has the meaning given for train(): folds partition observed rows,
// and derived rows are only ever fitted in folds that also fit their origin.
GridSearchResult grid_search(const GridSearchSpec& spec, const Eigen::MatrixXd& x,
                             std::span<const int> labels, std::span<const Index> origin = {});

// Per-class round-robin fold assignment after a seeded shuffle.
std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed);

struct LogisticOptions {
  double penalty = 1e-2;  // penalty * ||w||^2, intercept unpenalized
  int max_iter = 5000;
  double gradient_tolerance = 1e-6;
};

struct LogisticModel {
  Eigen::VectorXd coefficients;
  double intercept = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;
  std::vector<double> objective_trace;  // objective after each accepted step
};

// Full-batch gradient descent with Armijo backtracking on the convex
// penalized mean cross-entropy.
LogisticModel train_logistic(const Eigen::MatrixXd& x, std::span<const int> labels,
                             const LogisticOptions& options = {});

double logistic_objective(const Eigen::MatrixXd& x, std::span<const int> labels,
                          const Eigen::VectorXd& coefficients, double intercept, double penalty);

void to_json(nlohmann::json& j, const MlpConfig& config);
void from_json(const nlohmann::json& j, MlpConfig& config);
void to_json(nlohmann::json& j, const MlpModel& model);
void from_json(const nlohmann::json& j, MlpModel& model);
void to_json(nlohmann::json& j, const TrainReport& report);
void to_json(nlohmann::json& j, const GridSearchResult& result);
csv::Table cv_table(const GridSearchResult& result);

// Model document wrapper: {"format", "version", "config", "model"}.
nlohmann::json model_document(const MlpModel& model, const MlpConfig& config);
MlpModel model_from_document(const nlohmann::json& doc, MlpConfig* config = nullptr);

}  // namespace readmit
