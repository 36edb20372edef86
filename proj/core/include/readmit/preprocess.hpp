#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "readmit/cohort.hpp"

namespace readmit {

enum class ColumnKind { categorical, numeric };
enum class ImputePolicy { none, most_frequent, drop, knn, iterative };

std::string_view to_string(ImputePolicy policy) noexcept;
std::string_view to_string(ColumnKind kind) noexcept;

// Threshold buckets: categorical [0, 0.2] -> most_frequent, (0.2, 1] -> drop;
// numeric [0, 0.2] -> knn, (0.2, 0.5] -> iterative, (0.5, 1] -> drop.
// A column without missing cells always maps to none.
ImputePolicy assign_policy(ColumnKind kind, double missing_fraction) noexcept;

struct ColumnProfile {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  double missing_fraction = 0.0;
  ImputePolicy policy = ImputePolicy::none;
};

struct MissingnessProfile {
  std::vector<ColumnProfile> columns;

  std::vector<std::string> columns_with(ImputePolicy policy) const;
};

// `kinds` may be empty, in which case every column is numeric.
MissingnessProfile profile_missingness(const DataMatrix& matrix,
                                       std::span<const ColumnKind> kinds = {});

// Per-column modal value of the observed cells; ties resolve to the smallest
// value.
class MostFrequentImputer {
 public:
  static MostFrequentImputer fit(const DataMatrix& matrix,
                                 std::span<const std::string> columns);

  DataMatrix apply(const DataMatrix& matrix) const;

  const std::vector<std::string>& columns() const noexcept { return columns_; }
  const std::vector<double>& modes() const noexcept { return modes_; }

 private:
  std::vector<std::string> columns_;
  std::vector<double> modes_;
};

// Distance between two partially observed rows over the columns they share:
// sqrt(D / |S| * sum_{s in S} (a_s - b_s)^2). Returns +inf when S is empty.
double masked_euclidean(const DataMatrix& a, Index row_a, const DataMatrix& b,
                        Index row_b);

struct ImputeStats {
  Index imputed_cells = 0;
  // Cells that had no eligible neighbor (KNN) or a degenerate design
  // (iterative) and were filled with the column mean instead.
  Index fallback_cells = 0;
  std::vector<std::string> notes;
};

// Nearest-neighbor imputation against a stored reference matrix (the training
// rows). Each missing cell (i, j) becomes the unweighted mean of column j over
// the k nearest reference rows that observe j. Distance ties go to the lower
// reference row index.
class KnnImputer {
 public:
  static KnnImputer fit(DataMatrix reference, int k);

  // Imputes the listed columns (all columns when `columns` is empty). Observed
  // cells and cells of other columns are returned unchanged.
  DataMatrix apply(const DataMatrix& matrix, std::span<const std::string> columns = {},
                   ImputeStats* stats = nullptr) const;

  int k() const noexcept { return k_; }
  const DataMatrix& reference() const noexcept { return reference_; }

 private:
  DataMatrix reference_;
  int k_ = 5;
  Eigen::VectorXd column_means_;
};

// Self-imputation: reference = matrix.
DataMatrix knn_impute(const DataMatrix& matrix, int k, ImputeStats* stats = nullptr);

struct IterativeOptions {
  int max_iter = 10;
  double tolerance = 1e-3;  // relative to each column's observed sd
  double ridge_penalty = 1e-3;
};

struct IterativeTrace {
  // Largest |change| / sd over imputed cells, one entry per completed round.
  std::vector<double> max_relative_change;
  int rounds = 0;
  bool converged = false;
  ImputeStats stats;
};

// Ridge regression of one column on the others (intercept unpenalized, stored
// in the original units).
struct ColumnRegression {
  Index target = 0;
  bool degenerate = false;  // fall back to the column mean
  double intercept = 0.0;
  Eigen::VectorXd coefficients;  // length cols(); zero at `target`
};

// Round-robin chained-equation imputation. Missing cells start at the column
// mean; each round fits a ridge regression of every incomplete column (schema
// order) on all other columns over its observed rows and re-predicts its
// missing cells.
DataMatrix iterative_impute(const DataMatrix& matrix, const IterativeOptions& options,
                            IterativeTrace* trace = nullptr);

class IterativeImputer {
 public:
  static IterativeImputer fit(const DataMatrix& matrix, const IterativeOptions& options,
                              IterativeTrace* trace = nullptr);

  // Fills missing cells of `matrix` with mean initialization followed by up to
  // max_iter rounds of the fitted regressions.
  DataMatrix apply(const DataMatrix& matrix, ImputeStats* stats = nullptr) const;

  const std::vector<ColumnRegression>& regressions() const noexcept { return regressions_; }

 private:
  IterativeOptions options_;
  Eigen::VectorXd means_;
  Eigen::VectorXd sds_;
  std::vector<ColumnRegression> regressions_;
};

// z = (x - mean) / sd per column, statistics from the fitting matrix with the
// n - 1 denominator.
class Scaler {
 public:
  static Scaler fit(const DataMatrix& matrix);

  DataMatrix apply(const DataMatrix& matrix) const;
  DataMatrix invert(const DataMatrix& matrix) const;

  const std::vector<std::string>& columns() const noexcept { return columns_; }
  const Eigen::VectorXd& means() const noexcept { return means_; }
  const Eigen::VectorXd& sds() const noexcept { return sds_; }

  // Restricts to a subset of columns, in the given order.
  Scaler subset(std::span<const std::string> names) const;

  friend void to_json(nlohmann::json& j, const Scaler& scaler);
  friend void from_json(const nlohmann::json& j, Scaler& scaler);

 private:
  std::vector<std::string> columns_;
  Eigen::VectorXd means_;
  Eigen::VectorXd sds_;
};

// Train-fitted composition of the policies above.
struct PreprocessOptions {
  int knn_k = 5;
  IterativeOptions iterative;
  std::vector<ColumnKind> kinds;  // empty = all numeric
};

struct ImputedCell {
  std::string row_id;
  std::string column;
  ImputePolicy policy = ImputePolicy::none;
};

struct ImputationAudit {
  std::vector<ImputedCell> cells;
  Index fallback_cells = 0;
  std::vector<std::string> notes;
};

class Preprocessor {
 public:
  static Preprocessor fit(const DataMatrix& train, const PreprocessOptions& options = {});

  // Drops the dropped columns and imputes the rest; `row_ids` labels audit
  // entries (may be empty).
  DataMatrix apply(const DataMatrix& matrix, std::span<const std::string> row_ids = {},
                   ImputationAudit* audit = nullptr) const;

  const MissingnessProfile& profile() const noexcept { return profile_; }
  const std::vector<std::string>& retained_columns() const noexcept { return retained_; }
  const std::vector<std::string>& dropped_columns() const noexcept { return dropped_; }

 private:
  PreprocessOptions options_;
  MissingnessProfile profile_;
  std::vector<std::string> retained_;
  std::vector<std::string> dropped_;
  std::vector<std::string> most_frequent_cols_;
  std::vector<std::string> knn_cols_;
  std::vector<std::string> iterative_cols_;
  MostFrequentImputer most_frequent_;
  KnnImputer knn_;
  IterativeImputer iterative_;
  bool has_iterative_ = false;
};

void to_json(nlohmann::json& j, const MissingnessProfile& profile);
void to_json(nlohmann::json& j, const ImputationAudit& audit);

}  // namespace readmit
