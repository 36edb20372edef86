#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

namespace readmit {

using Index = Eigen::Index;
using MaskMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

enum class FeatureCategory { demographic, clinical, laboratory };

std::string_view to_string(FeatureCategory category) noexcept;
FeatureCategory parse_feature_category(std::string_view text);

struct FeatureSpec {
  std::string name;
  FeatureCategory category = FeatureCategory::laboratory;
  std::string unit;

  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

// The twelve selected features, in presentation order.
std::vector<FeatureSpec> canonical_schema();

// The twelve selected features followed by 21 placeholder columns standing in
// for the unnamed remainder of the 33-feature candidate list.
std::vector<FeatureSpec> extended_schema();

// Rows x named continuous columns plus an observation mask (true = observed).
// Cells that are not observed store NaN; consumers must consult the mask.
class DataMatrix {
 public:
  DataMatrix() = default;
  DataMatrix(std::vector<FeatureSpec> columns, Eigen::MatrixXd values,
             MaskMatrix mask);

  static DataMatrix fully_observed(std::vector<FeatureSpec> columns,
                                   Eigen::MatrixXd values);

  Index rows() const noexcept { return values_.rows(); }
  Index cols() const noexcept { return values_.cols(); }

  const std::vector<FeatureSpec>& columns() const noexcept { return columns_; }
  std::vector<std::string> column_names() const;
  std::optional<Index> find_column(std::string_view name) const;
  // Throws DataError when the column does not exist.
  Index column_index(std::string_view name) const;

  const Eigen::MatrixXd& values() const noexcept { return values_; }
  const MaskMatrix& mask() const noexcept { return mask_; }
  bool observed(Index row, Index col) const { return mask_(row, col); }
  double value(Index row, Index col) const { return values_(row, col); }

  bool is_fully_observed() const { return mask_.all(); }
  Index missing_count() const { return mask_.size() - mask_.count(); }
  std::vector<double> observed_column(Index col) const;

  DataMatrix select_rows(std::span<const Index> rows) const;
  DataMatrix select_columns(std::span<const std::string> names) const;

  // Copy of this matrix with new values; every cell becomes observed.
  DataMatrix with_values(Eigen::MatrixXd values) const;

  // Throws DataError unless the matrix is fully observed.
  const Eigen::MatrixXd& require_complete(std::string_view context) const;

 private:
  std::vector<FeatureSpec> columns_;
  Eigen::MatrixXd values_;
  MaskMatrix mask_;
};

struct LabeledCohort {
  DataMatrix matrix;
  std::vector<int> labels;  // 1 = readmitted
  std::vector<std::string> row_ids;

  Index rows() const noexcept { return matrix.rows(); }
  Index count_label(int label) const;
  LabeledCohort select_rows(std::span<const Index> rows) const;

  // Throws DataError if lengths disagree or a label is not in {0,1}.
  void validate() const;
};

// Label column name used by every cohort file.
inline constexpr std::string_view kLabelColumn = "readmitted";
inline constexpr std::string_view kRowIdColumn = "row_id";

// Reads a comma-delimited cohort with a header row. Blank cells and the
// tokens NA / NaN mark missing values. Columns are reordered to `schema`;
// unknown extra columns are ignored. A `row_id` column is optional.
LabeledCohort load_cohort(const std::filesystem::path& path,
                          std::span<const FeatureSpec> schema);
LabeledCohort read_cohort(std::istream& in,
                          std::span<const FeatureSpec> schema);

// Writes `row_id,<features...>,readmitted` with shortest round-trip doubles;
// missing cells are written blank.
void write_cohort(const std::filesystem::path& path,
                  const LabeledCohort& cohort);
void write_cohort(std::ostream& out, const LabeledCohort& cohort);

struct SplitIndices {
  std::vector<Index> train;  // ascending
  std::vector<Index> test;   // ascending
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  bool stratified = true;
};

// Size of the held-out part: floor(n * (1 - train_fraction)), guarded against
// representation error in the fraction.
Index test_count(Index n, double train_fraction);

SplitIndices split(const LabeledCohort& cohort, double train_fraction,
                   std::uint64_t seed, bool stratified);

struct SynthFeature {
  FeatureSpec spec;
  double mean0 = 0.0;  // non-readmitted group
  double sd0 = 1.0;
  double mean1 = 0.0;  // readmitted group
  double sd1 = 1.0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  double missing_rate = 0.0;
};

struct SynthCohortSpec {
  std::size_t n = 5000;
  double prevalence = 0.07;
  std::vector<SynthFeature> features;
  std::uint64_t seed = 0;
  // Shared latent-factor correlation between every pair of features, in
  // [0, 1). Zero generates independent columns.
  double correlation = 0.0;

  void validate() const;
  std::vector<FeatureSpec> schema() const;
};

// Reported group means/SDs (non-readmitted vs readmitted),
// with physiologic bounds and small per-feature missingness.
SynthCohortSpec group_cohort_spec(std::size_t n, double prevalence,
                                   std::uint64_t seed);

// Scales the between-group contrast of selected features and shrinks the rest.
// For a feature with gain g the readmitted mean becomes m0 + g (m1 - m0); every
// other feature gets m0 + a (m1 - m0) and sd0 (sd1 / sd0)^a with a =
// `attenuation`. SDs of boosted features are left unchanged.
SynthCohortSpec emphasize_signals(SynthCohortSpec base,
                                  const std::map<std::string, double>& gains,
                                  double attenuation);

// Default benchmark cohort: age and SpO2 are the dominant group-separating
// signals (age gap doubled, remaining ten contrasts attenuated to 0.3).
SynthCohortSpec planted_signal_spec(std::size_t n, double prevalence,
                                    std::uint64_t seed);

LabeledCohort generate_synthetic(const SynthCohortSpec& spec);

void to_json(nlohmann::json& j, const SynthCohortSpec& spec);
void from_json(const nlohmann::json& j, SynthCohortSpec& spec);

}  // namespace readmit
