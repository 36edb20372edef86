#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "readmit/cohort.hpp"
#include "readmit/csv.hpp"

namespace readmit {

// Regularized incomplete beta I_x(a, b), continued fraction evaluated with the
// modified Lentz method (relative tolerance 1e-12, at most 300 terms).
double incomplete_beta(double a, double b, double x);

// Two-sided tail probability P(|T| >= |t|) of Student's t with `dof` degrees
// of freedom (dof may be fractional).
double student_t_two_sided(double t, double dof);

struct TTestResult {
  double t_statistic = 0.0;
  double dof = 0.0;  // Welch-Satterthwaite
  double p_value = 1.0;
};

// Welch two-sample t-test, two-sided. Throws DataError when a sample has fewer
// than two values or both sample variances are zero.
TTestResult welch_ttest(std::span<const double> a, std::span<const double> b);

struct GroupComparisonRow {
  std::string feature;
  double mean_a = 0.0;
  double sd_a = 0.0;
  Index n_a = 0;
  double mean_b = 0.0;
  double sd_b = 0.0;
  Index n_b = 0;
  std::optional<TTestResult> test;  // empty when the t-test failed
  std::string error;
};

struct GroupComparisonTable {
  std::string label_a;
  std::string label_b;
  std::vector<GroupComparisonRow> rows;  // schema order
};

// Per-feature observed-cell mean/sd plus Welch p-value between two matrices
// that share a schema.
GroupComparisonTable compare_groups(const DataMatrix& a, const DataMatrix& b,
                                    std::string label_a = "group_a",
                                    std::string label_b = "group_b");

// Non-readmitted (label 0) versus readmitted (label 1).
GroupComparisonTable compare_groups(const LabeledCohort& cohort);

struct VifRow {
  std::string feature;
  double r_squared = 0.0;
  double vif = 1.0;  // +inf when flagged
  bool infinite = false;
};

struct VifReport {
  std::vector<VifRow> rows;

  double max_finite() const;
};

// Variance inflation factors: OLS of each column on the others plus an
// intercept. R^2 >= 1 - 1e-12 is flagged infinite.
VifReport vif(const DataMatrix& matrix);

csv::Table to_table(const GroupComparisonTable& table);
csv::Table to_table(const VifReport& report);
void to_json(nlohmann::json& j, const GroupComparisonTable& table);
void to_json(nlohmann::json& j, const VifReport& report);

}  // namespace readmit
