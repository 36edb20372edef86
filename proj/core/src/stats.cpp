#include "readmit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/QR>
#include <nlohmann/json.hpp>

#include "readmit/error.hpp"

namespace readmit {

namespace {

constexpr double kLentzTolerance = 1e-12;
constexpr int kLentzMaxIterations = 300;
constexpr double kTiny = 1e-300;

// Continued fraction for I_x(a, b); valid (fast) for x < (a + 1) / (a + b + 2).
double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kLentzMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) <= kLentzTolerance) return h;
  }
  throw NumericError("incomplete beta: continued fraction did not converge");
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // n - 1 denominator
  Index n = 0;
};

Moments sample_moments(std::span<const double> x) {
  Moments m;
  m.n = static_cast<Index>(x.size());
  if (x.empty()) return m;
  m.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  if (x.size() > 1) {
    double ss = 0.0;
    for (const double v : x) ss += (v - m.mean) * (v - m.mean);
    m.variance = ss / static_cast<double>(x.size() - 1);
  }
  return m;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw NumericError("incomplete beta: a and b must be positive");
  if (std::isnan(x)) throw NumericError("incomplete beta: x is NaN");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double dof) {
  if (!(dof > 0.0)) throw NumericError("student t: degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  const double p = incomplete_beta(0.5 * dof, 0.5, dof / (dof + t * t));
  return std::clamp(p, 0.0, 1.0);
}

TTestResult welch_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw DataError("welch t-test: each sample needs at least two values");
  }
  const auto ma = sample_moments(a);
  const auto mb = sample_moments(b);
  if (ma.variance == 0.0 && mb.variance == 0.0) {
    throw DataError("welch t-test: both samples have zero variance");
  }
  const double qa = ma.variance / static_cast<double>(ma.n);
  const double qb = mb.variance / static_cast<double>(mb.n);
  const double se2 = qa + qb;
  TTestResult r;
  r.t_statistic = (ma.mean - mb.mean) / std::sqrt(se2);
  r.dof = se2 * se2 /
          (qa * qa / static_cast<double>(ma.n - 1) + qb * qb / static_cast<double>(mb.n - 1));
  r.p_value = student_t_two_sided(r.t_statistic, r.dof);
  return r;
}

GroupComparisonTable compare_groups(const DataMatrix& a, const DataMatrix& b,
                                    std::string label_a, std::string label_b) {
  if (a.column_names() != b.column_names()) {
    throw DataError("compare_groups: groups have different schemas");
  }
  if (a.rows() == 0 || b.rows() == 0) throw DataError("compare_groups: empty group");
  GroupComparisonTable table;
  table.label_a = std::move(label_a);
  table.label_b = std::move(label_b);
  for (Index j = 0; j < a.cols(); ++j) {
    GroupComparisonRow row;
    row.feature = a.columns()[static_cast<std::size_t>(j)].name;
    const auto xa = a.observed_column(j);
    const auto xb = b.observed_column(j);
    const auto ma = sample_moments(xa);
    const auto mb = sample_moments(xb);
    row.mean_a = ma.mean;
    row.sd_a = std::sqrt(ma.variance);
    row.n_a = ma.n;
    row.mean_b = mb.mean;
    row.sd_b = std::sqrt(mb.variance);
    row.n_b = mb.n;
    try {
      row.test = welch_ttest(xa, xb);
    } catch (const Error& e) {
      row.error = e.what();
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

GroupComparisonTable compare_groups(const LabeledCohort& cohort) {
  std::vector<Index> group0;
  std::vector<Index> group1;
  for (Index i = 0; i < cohort.rows(); ++i) {
    (cohort.labels[static_cast<std::size_t>(i)] == 1 ? group1 : group0).push_back(i);
  }
  return compare_groups(cohort.matrix.select_rows(group0), cohort.matrix.select_rows(group1),
                        "group_0", "group_1");
}

double VifReport::max_finite() const {
  double best = 0.0;
  for (const auto& r : rows) {
    if (!r.infinite) best = std::max(best, r.vif);
  }
  return best;
}

VifReport vif(const DataMatrix& matrix) {
  const auto& x = matrix.require_complete("vif");
  const Index n = x.rows();
  const Index d = x.cols();
  if (d < 2) throw DataError("vif: need at least two columns");
  if (n <= d) throw DataError("vif: need more rows than columns");
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  VifReport report;
  for (Index j = 0; j < d; ++j) {
    const Eigen::VectorXd y = centered.col(j);
    const double sst = y.squaredNorm();
    const auto& name = matrix.columns()[static_cast<std::size_t>(j)].name;
    if (!(sst > 0.0)) throw DataError("vif: column '" + name + "' is constant");
    Eigen::MatrixXd others(n, d - 1);
    for (Index c = 0, k = 0; c < d; ++c) {
      if (c != j) others.col(k++) = centered.col(c);
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(others);
    const Eigen::VectorXd beta = qr.solve(y);
    const double ssr = (y - others * beta).squaredNorm();
    VifRow row;
    row.feature = name;
    row.r_squared = std::clamp(1.0 - ssr / sst, 0.0, 1.0);
    if (row.r_squared >= 1.0 - 1e-12) {
      row.infinite = true;
      row.vif = std::numeric_limits<double>::infinity();
    } else {
      row.vif = 1.0 / (1.0 - row.r_squared);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

csv::Table to_table(const GroupComparisonTable& table) {
  using csv::format_double;
  csv::Table out;
  out.header = {"feature",
                table.label_a + "_mean", table.label_a + "_sd", table.label_a + "_n",
                table.label_b + "_mean", table.label_b + "_sd", table.label_b + "_n",
                "t_statistic", "dof", "p_value"};
  for (const auto& r : table.rows) {
    out.rows.push_back({r.feature, format_double(r.mean_a), format_double(r.sd_a),
                        std::to_string(r.n_a), format_double(r.mean_b), format_double(r.sd_b),
                        std::to_string(r.n_b),
                        r.test ? format_double(r.test->t_statistic) : "",
                        r.test ? format_double(r.test->dof) : "",
                        r.test ? format_double(r.test->p_value) : ""});
  }
  return out;
}

csv::Table to_table(const VifReport& report) {
  csv::Table out;
  out.header = {"feature", "r_squared", "vif", "infinite"};
  for (const auto& r : report.rows) {
    out.rows.push_back({r.feature, csv::format_double(r.r_squared),
                        r.infinite ? "inf" : csv::format_double(r.vif),
                        r.infinite ? "1" : "0"});
  }
  return out;
}

void to_json(nlohmann::json& j, const GroupComparisonTable& table) {
  auto rows = nlohmann::json::array();
  for (const auto& r : table.rows) {
    nlohmann::json row = {{"feature", r.feature},
                          {table.label_a, {{"mean", r.mean_a}, {"sd", r.sd_a}, {"n", r.n_a}}},
                          {table.label_b, {{"mean", r.mean_b}, {"sd", r.sd_b}, {"n", r.n_b}}}};
    if (r.test) {
      row["t_statistic"] = r.test->t_statistic;
      row["dof"] = r.test->dof;
      row["p_value"] = r.test->p_value;
    } else {
      row["p_value"] = nullptr;
      row["error"] = r.error;
    }
    rows.push_back(std::move(row));
  }
  j = {{"groups", {table.label_a, table.label_b}}, {"rows", rows}};
}

void to_json(nlohmann::json& j, const VifReport& report) {
  auto rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"feature", r.feature},
                    {"r_squared", r.r_squared},
                    {"vif", r.infinite ? nlohmann::json(nullptr) : nlohmann::json(r.vif)},
                    {"infinite", r.infinite}});
  }
  j = {{"threshold", 5.0}, {"rows", rows}};
}

}  // namespace readmit
