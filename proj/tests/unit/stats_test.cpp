#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "readmit/error.hpp"
#include "readmit/stats.hpp"

using namespace readmit;

namespace {

std::vector<double> draw(std::mt19937_64& rng, int n, double mean, double sd) {
  std::normal_distribution<double> z(mean, sd);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = z(rng);
  return v;
}

DataMatrix two_columns(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::MatrixXd v(a.size(), 2);
  v << a, b;
  return DataMatrix::fully_observed({{"a", FeatureCategory::laboratory, ""}, {"b", FeatureCategory::laboratory, ""}}, v);
}

// Residual of `e` after least-squares projection on [1, x].
Eigen::VectorXd orthogonalize(const Eigen::VectorXd& x, Eigen::VectorXd e) {
  e.array() -= e.mean();
  const Eigen::VectorXd xc = x.array() - x.mean();
  e -= xc * (xc.dot(e) / xc.squaredNorm());
  return e;
}

}  // namespace

TEST(IncompleteBeta, KnownValues) {
  EXPECT_NEAR(incomplete_beta(1.0, 1.0, 0.3), 0.3, 1e-14);
  EXPECT_NEAR(incomplete_beta(2.0, 3.0, 0.4), 0.5248, 1e-12);
  EXPECT_EQ(incomplete_beta(2.0, 2.0, 0.0), 0.0);
  EXPECT_EQ(incomplete_beta(2.0, 2.0, 1.0), 1.0);
  EXPECT_NEAR(incomplete_beta(0.5, 0.5, 0.5), 0.5, 1e-12);
}

TEST(StudentT, MatchesQuadrature) {
  for (const double dof : {1.0, 2.5, 7.0, 30.0, 250.0}) {
    for (const double t : {0.0, 0.3, 1.0, 2.0, 4.5, 12.0}) {
      EXPECT_NEAR(student_t_two_sided(t, dof), oracle::t_tail_quadrature(t, dof), 1e-10)
          << "t=" << t << " dof=" << dof;
    }
  }
}

TEST(Welch, IdenticalSamples) {
  const std::vector<double> a{1, 2, 3};
  const auto r = welch_ttest(a, a);
  EXPECT_EQ(r.t_statistic, 0.0);
  EXPECT_EQ(r.p_value, 1.0);
}

TEST(Welch, HandFixtureAgainstQuadrature) {
  const std::vector<double> a{1, 2, 3, 4, 5};
  const std::vector<double> b{2, 4, 6, 8, 10};
  const auto r = welch_ttest(a, b);
  const auto ref = oracle::welch_reference(a, b);
  EXPECT_NEAR(r.t_statistic, ref.t, 1e-12);
  EXPECT_NEAR(r.dof, ref.dof, 1e-12);
  EXPECT_NEAR(r.p_value, ref.p, 1e-6);
}

TEST(Welch, RandomFixturesAgainstQuadrature) {
  std::mt19937_64 rng(7);
  for (int f = 0; f < 50; ++f) {
    const int na = 2 + static_cast<int>(rng() % 40);
    const int nb = 2 + static_cast<int>(rng() % 40);
    const auto a = draw(rng, na, 0.0, 1.0 + static_cast<double>(rng() % 5));
    const auto b = draw(rng, nb, static_cast<double>(rng() % 7) * 0.5, 0.5 + static_cast<double>(rng() % 3));
    const auto r = welch_ttest(a, b);
    const auto ref = oracle::welch_reference(a, b);
    ASSERT_NEAR(r.p_value, ref.p, 1e-6) << "fixture " << f;
  }
}

TEST(Welch, Errors) {
  const std::vector<double> zeros{0, 0, 0};
  const std::vector<double> one{1};
  const std::vector<double> two{1, 2};
  EXPECT_THROW(welch_ttest(zeros, zeros), DataError);
  EXPECT_THROW(welch_ttest(one, two), DataError);
}

TEST(Welch, AntisymmetricAndEquivariant) {
  std::mt19937_64 rng(8);
  for (int f = 0; f < 20; ++f) {
    const auto a = draw(rng, 12, 0.0, 1.0);
    const auto b = draw(rng, 9, 0.4, 2.0);
    const auto ab = welch_ttest(a, b);
    const auto ba = welch_ttest(b, a);
    EXPECT_EQ(ab.t_statistic, -ba.t_statistic);
    EXPECT_EQ(ab.p_value, ba.p_value);
    std::vector<double> a2 = a;
    std::vector<double> b2 = b;
    for (auto& x : a2) x = 3.5 * x - 2.0;
    for (auto& x : b2) x = 3.5 * x - 2.0;
    const auto t = welch_ttest(a2, b2);
    EXPECT_NEAR(t.t_statistic, ab.t_statistic, 1e-12 * std::max(1.0, std::abs(ab.t_statistic)));
    EXPECT_NEAR(t.p_value, ab.p_value, 1e-12);
  }
}

TEST(Welch, PValueDecreasesInAbsT) {
  for (const double dof : {1.5, 4.0, 20.0, 100.0}) {
    double previous = 1.0;
    for (double t = 0.0; t <= 20.0; t += 0.25) {
      const double p = student_t_two_sided(t, dof);
      EXPECT_LE(p, previous);
      EXPECT_GE(p, 0.0);
      previous = p;
    }
  }
}

TEST(CompareGroups, TypeOneErrorCalibration) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> z(0.0, 1.0);
  const int replicates = 200;
  const int features = 12;
  const int n = 10000;
  long rejections = 0;
  std::vector<double> a(n);
  std::vector<double> b(n);
  for (int r = 0; r < replicates; ++r) {
    for (int j = 0; j < features; ++j) {
      for (auto& x : a) x = z(rng);
      for (auto& x : b) x = z(rng);
      if (welch_ttest(a, b).p_value < 0.05) ++rejections;
    }
  }
  const double rate = static_cast<double>(rejections) / (replicates * features);
  EXPECT_NEAR(rate, 0.05, 0.03);
}

TEST(CompareGroups, DefaultGroupParametersSeparateAge) {
  const auto cohort = generate_synthetic(group_cohort_spec(5000, 0.07, 31));
  const auto table = compare_groups(cohort);
  ASSERT_EQ(table.rows.size(), 12u);
  EXPECT_EQ(table.rows[0].feature, "age");
  ASSERT_TRUE(table.rows[0].test.has_value());
  EXPECT_LT(table.rows[0].test->p_value, 0.001);
}

TEST(CompareGroups, SameGroupTwiceGivesUnitP) {
  const auto cohort = generate_synthetic(group_cohort_spec(200, 0.2, 2));
  const auto table = compare_groups(cohort.matrix, cohort.matrix);
  for (const auto& row : table.rows) {
    ASSERT_TRUE(row.test.has_value()) << row.feature;
    EXPECT_EQ(row.test->p_value, 1.0) << row.feature;
  }
}

TEST(CompareGroups, FailingColumnIsFlaggedNotFatal) {
  Eigen::MatrixXd va(3, 2);
  va << 1, 5, 1, 6, 1, 7;
  Eigen::MatrixXd vb(3, 2);
  vb << 1, 2, 1, 3, 1, 1;
  const std::vector<FeatureSpec> cols{{"flat", FeatureCategory::laboratory, ""}, {"x", FeatureCategory::laboratory, ""}};
  const auto t = compare_groups(DataMatrix::fully_observed(cols, va), DataMatrix::fully_observed(cols, vb));
  EXPECT_FALSE(t.rows[0].test.has_value());
  EXPECT_FALSE(t.rows[0].error.empty());
  EXPECT_TRUE(t.rows[1].test.has_value());
}

TEST(Vif, OrthogonalColumnsGiveOne) {
  Eigen::VectorXd a(4);
  Eigen::VectorXd b(4);
  a << 1, -1, 1, -1;
  b << 1, 1, -1, -1;
  const auto r = vif(two_columns(a, b));
  EXPECT_NEAR(r.rows[0].vif, 1.0, 1e-9);
  EXPECT_NEAR(r.rows[1].vif, 1.0, 1e-9);
}

TEST(Vif, ConstructedCollinearity) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> z(0.0, 1.0);
  const int n = 500;
  Eigen::VectorXd x1(n);
  Eigen::VectorXd e(n);
  for (int i = 0; i < n; ++i) {
    x1(i) = z(rng);
    e(i) = z(rng);
  }
  e = orthogonalize(x1, e);
  const Eigen::VectorXd x1c = x1.array() - x1.mean();
  // R^2 = var(x1) / (var(x1) + var(e)) = 0.99.
  e *= std::sqrt(x1c.squaredNorm() * (1.0 / 0.99 - 1.0) / e.squaredNorm());
  const Eigen::VectorXd x2 = x1 + e;
  const auto r = vif(two_columns(x1, x2));
  EXPECT_NEAR(r.rows[1].vif, 100.0, 2.0);
  EXPECT_NEAR(r.rows[1].r_squared, 0.99, 1e-9);
}

TEST(Vif, DuplicateColumnIsInfinite) {
  Eigen::VectorXd a(5);
  a << 1, 4, 2, 8, 5;
  const auto r = vif(two_columns(a, a));
  EXPECT_TRUE(r.rows[0].infinite);
  EXPECT_TRUE(r.rows[1].infinite);
}

TEST(Vif, AffineRescalingInvariance) {
  const auto c = generate_synthetic(group_cohort_spec(400, 0.3, 5));
  // Complete-case view of the table-three cohort.
  std::vector<Index> rows;
  for (Index i = 0; i < c.rows(); ++i) {
    if (c.matrix.mask().row(i).all()) rows.push_back(i);
  }
  const auto m = c.matrix.select_rows(rows);
  const auto base = vif(m);
  Eigen::MatrixXd v = m.values();
  v.col(3) = (v.col(3).array() * 1000.0 + 17.0).matrix();
  const auto scaled = vif(DataMatrix::fully_observed(m.columns(), v));
  for (std::size_t j = 0; j < base.rows.size(); ++j) {
    EXPECT_NEAR(scaled.rows[j].vif, base.rows[j].vif, 1e-9) << base.rows[j].feature;
  }
}

TEST(Vif, IndependentSyntheticFeaturesBelowFive) {
  auto spec = group_cohort_spec(2000, 0.07, 12);
  for (auto& f : spec.features) f.missing_rate = 0.0;
  const auto r = vif(generate_synthetic(spec).matrix);
  ASSERT_EQ(r.rows.size(), 12u);
  for (const auto& row : r.rows) EXPECT_LT(row.vif, 5.0) << row.feature;
}
