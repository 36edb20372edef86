#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "readmit/error.hpp"
#include "readmit/resample.hpp"

using namespace readmit;

namespace {

struct Fixture {
  Eigen::MatrixXd x;
  std::vector<int> labels;
};

// Overlapping Gaussian clouds; minority label 1.
Fixture clouds(std::uint64_t seed, int minority, int majority, int d, double shift) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Fixture f;
  f.x.resize(minority + majority, d);
  for (int i = 0; i < minority + majority; ++i) {
    const bool pos = i < minority;
    for (int j = 0; j < d; ++j) f.x(i, j) = z(rng) + (pos ? shift : 0.0);
    f.labels.push_back(pos ? 1 : 0);
  }
  return f;
}

std::vector<Index> rows_with(const std::vector<int>& labels, int label, Index limit) {
  std::vector<Index> out;
  for (Index i = 0; i < limit; ++i) {
    if (labels[static_cast<std::size_t>(i)] == label) out.push_back(i);
  }
  return out;
}

}  // namespace

TEST(Adasyn, TargetCountFormula) {
  const auto f = clouds(1, 10, 100, 3, 1.0);
  const auto r = adasyn(f.x, f.labels, AdasynConfig{});
  EXPECT_EQ(r.target_total, 90);
  EXPECT_EQ(r.minority_count, 10);
  EXPECT_EQ(r.majority_count, 100);
}

TEST(Adasyn, GeometryAndCounts) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto f = clouds(seed, 15 + static_cast<int>(seed) * 3, 120, 4, 0.8);
    AdasynConfig config;
    config.seed = seed;
    const auto r = adasyn(f.x, f.labels, config);
    const Index n0 = f.x.rows();
    ASSERT_EQ(r.x.topRows(n0), f.x);
    const auto minority = rows_with(f.labels, 1, n0);
    long generated = 0;
    for (const auto& p : r.seed_points) generated += p.generated;
    ASSERT_EQ(r.synthetic_count, generated);
    ASSERT_EQ(r.x.rows(), n0 + generated);
    EXPECT_LE(std::abs(generated - r.target_total), static_cast<long>(minority.size()) / 2 + 1);
    EXPECT_EQ(generated, r.target_total);
    for (const auto& p : r.seed_points) {
      const double quota = p.r_hat * static_cast<double>(r.target_total);
      EXPECT_GE(p.generated, std::floor(quota) - 1e-9);
      EXPECT_LE(p.generated, std::ceil(quota) + 1e-9);
    }
    const long ms = static_cast<long>(minority.size());
    const long after = ms + generated;
    const long majority = n0 - ms;
    EXPECT_LE(std::abs(after - majority), (r.target_total + ms - 1) / ms);
    for (Index k = 0; k < r.synthetic_count; ++k) {
      const auto& src = r.sources[static_cast<std::size_t>(k)];
      const Eigen::VectorXd s = r.x.row(n0 + k).transpose();
      ASSERT_EQ(r.labels[static_cast<std::size_t>(n0 + k)], 1);
      const auto nb = oracle::nearest_rows(f.x, src.seed_row, minority, config.k_neighbors);
      ASSERT_NE(std::find(nb.begin(), nb.end(), src.neighbor_row), nb.end());
      const auto fit = oracle::fit_segment(f.x.row(src.seed_row).transpose(),
                                           f.x.row(src.neighbor_row).transpose(), s);
      ASSERT_LT(fit.residual, 1e-9);
      ASSERT_GE(src.lambda, 0.0);
      ASSERT_LE(src.lambda, 1.0);
      ASSERT_NEAR(fit.lambda, src.lambda, 1e-9);
    }
  }
}

TEST(Adasyn, DensityRatioUsesFullData) {
  const auto f = clouds(3, 12, 60, 2, 1.5);
  const auto r = adasyn(f.x, f.labels, AdasynConfig{});
  std::vector<Index> all(static_cast<std::size_t>(f.x.rows()));
  std::iota(all.begin(), all.end(), Index{0});
  double total = 0.0;
  for (const auto& p : r.seed_points) {
    int majority = 0;
    for (const Index nb : oracle::nearest_rows(f.x, p.row, all, 5)) majority += f.labels[static_cast<std::size_t>(nb)] == 0;
    EXPECT_DOUBLE_EQ(p.r, majority / 5.0);
    total += p.r_hat;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Adasyn, ZeroTargetLeavesInputUnchanged) {
  const auto f = clouds(4, 10, 12, 2, 1.0);
  AdasynConfig config;
  config.beta = 0.2;  // (12 - 10) * 0.2 rounds to 0
  const auto r = adasyn(f.x, f.labels, config);
  EXPECT_EQ(r.synthetic_count, 0);
  EXPECT_EQ(r.x, f.x);
  EXPECT_EQ(r.labels, f.labels);
}

TEST(Adasyn, UniformFallbackWithoutMajorityNeighbors) {
  auto f = clouds(5, 10, 40, 2, 0.0);
  for (int i = 0; i < 10; ++i) f.x.row(i).array() += 100.0;
  const auto r = adasyn(f.x, f.labels, AdasynConfig{});
  EXPECT_TRUE(r.uniform_fallback);
  long generated = 0;
  for (const auto& p : r.seed_points) {
    EXPECT_DOUBLE_EQ(p.r_hat, 0.1);
    generated += p.generated;
  }
  EXPECT_EQ(generated, 30);
}

TEST(Adasyn, NeverReplicatesMajorityRows) {
  const auto f = clouds(6, 20, 80, 3, 0.5);
  const auto r = adasyn(f.x, f.labels, AdasynConfig{});
  const auto majority = rows_with(f.labels, 0, f.x.rows());
  for (Index k = f.x.rows(); k < r.x.rows(); ++k) {
    for (const Index m : majority) ASSERT_NE(r.x.row(k), f.x.row(m));
  }
}

TEST(Adasyn, DeterministicPerSeed) {
  const auto f = clouds(7, 20, 80, 3, 0.5);
  AdasynConfig config;
  config.seed = 99;
  const auto a = adasyn(f.x, f.labels, config);
  const auto b = adasyn(f.x, f.labels, config);
  EXPECT_EQ(a.x, b.x);
  config.seed = 100;
  EXPECT_NE(adasyn(f.x, f.labels, config).x, a.x);
}

TEST(Adasyn, Errors) {
  const auto f = clouds(8, 10, 20, 2, 0.5);
  std::vector<int> single(f.labels.size(), 0);
  EXPECT_THROW(adasyn(f.x, single, AdasynConfig{}), DataError);
  std::vector<int> lone(f.labels.size(), 0);
  lone[0] = 1;
  EXPECT_THROW(adasyn(f.x, lone, AdasynConfig{}), DataError);
  AdasynConfig bad;
  bad.beta = 1.5;
  EXPECT_THROW(adasyn(f.x, f.labels, bad), ConfigError);
  bad.beta = 1.0;
  bad.k_neighbors = 0;
  EXPECT_THROW(adasyn(f.x, f.labels, bad), ConfigError);
}

TEST(RandomOversample, AlreadyBalancedIsIdentity) {
  const auto f = clouds(9, 5, 5, 2, 0.5);
  const auto r = random_oversample(f.x, f.labels, 1);
  EXPECT_EQ(r.x, f.x);
  EXPECT_EQ(r.synthetic_count, 0);
}

TEST(RandomOversample, DuplicatesAreExactMinorityCopies) {
  const auto f = clouds(10, 2, 8, 3, 0.5);
  const auto r = random_oversample(f.x, f.labels, 2);
  ASSERT_EQ(r.synthetic_count, 6);
  for (Index k = f.x.rows(); k < r.x.rows(); ++k) {
    EXPECT_TRUE(r.x.row(k) == f.x.row(0) || r.x.row(k) == f.x.row(1));
    EXPECT_EQ(r.labels[static_cast<std::size_t>(k)], 1);
  }
  EXPECT_EQ(random_oversample(f.x, f.labels, 2).x, r.x);
  std::vector<int> single(f.labels.size(), 1);
  EXPECT_THROW(random_oversample(f.x, single, 0), DataError);
}
