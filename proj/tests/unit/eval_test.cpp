#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "readmit/error.hpp"
#include "readmit/eval.hpp"

using namespace readmit;

namespace {

struct Scores {
  std::vector<double> p;
  std::vector<int> y;
};

// Quantized scores so that ties are common.
Scores tied_fixture(std::uint64_t seed, int n, int levels) {
  std::mt19937_64 rng(seed);
  Scores s;
  for (int i = 0; i < n; ++i) {
    const int y = i < 2 ? i : static_cast<int>(rng() % 3 == 0);
    const int level = static_cast<int>(rng() % static_cast<std::uint64_t>(levels)) + (y ? levels / 3 : 0);
    s.y.push_back(y);
    s.p.push_back(static_cast<double>(level) / (2.0 * levels));
  }
  return s;
}

// Scores with true AUROC of about 0.9: positives shifted by 1.8 sd.
Scores binormal(std::uint64_t seed, int n, double prevalence) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Scores s;
  for (int i = 0; i < n; ++i) {
    const int y = i < 2 ? i : static_cast<int>(u(rng) < prevalence);
    s.y.push_back(y);
    s.p.push_back(1.0 / (1.0 + std::exp(-(z(rng) + 1.8 * y))));
  }
  return s;
}

}  // namespace

TEST(Confusion, ThresholdRule) {
  const std::vector<double> p{0.9, 0.1};
  const std::vector<int> y{1, 0};
  const auto c = confusion_at_threshold(p, y, 0.5);
  EXPECT_EQ(c, (ConfusionCounts{1, 0, 1, 0}));
  const auto all = confusion_at_threshold(p, y, 0.0);
  EXPECT_EQ(all.fp, 1);
  EXPECT_EQ(all.tp, 1);
  const auto none = confusion_at_threshold(p, y, std::nextafter(0.9, 1.0));
  EXPECT_EQ(none.tp + none.fp, 0);
  EXPECT_EQ(confusion_at_threshold(p, y, 0.9).tp, 1);
  EXPECT_THROW(confusion_at_threshold(p, std::vector<int>{1}, 0.5), DataError);
}

TEST(Metrics, CountArithmetic) {
  const auto m = metrics_from_counts({2, 0, 3, 1});
  EXPECT_DOUBLE_EQ(*m.sensitivity, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(*m.specificity, 1.0);
  EXPECT_DOUBLE_EQ(m.accuracy, 5.0 / 6.0);
  const auto perfect = metrics(std::vector<double>{0.9, 0.8, 0.1}, std::vector<int>{1, 1, 0}, 0.5);
  EXPECT_EQ(perfect.accuracy, 1.0);
  EXPECT_EQ(*perfect.sensitivity, 1.0);
  EXPECT_EQ(*perfect.specificity, 1.0);
  const auto constant = metrics(std::vector<double>{0.9, 0.9, 0.9, 0.9}, std::vector<int>{1, 0, 1, 0}, 0.5);
  EXPECT_EQ(*constant.sensitivity, 1.0);
  EXPECT_EQ(*constant.specificity, 0.0);
  EXPECT_EQ(constant.accuracy, 0.5);
  const auto no_neg = metrics(std::vector<double>{0.9}, std::vector<int>{1}, 0.5);
  EXPECT_FALSE(no_neg.specificity.has_value());
}

TEST(Metrics, SwappingLabelsSwapsSensitivityAndSpecificity) {
  const auto s = binormal(1, 200, 0.3);
  std::vector<int> flipped;
  std::vector<double> complement;
  for (std::size_t i = 0; i < s.y.size(); ++i) {
    flipped.push_back(1 - s.y[i]);
    complement.push_back(1.0 - s.p[i]);
  }
  // Strict complement of the >= rule: predicted positive iff 1 - p > 0.5.
  const double thr = std::nextafter(0.5, 1.0);
  const auto a = metrics(s.p, s.y, 0.5);
  const auto b = metrics(complement, flipped, thr);
  bool boundary = false;
  for (const double p : s.p) boundary |= p == 0.5;
  ASSERT_FALSE(boundary);
  EXPECT_EQ(*a.sensitivity, *b.specificity);
  EXPECT_EQ(*a.specificity, *b.sensitivity);
}

TEST(Auroc, HandCases) {
  EXPECT_EQ(auroc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<int>{1, 1, 0, 0}), 1.0);
  const std::vector<double> p{0.8, 0.6, 0.6, 0.3};
  const std::vector<int> y{1, 0, 1, 0};
  EXPECT_EQ(oracle::pairwise_auroc(p, y), 0.875);
  EXPECT_EQ(auroc(p, y), 0.875);
  EXPECT_THROW(auroc(p, std::vector<int>{1, 1, 1, 1}), DataError);
}

TEST(Auroc, MatchesPairwiseAndTrapezoid) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = tied_fixture(seed, 5 + static_cast<int>(seed % 60), 2 + static_cast<int>(seed % 9));
    const double mw = auroc(s.p, s.y);
    EXPECT_NEAR(mw, oracle::pairwise_auroc(s.p, s.y), 1e-12);
    const auto pts = roc_points(s.p, s.y);
    EXPECT_NEAR(trapezoid_area(pts), mw, 1e-12);
  }
}

TEST(Auroc, NullAndMonotoneInvariance) {
  auto s = binormal(2, 10000, 0.5);
  const double a = auroc(s.p, s.y);
  std::vector<double> logit;
  for (const double p : s.p) logit.push_back(std::log(p / (1.0 - p)) * 3.0 + 7.0);
  EXPECT_EQ(auroc(logit, s.y), a);
  std::mt19937_64 rng(3);
  std::shuffle(s.y.begin(), s.y.end(), rng);
  const double null = auroc(s.p, s.y);
  EXPECT_GE(null, 0.47);
  EXPECT_LE(null, 0.53);
}

TEST(RocPoints, ShapeAndEndpoints) {
  const auto two = roc_points(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0});
  ASSERT_EQ(two.size(), 3u);
  EXPECT_EQ(two[0].fpr, 0.0);
  EXPECT_EQ(two[0].tpr, 0.0);
  EXPECT_EQ(two[1].fpr, 0.0);
  EXPECT_EQ(two[1].tpr, 1.0);
  EXPECT_EQ(two[2].fpr, 1.0);
  EXPECT_EQ(two[2].tpr, 1.0);
  const auto flat = roc_points(std::vector<double>{0.4, 0.4, 0.4}, std::vector<int>{1, 0, 0});
  EXPECT_EQ(flat.front().fpr, 0.0);
  EXPECT_EQ(flat.back().tpr, 1.0);
  EXPECT_DOUBLE_EQ(trapezoid_area(flat), 0.5);
  const auto s = tied_fixture(4, 80, 5);
  const auto pts = roc_points(s.p, s.y);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    EXPECT_GE(pts[i].fpr, pts[i - 1].fpr);
    EXPECT_GE(pts[i].tpr, pts[i - 1].tpr);
  }
}

TEST(Bootstrap, SeparatedDeterministicAndWidth) {
  const std::vector<double> p{0.9, 0.8, 0.7, 0.3, 0.2, 0.1};
  const std::vector<int> y{1, 1, 1, 0, 0, 0};
  const auto sep = bootstrap_ci(p, y, 200, 0.05, 1);
  EXPECT_EQ(sep.low, 1.0);
  EXPECT_EQ(sep.high, 1.0);
  const auto s = binormal(5, 463, 0.3);
  const auto a = bootstrap_ci(s.p, s.y, 1000, 0.05, 11);
  const auto b = bootstrap_ci(s.p, s.y, 1000, 0.05, 11);
  EXPECT_EQ(a.low, b.low);
  EXPECT_EQ(a.high, b.high);
  EXPECT_GE(a.high - a.low, 0.02);
  EXPECT_LE(a.high - a.low, 0.10);
  EXPECT_THROW(bootstrap_ci(s.p, s.y, 50, 0.05, 1), ConfigError);
}

TEST(Bootstrap, IntervalContainsPointEstimate) {
  int contained = 0;
  const int fixtures = 100;
  for (int f = 0; f < fixtures; ++f) {
    const auto s = binormal(100 + static_cast<std::uint64_t>(f), 150, 0.3);
    const double a = auroc(s.p, s.y);
    const auto ci = bootstrap_ci(s.p, s.y, 200, 0.05, static_cast<std::uint64_t>(f));
    contained += ci.low <= a && a <= ci.high;
  }
  EXPECT_GE(contained, 99);
}

TEST(Youden, MaximizesJAmongScores) {
  const auto s = binormal(6, 300, 0.2);
  const double thr = youden_threshold(s.p, s.y);
  auto j = [&](double t) {
    const auto m = metrics(s.p, s.y, t);
    return *m.sensitivity + *m.specificity - 1.0;
  };
  const double best = j(thr);
  for (const double t : s.p) EXPECT_LE(j(t), best + 1e-15);
}

TEST(Evaluate, ReportFields) {
  const auto s = binormal(7, 200, 0.2);
  EvalOptions o;
  o.bootstrap_resamples = 200;
  o.seed = 3;
  const auto r = evaluate(s.p, s.y, o);
  EXPECT_EQ(r.n, 200);
  EXPECT_EQ(r.fixed.threshold, 0.5);
  EXPECT_EQ(r.fixed.confusion.total(), 200);
  EXPECT_EQ(r.auroc, auroc(s.p, s.y));
  EXPECT_LE(r.auroc_ci.low, r.auroc_ci.high);
  EXPECT_EQ(r.roc.front().fpr, 0.0);
  EXPECT_EQ(r.roc.back().fpr, 1.0);
}
