#include <cmath>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "readmit/cohort.hpp"
#include "readmit/error.hpp"

using namespace readmit;

namespace {

std::string header12() {
  std::string h = "row_id";
  for (const auto& f : canonical_schema()) h += "," + f.name;
  return h + ",readmitted\n";
}

std::string row12(const std::string& id, int label, int blank = -1) {
  std::string r = id;
  for (int j = 0; j < 12; ++j) r += "," + (j == blank ? std::string() : std::to_string(1.5 + j));
  return r + "," + std::to_string(label) + "\n";
}

LabeledCohort from_text(const std::string& text) {
  std::istringstream in(text);
  const auto schema = canonical_schema();
  return read_cohort(in, schema);
}

LabeledCohort labelled(std::vector<int> labels) {
  const auto n = static_cast<Index>(labels.size());
  LabeledCohort c;
  c.matrix = DataMatrix::fully_observed({{"x", FeatureCategory::laboratory, ""}}, Eigen::MatrixXd::Zero(n, 1));
  c.labels = std::move(labels);
  for (Index i = 0; i < n; ++i) c.row_ids.push_back("r" + std::to_string(i));
  return c;
}

}  // namespace

TEST(Schema, TwelveUniqueFeatures) {
  const auto s = canonical_schema();
  ASSERT_EQ(s.size(), 12u);
  std::set<std::string> names;
  for (const auto& f : s) names.insert(f.name);
  EXPECT_EQ(names.size(), 12u);
  EXPECT_EQ(s.front().name, "age");
  EXPECT_EQ(s.back().name, "INR");
  EXPECT_EQ(extended_schema().size(), 33u);
}

TEST(LoadCohort, FullyObservedFile) {
  const auto c = from_text(header12() + row12("a", 0) + row12("b", 1) + row12("c", 0));
  EXPECT_EQ(c.rows(), 3);
  EXPECT_TRUE(c.matrix.is_fully_observed());
  EXPECT_EQ(c.labels, (std::vector<int>{0, 1, 0}));
  EXPECT_EQ(c.row_ids, (std::vector<std::string>{"a", "b", "c"}));
}

TEST(LoadCohort, MissingColumnIsError) {
  std::string header = "row_id";
  for (const auto& f : canonical_schema()) {
    if (f.name != "INR") header += "," + f.name;
  }
  header += ",readmitted\n";
  EXPECT_THROW(from_text(header + "a,1,2,3,4,5,6,7,8,9,10,11,0\n"), DataError);
}

TEST(LoadCohort, BlankSodiumCellMaskedExactlyThere) {
  const int sodium = 6;
  const auto c = from_text(header12() + row12("a", 0) + row12("b", 1, sodium) + row12("c", 0));
  EXPECT_EQ(c.matrix.missing_count(), 1);
  EXPECT_FALSE(c.matrix.observed(1, c.matrix.column_index("sodium")));
}

TEST(LoadCohort, MissingTokensAndColumnReordering) {
  std::string text = "readmitted";
  const auto schema = canonical_schema();
  for (auto it = schema.rbegin(); it != schema.rend(); ++it) text += "," + it->name;
  text += "\n1,NA,NaN";
  for (int j = 0; j < 10; ++j) text += "," + std::to_string(j);
  text += "\n";
  const auto c = from_text(text);
  EXPECT_FALSE(c.matrix.observed(0, c.matrix.column_index("INR")));
  EXPECT_FALSE(c.matrix.observed(0, c.matrix.column_index("PT")));
  EXPECT_DOUBLE_EQ(c.matrix.value(0, c.matrix.column_index("age")), 9.0);
  EXPECT_EQ(c.row_ids.size(), 1u);
}

TEST(LoadCohort, RejectsBadInput) {
  EXPECT_THROW(from_text(""), DataError);
  EXPECT_THROW(from_text(header12()), DataError);
  EXPECT_THROW(from_text(header12() + row12("a", 2)), DataError);
  std::string bad = row12("a", 0);
  bad.replace(bad.find("1.5"), 3, "abc");
  EXPECT_THROW(from_text(header12() + bad), DataError);
  const auto schema = canonical_schema();
  EXPECT_THROW(load_cohort("/nonexistent/cohort.csv", schema), MissingArtifactError);
}

TEST(CohortFile, RoundTripIsBitExact) {
  auto spec = group_cohort_spec(200, 0.2, 17);
  const auto original = generate_synthetic(spec);
  ASSERT_GT(original.matrix.missing_count(), 0);
  std::stringstream buffer;
  write_cohort(buffer, original);
  const auto schema = canonical_schema();
  const auto back = read_cohort(buffer, schema);
  ASSERT_EQ(back.rows(), original.rows());
  EXPECT_EQ(back.labels, original.labels);
  EXPECT_EQ(back.row_ids, original.row_ids);
  EXPECT_TRUE((back.matrix.mask() == original.matrix.mask()).all());
  for (Index i = 0; i < back.rows(); ++i) {
    for (Index j = 0; j < back.matrix.cols(); ++j) {
      if (original.matrix.observed(i, j)) {
        ASSERT_EQ(back.matrix.value(i, j), original.matrix.value(i, j));
      }
    }
  }
}

TEST(Split, CohortOf2316Arithmetic) {
  EXPECT_EQ(test_count(2316, 0.8), 463);
  std::vector<int> labels(2316, 0);
  std::fill(labels.begin(), labels.begin() + 160, 1);
  const auto s = split(labelled(labels), 0.8, 5, false);
  EXPECT_EQ(s.test.size(), 463u);
  EXPECT_EQ(s.train.size(), 1853u);
}

TEST(Split, DeterministicForSeed) {
  const auto c = labelled({1, 0, 1, 0, 0, 1, 0, 0, 0, 0});
  const auto a = split(c, 0.8, 11, true);
  const auto b = split(c, 0.8, 11, true);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
}

TEST(Split, StratifiedPerClassFloor) {
  const auto c = labelled({1, 1, 0, 0, 0, 0, 0, 0, 0, 0});
  const auto s = split(c, 0.8, 3, true);
  int pos = 0;
  int neg = 0;
  for (const Index i : s.test) (c.labels[static_cast<std::size_t>(i)] == 1 ? pos : neg)++;
  EXPECT_EQ(pos, 0);
  EXPECT_EQ(neg, 1);
  EXPECT_EQ(s.train.size(), 9u);
}

TEST(Split, PartitionProperty) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 300);
    const double fraction = 0.05 + 0.9 * static_cast<double>(rng() % 1000) / 1000.0;
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (auto& y : labels) y = static_cast<int>(rng() % 5 == 0);
    labels[0] = 1;
    labels[1] = 0;
    const bool stratified = trial % 2 == 0;
    const auto s = split(labelled(labels), fraction, rng(), stratified);
    std::vector<Index> all = s.train;
    all.insert(all.end(), s.test.begin(), s.test.end());
    std::sort(all.begin(), all.end());
    std::vector<Index> expected(static_cast<std::size_t>(n));
    std::iota(expected.begin(), expected.end(), Index{0});
    ASSERT_EQ(all, expected) << "n=" << n;
    ASSERT_TRUE(std::is_sorted(s.train.begin(), s.train.end()));
    ASSERT_TRUE(std::is_sorted(s.test.begin(), s.test.end()));
    if (!stratified) {
      ASSERT_EQ(static_cast<Index>(s.test.size()), test_count(n, fraction));
    }
  }
}

TEST(Split, RejectsBadArguments) {
  const auto c = labelled({1, 0, 0});
  EXPECT_THROW(split(c, 1.0, 0, true), ConfigError);
  EXPECT_THROW(split(c, 0.0, 0, true), ConfigError);
  EXPECT_THROW(split(labelled({0, 0, 0}), 0.5, 0, true), DataError);
}

TEST(Synthetic, AgeGroupMeansMatchTable) {
  const auto c = generate_synthetic(group_cohort_spec(5000, 0.07, 2024));
  const Index age = c.matrix.column_index("age");
  double sum[2] = {0, 0};
  double count[2] = {0, 0};
  for (Index i = 0; i < c.rows(); ++i) {
    const int y = c.labels[static_cast<std::size_t>(i)];
    sum[y] += c.matrix.value(i, age);
    count[y] += 1;
  }
  // Three standard errors of each group mean.
  EXPECT_NEAR(sum[0] / count[0], 65.1, 3.0 * 15.5 / std::sqrt(count[0]));
  EXPECT_NEAR(sum[1] / count[1], 73.5, 3.0 * 13.4 / std::sqrt(count[1]));
}

TEST(Synthetic, NoMissingnessGivesFullMask) {
  auto spec = group_cohort_spec(300, 0.1, 1);
  for (auto& f : spec.features) f.missing_rate = 0.0;
  EXPECT_TRUE(generate_synthetic(spec).matrix.is_fully_observed());
}

TEST(Synthetic, PrevalenceWithinBinomialBand) {
  const auto c = generate_synthetic(group_cohort_spec(1000, 0.1, 8));
  const auto pos = c.count_label(1);
  EXPECT_GE(pos, 70);
  EXPECT_LE(pos, 130);
}

TEST(Synthetic, SameSpecSameCohort) {
  const auto spec = planted_signal_spec(500, 0.07, 3);
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_TRUE((a.matrix.mask() == b.matrix.mask()).all());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.matrix.cols(); ++j) {
      if (a.matrix.observed(i, j)) {
        ASSERT_EQ(a.matrix.value(i, j), b.matrix.value(i, j));
      }
    }
  }
}

TEST(Synthetic, MomentsConvergeAtLargeN) {
  SynthCohortSpec spec;
  spec.n = 100000;
  spec.prevalence = 0.5;
  spec.seed = 4;
  spec.features.push_back({{"a", FeatureCategory::laboratory, ""}, 10.0, 2.0, 14.0, 3.0});
  spec.features.push_back({{"b", FeatureCategory::laboratory, ""}, -1.0, 0.5, -1.0, 0.5});
  const auto c = generate_synthetic(spec);
  for (Index j = 0; j < 2; ++j) {
    for (int g = 0; g < 2; ++g) {
      std::vector<double> v;
      for (Index i = 0; i < c.rows(); ++i) {
        if (c.labels[static_cast<std::size_t>(i)] == g) v.push_back(c.matrix.value(i, j));
      }
      const auto& f = spec.features[static_cast<std::size_t>(j)];
      const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double ss = 0;
      for (const double x : v) ss += (x - mean) * (x - mean);
      const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
      const double target_mean = g == 1 ? f.mean1 : f.mean0;
      const double target_sd = g == 1 ? f.sd1 : f.sd0;
      const double tol = 4.0 * target_sd / std::sqrt(static_cast<double>(v.size()));
      EXPECT_NEAR(mean, target_mean, tol);
      EXPECT_NEAR(sd, target_sd, tol);
    }
  }
}

TEST(Synthetic, SpecJsonRoundTrip) {
  const auto spec = planted_signal_spec(123, 0.2, 9);
  const nlohmann::json j = spec;
  const auto back = j.get<SynthCohortSpec>();
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(back);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_TRUE((a.matrix.mask() == b.matrix.mask()).all());
}

TEST(Synthetic, PlantedSignalShape) {
  const auto spec = planted_signal_spec(10, 0.1, 0);
  const auto& age = spec.features[0];
  EXPECT_DOUBLE_EQ(age.mean1, 65.1 + 2.0 * (73.5 - 65.1));
  const auto& spo2 = spec.features[2];
  EXPECT_DOUBLE_EQ(spo2.mean1, 91.9);
  EXPECT_DOUBLE_EQ(spo2.sd1, 7.5);
  const auto& chloride = spec.features[4];
  EXPECT_NEAR(chloride.mean1, 102.4 + 0.3 * (106.8 - 102.4), 1e-12);
}

TEST(Synthetic, ValidationErrors) {
  auto spec = group_cohort_spec(100, 0.0, 0);
  EXPECT_THROW(spec.validate(), ConfigError);
  spec.prevalence = 0.1;
  spec.features[0].sd0 = -1.0;
  EXPECT_THROW(spec.validate(), ConfigError);
}
